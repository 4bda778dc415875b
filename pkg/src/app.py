# src/app.py
import math
from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from src import __version__
from src.config import ModelSection, RunConfig
from src.solver import KineticSolver
from src.tools.lattice import ModelParams, build_grid
from src.tools.spectrum import spectrum_frame

MAX_API_POINTS = 1024

app = FastAPI(title="Hubbard Boltzmann Solver API", version=__version__)


class SpectrumRequest(BaseModel):
    model: ModelSection


class SpectrumResponse(BaseModel):
    min_gap: float
    rows: List[Dict[str, float]]


class RunResponse(BaseModel):
    trajectory: str
    snapshots: List[str]
    records: int
    final: Dict[str, Optional[float]] = Field(..., description="Last trajectory record")


def _check_size(model: ModelSection) -> None:
    n_points = 1
    for n in model.grid_sizes:
        n_points *= n
    if n_points > MAX_API_POINTS:
        raise HTTPException(status_code=422, detail=f"grid has {n_points} points, the API accepts at most {MAX_API_POINTS}")


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/spectrum", response_model=SpectrumResponse)
def spectrum(req: SpectrumRequest):
    _check_size(req.model)
    params = ModelParams(U=req.model.U, J=req.model.J, dim=req.model.dim)
    frame = spectrum_frame(params, build_grid(params, req.model.grid_sizes))
    return SpectrumResponse(min_gap=float(frame["gap"].min()), rows=frame.astype(float).to_dict(orient="records"))


@app.post("/run", response_model=RunResponse)
def run(config: RunConfig):
    _check_size(config.model)
    try:
        result: Dict[str, Any] = KineticSolver(config).run()
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))

    if result.get("status") != "success":
        raise HTTPException(status_code=500, detail=result.get("message", "run failed"))

    final = {k: (None if math.isnan(v) else v) for k, v in result["final"].items()}
    return RunResponse(trajectory=result["trajectory"], snapshots=result["snapshots"], records=result["records"], final=final)
