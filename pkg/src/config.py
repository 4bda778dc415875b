# src/config.py
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator


class ConfigError(ValueError):
    """Invalid run configuration; the message lists every problem as a dotted path."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    U: float = Field(..., ge=0, description="On-site repulsion in units of J")
    J: float = Field(1.0, gt=0, description="Hopping energy scale")
    dim: int = Field(..., ge=2, description="Spatial dimension of the hypercubic lattice")
    grid_sizes: List[Annotated[int, Field(ge=2)]] = Field(..., min_length=2, description="Points per axis")

    @model_validator(mode="after")
    def _sizes_match_dim(self) -> "ModelSection":
        if len(self.grid_sizes) != self.dim:
            raise ValueError(f"grid_sizes has {len(self.grid_sizes)} entries but dim={self.dim}")
        return self


class PotentialSpec(_Section):
    kind: Literal["hubbard", "constant", "table"] = "hubbard"
    same: Optional[Union[float, List[float]]] = None
    opposite: Optional[Union[float, List[float]]] = None

    @model_validator(mode="after")
    def _shape_matches_kind(self) -> "PotentialSpec":
        values = (self.same, self.opposite)
        if self.kind == "constant" and any(isinstance(v, list) for v in values):
            raise ValueError("constant potential takes scalar 'same'/'opposite'")
        if self.kind == "table" and not all(isinstance(v, list) for v in values):
            raise ValueError("table potential needs 'same' and 'opposite' lists")
        return self


class KernelSection(_Section):
    regime: Literal["strong", "weak", "general"]
    eta: Optional[float] = Field(None, gt=0, description="Delta broadening; default half the J_k level spacing")
    delta: Literal["gaussian", "resonant"] = "gaussian"
    potential_spec: Optional[PotentialSpec] = None


class EquilibriumInit(_Section):
    kind: Literal["equilibrium"]
    alpha_plus: float = 0.0
    alpha_minus: float = 0.0
    beta: float = 1.0


class PumpBumpInit(_Section):
    kind: Literal["pump_bump"]
    center: float = 0.0
    width: float = Field(..., gt=0)
    amplitude: float = Field(..., ge=0, le=1)


class GroundNoiseInit(_Section):
    kind: Literal["ground_plus_noise"]
    noise: float = Field(..., ge=0, le=1)
    seed: Optional[int] = None


class CustomFileInit(_Section):
    kind: Literal["custom_file"]
    path: str = Field(..., min_length=1)


ScenarioSpec = Annotated[
    Union[EquilibriumInit, PumpBumpInit, GroundNoiseInit, CustomFileInit],
    Field(discriminator="kind"),
]


class IntegrateSection(_Section):
    dt: float = Field(..., gt=0)
    t_final: float = Field(..., ge=0)
    output_every: int = Field(1, ge=1)
    clamp_tolerance: float = Field(1e-9, gt=0)


class OutputSection(_Section):
    directory: str = "runs"
    snapshot_stride: int = Field(0, ge=0, description="0 writes only the final snapshot")


class RunConfig(_Section):
    model: ModelSection
    kernel: KernelSection
    init: ScenarioSpec
    integrate: IntegrateSection
    output: OutputSection = Field(default_factory=OutputSection)
    threads: Optional[int] = Field(None, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _fill_threads(self) -> "RunConfig":
        if self.threads is None:
            self.threads = os.cpu_count() or 1
        return self


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(part) for part in err.get("loc", ())) or "<root>"
        lines.append(f"  {path}: {err.get('msg', 'invalid value')}")
    return "invalid configuration:\n" + "\n".join(lines)


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from exc


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration '{path}': {exc}") from exc
    return parse_config(text)
