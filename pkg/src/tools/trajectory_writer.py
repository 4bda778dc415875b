# src/tools/trajectory_writer.py
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from src.tools.dynamics import DistributionState
from src.tools.lattice import MomentumGrid
from src.tools.observables import RECORD_COLUMNS, ObservableRecord

logger = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "hubbard-boltzmann-snapshot"
SNAPSHOT_VERSION = 1
FLOAT_FORMAT = "%.17g"


def write_csv(frame: pd.DataFrame, path: str | Path) -> str:
    """Plain RFC-4180 CSV, 17 significant digits, NaN as empty field, LF line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    return str(path)


@dataclass
class TrajectoryWriter:
    """Écrit `trajectory.csv` et les `snapshot_<step>.json` dans un dossier de run."""

    output_dir: str = "runs"

    def __post_init__(self) -> None:
        Path(self.output_dir).mkdir(parents=True, exist_ok=True)

    def write_trajectory(self, records: Sequence[ObservableRecord], filename: str = "trajectory.csv") -> str:
        frame = pd.DataFrame([r.as_row() for r in records], columns=RECORD_COLUMNS)
        path = write_csv(frame, Path(self.output_dir) / filename)
        logger.info("📄 Trajectoire écrite: %s (%d lignes)", path, len(frame))
        return path

    def write_snapshot(self, state: DistributionState, grid: MomentumGrid, step: int) -> str:
        path = Path(self.output_dir) / f"snapshot_{step}.json"
        payload = snapshot_payload(state, grid, step)
        path.write_text(json.dumps(payload), encoding="utf-8")
        logger.debug("Snapshot written: %s", path)
        return str(path)


def snapshot_payload(state: DistributionState, grid: MomentumGrid, step: int) -> Dict[str, Any]:
    """
    Snapshot document. `f` is flat in (a, s, k) C order: species (minus, plus),
    spins (up, down), k the flat grid index over `sizes` in C order.
    """
    return {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "step": int(step),
        "t": float(state.t),
        "grid": {"dim": grid.dim, "sizes": list(grid.sizes), "n_points": grid.n_points},
        "model": {"U": grid.params.U, "J": grid.params.J},
        "order": ["a", "s", "k"],
        "species": ["minus", "plus"],
        "spins": ["up", "down"],
        "f": [float(x) for x in state.f.ravel()],
    }


def read_snapshot(path: str | Path) -> Tuple[DistributionState, Dict[str, Any]]:
    """Charge un snapshot; renvoie l'état et le bloc de métadonnées de la grille."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read snapshot '{path}': {exc}") from exc

    if payload.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"'{path}' is not a {SNAPSHOT_FORMAT} document")
    grid_meta = payload.get("grid") or {}
    n_points = int(np.prod(grid_meta.get("sizes") or [0]))
    values = np.asarray(payload.get("f", []), dtype=float)
    if values.size != 4 * n_points:
        raise ValueError(f"snapshot '{path}' holds {values.size} values, expected {4 * n_points}")
    state = DistributionState(values.reshape(2, 2, n_points), float(payload.get("t", 0.0)))
    return state, grid_meta


def load_snapshot_for_grid(path: str | Path, grid: MomentumGrid) -> DistributionState:
    state, grid_meta = read_snapshot(path)
    sizes: List[int] = list(grid_meta.get("sizes") or [])
    if tuple(sizes) != grid.sizes:
        raise ValueError(f"snapshot grid {sizes} does not match run grid {list(grid.sizes)}")
    return state
