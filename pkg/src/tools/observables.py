# src/tools/observables.py
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from src.tools.dynamics import DistributionState, stationarity_residual
from src.tools.kernels import UP, DOWN, CollisionKernel, KernelConfig
from src.tools.lattice import MomentumGrid
from src.tools.spectrum import MINUS, PLUS, SpectralTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    S: float
    N_plus_up: float
    N_plus_down: float
    N_minus_up: float
    N_minus_down: float
    E_kin: float
    Ddot: float
    f_min: float
    f_max: float
    rhs_norm: float

    def as_row(self) -> Dict[str, float]:
        return asdict(self)


RECORD_COLUMNS: List[str] = [f.name for f in fields(ObservableRecord)]


class SpeciesCounts(NamedTuple):
    plus_up: float
    plus_down: float
    minus_up: float
    minus_down: float


def _xlogx(x: np.ndarray) -> np.ndarray:
    positive = x > 0.0
    return np.where(positive, x * np.log(np.where(positive, x, 1.0)), 0.0)


def entropy(state: DistributionState) -> float:
    """S = -(1/N) sum_{a,s,k} [f ln f + (1-f) ln(1-f)], with 0 ln 0 = 0."""
    f = np.clip(state.f, 0.0, 1.0)
    return float(-np.sum(_xlogx(f) + _xlogx(1.0 - f)) / state.n_points)


def species_counts(state: DistributionState) -> SpeciesCounts:
    mean = state.f.mean(axis=2)
    return SpeciesCounts(
        plus_up=float(mean[PLUS, UP]),
        plus_down=float(mean[PLUS, DOWN]),
        minus_up=float(mean[MINUS, UP]),
        minus_down=float(mean[MINUS, DOWN]),
    )


def kinetic_invariant(state: DistributionState, grid: MomentumGrid) -> float:
    """(1/N) sum_{k,s} J_k (f+ + f-)."""
    return float(np.sum(grid.dispersion * state.f.sum(axis=(0, 1))) / state.n_points)


def entropy_production(state: DistributionState, rhs: np.ndarray) -> float:
    """dS/dt = -(1/N) sum df/dt ln(f / (1 - f)), occupations kept off the boundary."""
    f = np.clip(state.f, 1e-15, 1.0 - 1e-15)
    return float(-np.sum(rhs * (np.log(f) - np.log1p(-f))) / state.n_points)


def ddot_diagnostic(
    state: DistributionState,
    spectral: SpectralTable,
    grid: MomentumGrid,
    config: KernelConfig,
    threads: int = 1,
) -> float:
    """Dérive de la double occupation; rapportée seulement, jamais réinjectée dans l'état."""
    general = KernelConfig("general", config.eta, config.delta)
    return CollisionKernel(grid, general, spectral=spectral, threads=threads).ddot(state)


def observe(
    state: DistributionState,
    grid: MomentumGrid,
    kernel: CollisionKernel,
    ddot_kernel: Optional[CollisionKernel] = None,
) -> ObservableRecord:
    """Une ligne de trajectoire; Ddot vaut NaN sans noyau du régime général."""
    counts = species_counts(state)
    return ObservableRecord(
        t=float(state.t),
        S=entropy(state),
        N_plus_up=counts.plus_up,
        N_plus_down=counts.plus_down,
        N_minus_up=counts.minus_up,
        N_minus_down=counts.minus_down,
        E_kin=kinetic_invariant(state, grid),
        Ddot=ddot_kernel.ddot(state) if ddot_kernel is not None else float("nan"),
        f_min=float(state.f.min()),
        f_max=float(state.f.max()),
        rhs_norm=stationarity_residual(state, kernel),
    )
