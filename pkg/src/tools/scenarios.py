# src/tools/scenarios.py
from __future__ import annotations

import logging
from typing import NamedTuple, Optional

import numpy as np

from src.tools.dynamics import DistributionState
from src.tools.lattice import MomentumGrid

logger = logging.getLogger(__name__)


def _logistic(x: np.ndarray) -> np.ndarray:
    """1 / (exp(x) + 1) without overflow."""
    return 0.5 * (1.0 - np.tanh(0.5 * x))


def make_equilibrium(grid: MomentumGrid, alpha_plus: float, alpha_minus: float, beta: float) -> DistributionState:
    """Famille d'équilibre f^a_k = 1 / (exp(alpha_a + beta J_k) + 1), spins identiques."""
    jk = grid.dispersion
    f_plus = _logistic(alpha_plus + beta * jk)
    f_minus = _logistic(alpha_minus + beta * jk)
    return DistributionState.from_planes(f_minus, f_plus)


def make_pump_bump(grid: MomentumGrid, center: float, width: float, amplitude: float) -> DistributionState:
    """
    Pair excitation on the energy shell J_k ~ center:
    f+ = amplitude * exp(-(J_k - center)^2 / 2 width^2), f- = 1 - f+.
    """
    if not width > 0:
        raise ValueError(f"pump width must be > 0, got {width}")
    if not 0.0 <= amplitude <= 1.0:
        raise ValueError(f"pump amplitude must lie in [0, 1], got {amplitude}")
    bump = amplitude * np.exp(-0.5 * ((grid.dispersion - center) / width) ** 2)
    return DistributionState.from_planes(1.0 - bump, bump)


def make_ground_plus_noise(grid: MomentumGrid, noise: float, seed: Optional[int] = 0) -> DistributionState:
    """État fondamental (f+ = 0, f- = 1) + excitations aléatoires uniformes de taille <= noise."""
    if not 0.0 <= noise <= 1.0:
        raise ValueError(f"noise amplitude must lie in [0, 1], got {noise}")
    rng = np.random.default_rng(seed)
    n = grid.n_points
    f_plus = noise * rng.random(n)
    f_minus = 1.0 - noise * rng.random(n)
    return DistributionState.from_planes(f_minus, f_plus)


def make_probe_state(
    grid: MomentumGrid,
    seed: Optional[int] = 0,
    low: float = 0.2,
    high: float = 0.8,
    spin_symmetric: bool = True,
) -> DistributionState:
    """Champ logistique aléatoire lisse dans [low, high], pour comparer les noyaux."""
    if not 0.0 <= low < high <= 1.0:
        raise ValueError(f"probe bounds must satisfy 0 <= low < high <= 1, got ({low}, {high})")
    rng = np.random.default_rng(seed)
    k = grid.momenta
    n_planes = 2 if spin_symmetric else 4
    planes = []
    for _ in range(n_planes):
        offset, slope, wave = rng.normal(size=3)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=grid.dim)
        field = offset + 2.0 * slope * grid.dispersion + wave * np.sin(k + phases).mean(axis=1)
        planes.append(low + (high - low) * _logistic(field))
    if spin_symmetric:
        return DistributionState.from_planes(planes[0], planes[1])
    return DistributionState(np.array(planes).reshape(2, 2, grid.n_points))


class EquilibriumFit(NamedTuple):
    alpha_plus: float
    alpha_minus: float
    beta: float
    residual: float


def fit_equilibrium(state: DistributionState, grid: MomentumGrid, margin: float = 1e-12) -> EquilibriumFit:
    """
    Least-squares fit of logit(f^a_k) = -alpha_a - beta J_k over both species and spins.

    Points with f within `margin` of 0 or 1 are dropped; a majority must remain and
    the retained J_k must vary.
    """
    f = state.f
    jk = np.broadcast_to(grid.dispersion, f.shape)
    species = np.broadcast_to(np.arange(2)[:, None, None], f.shape)
    inside = (f > margin) & (f < 1.0 - margin)
    if np.count_nonzero(inside) * 2 <= f.size:
        raise ValueError("fit_equilibrium needs occupations strictly inside (0, 1) on a majority of points")

    x = jk[inside]
    if np.var(x) < 1e-12:
        raise ValueError("fit_equilibrium is ill-conditioned: J_k does not vary over the retained points")

    y = np.log(f[inside]) - np.log1p(-f[inside])
    sp = species[inside]
    # columns: alpha_minus, alpha_plus, beta (logit = -alpha - beta J)
    design = np.column_stack([-(sp == 0).astype(float), -(sp == 1).astype(float), -x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    alpha_minus, alpha_plus, beta = (float(c) for c in coef)
    return EquilibriumFit(alpha_plus=alpha_plus, alpha_minus=alpha_minus, beta=beta, residual=residual)
