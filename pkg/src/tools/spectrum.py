# src/tools/spectrum.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Tuple

import numpy as np
import pandas as pd

from src.tools.lattice import ModelParams, MomentumGrid

logger = logging.getLogger(__name__)

# Species index used throughout: row 0 of O is the hole branch (a = -),
# row 1 the quasi-particle branch (a = +).
MINUS = 0
PLUS = 1

SpectralOrder = Literal["strong", "weak"]
PHYSICAL_EPS = 1e-9


def _scalar_or_array(value: np.ndarray) -> float | np.ndarray:
    return float(value) if np.ndim(value) == 0 else value


def energies(params: ModelParams, jk: float | np.ndarray) -> Tuple[float | np.ndarray, float | np.ndarray]:
    """Hole and quasi-particle energies E(-), E(+) = (U - J_k -/+ sqrt(J_k^2 + U^2)) / 2."""
    jk = np.asarray(jk, dtype=float)
    root = np.hypot(jk, params.U)
    e_minus = 0.5 * (params.U - jk - root)
    e_plus = 0.5 * (params.U - jk + root)
    return _scalar_or_array(e_minus), _scalar_or_array(e_plus)


def direct_gap(params: ModelParams, jk: float | np.ndarray) -> float | np.ndarray:
    return _scalar_or_array(np.hypot(np.asarray(jk, dtype=float), params.U))


def rotation_matrix(params: ModelParams, jk: float | np.ndarray) -> np.ndarray:
    """
    Exact (strong-order) rotation O[a, X] diagonalizing the two-level problem at J_k.

    Rows are [cos phi, sin phi] (hole) and [-sin phi, cos phi] (quasi-particle);
    sin phi carries the sign of J_k and vanishes at J_k = 0.
    Returns shape (2, 2) for a scalar J_k and (..., 2, 2) for arrays.
    """
    jk = np.asarray(jk, dtype=float)
    root = np.hypot(jk, params.U)
    degenerate = root == 0.0
    safe_root = np.where(degenerate, 1.0, root)
    # cos^2 = (root + U) / 2 root and sin = J_k / sqrt(2 root (root + U)), no cancellation at U >> |J_k|
    cos_phi = np.where(degenerate, 1.0, np.sqrt((safe_root + params.U) / (2.0 * safe_root)))
    sin_phi = np.where(degenerate, 0.0, jk / np.sqrt(2.0 * safe_root * (safe_root + params.U)))
    rot = np.empty(jk.shape + (2, 2))
    rot[..., 0, 0] = cos_phi
    rot[..., 0, 1] = sin_phi
    rot[..., 1, 0] = -sin_phi
    rot[..., 1, 1] = cos_phi
    return rot


def weak_rotation_matrix(params: ModelParams, jk: float | np.ndarray) -> np.ndarray:
    """First-order rotation for |U/J_k| << 1 in the weak eigenvalue ordering."""
    jk = np.asarray(jk, dtype=float)
    if np.any(jk == 0.0):
        raise ValueError("weak-order rotation is singular at J_k = 0")
    u = params.U / (2.0 * jk)
    rot = np.empty(jk.shape + (2, 2))
    rot[..., 0, 0] = 1.0 + u
    rot[..., 0, 1] = 1.0 - u
    rot[..., 1, 0] = -1.0 + u
    rot[..., 1, 1] = 1.0 + u
    return rot / np.sqrt(2.0)


def eigen_residual(
    params: ModelParams,
    jk: float | np.ndarray,
    rotation: np.ndarray,
    e_minus: float | np.ndarray,
    e_plus: float | np.ndarray,
) -> float:
    """max |(J_k/2) sum_X O[a,X] - (-E_a + U_Y) O[a,Y]| over points, branches and Y."""
    jk = np.asarray(jk, dtype=float)[..., None, None]
    e = np.stack([np.asarray(e_minus, dtype=float), np.asarray(e_plus, dtype=float)], axis=-1)[..., :, None]
    u_y = np.array([0.0, params.U])
    lhs = 0.5 * jk * rotation.sum(axis=-1, keepdims=True)
    rhs = (-e + u_y) * rotation
    return float(np.max(np.abs(lhs - rhs)))


def orthogonality_residual(rotation: np.ndarray) -> float:
    gram = rotation @ np.swapaxes(rotation, -1, -2)
    return float(np.max(np.abs(gram - np.eye(2))))


# ---------------------------------------------------------------------
# Ground-state correlators and the correlator <-> distribution algebra
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class GroundStateCorrelators:
    f00: np.ndarray
    f01: np.ndarray
    f11: np.ndarray
    D: float = 0.0

    def matrix(self) -> np.ndarray:
        """Full (N, 2, 2) correlator matrix f^{XY}."""
        return np.stack(
            [np.stack([self.f00, self.f01], axis=-1), np.stack([self.f01, self.f11], axis=-1)],
            axis=-2,
        )


def ground_state_correlators(params: ModelParams, grid: MomentumGrid, D: float = 0.0) -> GroundStateCorrelators:
    if not 0.0 <= D <= 0.5:
        raise ValueError(f"double occupancy D must lie in [0, 1/2], got {D}")
    jk = grid.dispersion
    root = np.hypot(jk, params.U)
    safe_root = np.where(root == 0.0, 1.0, root)
    j_ratio = np.where(root == 0.0, 0.0, jk / safe_root)
    u_ratio = np.where(root == 0.0, 1.0, params.U / safe_root)
    f01 = 0.25 * j_ratio
    f00 = 0.25 + 0.25 * u_ratio - D
    f11 = 0.25 - 0.25 * u_ratio + D
    return GroundStateCorrelators(f00=f00, f01=f01, f11=f11, D=D)


def disconnected_part(D: float = 0.0) -> np.ndarray:
    """delta^{XY} (1/4 + (-1)^X (1/4 - 2D)): 1/2 - 2D on X=0, 2D on X=1."""
    return np.diag([0.5 - 2.0 * D, 2.0 * D])


def connected_correlators(gs: GroundStateCorrelators) -> np.ndarray:
    return gs.matrix() - disconnected_part(gs.D)


def rotate_correlators(rotation: np.ndarray, corr: np.ndarray) -> np.ndarray:
    """f^{ab} = sum_{XY} O[a,X] O[b,Y] f^{XY}."""
    return np.einsum("...ax,...by,...xy->...ab", rotation, rotation, corr)


def correlator_to_distribution(
    params: ModelParams,
    jk: float | np.ndarray,
    f_corr_diag: Tuple[float | np.ndarray, float | np.ndarray],
    D: float = 0.0,
) -> Tuple[float | np.ndarray, float | np.ndarray]:
    """
    Map the rotated diagonal correlators (f^{--,corr}, f^{++,corr}) to (f^-, f^+).

    f^a = 1/2 + (1/2 - 2D) sum_X (-1)^X (O[a,X])^2 + 2 f^{aa,corr}.
    Values outside [-1e-9, 1 + 1e-9] are flagged with a warning.
    """
    rot = rotation_matrix(params, jk)
    signed = rot[..., :, 0] ** 2 - rot[..., :, 1] ** 2
    corr = np.stack([np.asarray(f_corr_diag[0], dtype=float), np.asarray(f_corr_diag[1], dtype=float)], axis=-1)
    f = 0.5 + (0.5 - 2.0 * D) * signed + 2.0 * corr
    if np.any(f < -PHYSICAL_EPS) or np.any(f > 1.0 + PHYSICAL_EPS):
        logger.warning("⚠️ Distribution hors de [0, 1]: min=%.3g max=%.3g", float(np.min(f)), float(np.max(f)))
    return _scalar_or_array(f[..., MINUS]), _scalar_or_array(f[..., PLUS])


def distribution_to_correlator(
    params: ModelParams,
    jk: float | np.ndarray,
    f_minus: float | np.ndarray,
    f_plus: float | np.ndarray,
    D: float = 0.0,
) -> np.ndarray:
    """Inverse relation: connected f^{XY,corr} (shape (..., 2, 2)) for diagonal distributions."""
    rot = rotation_matrix(params, jk)
    f = np.stack([np.asarray(f_minus, dtype=float), np.asarray(f_plus, dtype=float)], axis=-1)
    weighted = 0.5 * np.einsum("...ax,...ay,...a->...xy", rot, rot, f)
    offset = np.diag([-0.25 - (0.25 - D), -0.25 + (0.25 - D)])
    return weighted + offset


# ---------------------------------------------------------------------
# Per-grid spectral tables
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralTable:
    """
    Per-k energies and rotations. `order` records the eigenvalue convention;
    `active` is False where the weak-order rotation is undefined (J_k = 0).
    """

    order: SpectralOrder
    U: float
    e_minus: np.ndarray
    e_plus: np.ndarray
    rotation: np.ndarray
    gap: np.ndarray
    active: np.ndarray

    @property
    def species_energies(self) -> np.ndarray:
        """Shape (2, N): row MINUS then row PLUS."""
        return np.stack([self.e_minus, self.e_plus])

    @property
    def n_masked(self) -> int:
        return int(np.count_nonzero(~self.active))


def build_spectral_table(params: ModelParams, grid: MomentumGrid, order: SpectralOrder = "strong") -> SpectralTable:
    jk = grid.dispersion
    gap = np.hypot(jk, params.U)
    if order == "strong":
        e_minus, e_plus = energies(params, jk)
        return SpectralTable(
            order="strong",
            U=params.U,
            e_minus=np.asarray(e_minus),
            e_plus=np.asarray(e_plus),
            rotation=rotation_matrix(params, jk),
            gap=gap,
            active=np.ones(jk.shape, dtype=bool),
        )
    if order != "weak":
        raise ValueError(f"unknown spectral order '{order}'")

    # Weak ordering: hole branch ~ U/2 - J_k, particle branch ~ U/2, J_k = 0 masked
    active = jk != 0.0
    rotation = np.broadcast_to(np.eye(2), jk.shape + (2, 2)).copy()
    rotation[active] = weak_rotation_matrix(params, jk[active])
    if not np.all(active):
        logger.warning("⚠️ Table ordre faible: %d impulsions avec J_k = 0 masquées", int(np.count_nonzero(~active)))
    return SpectralTable(
        order="weak",
        U=params.U,
        e_minus=0.5 * params.U - jk,
        e_plus=np.full(jk.shape, 0.5 * params.U),
        rotation=rotation,
        gap=gap,
        active=active,
    )


def spectrum_frame(params: ModelParams, grid: MomentumGrid) -> pd.DataFrame:
    """Per-k table (momentum indices, J_k, E_minus, E_plus, gap) in grid order."""
    e_minus, e_plus = energies(params, grid.dispersion)
    frame = pd.DataFrame({f"m{axis + 1}": grid.indices[:, axis] for axis in range(grid.dim)})
    frame["J_k"] = grid.dispersion
    frame["E_minus"] = e_minus
    frame["E_plus"] = e_plus
    frame["gap"] = direct_gap(params, grid.dispersion)
    return frame
