# src/tools/lattice.py
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    """
    Hubbard model parameters, energies in units of J.

    U: on-site repulsion, J: hopping scale, dim: spatial dimension of the
    hypercubic lattice (coordination number Z = 2*dim).
    """

    U: float
    J: float = 1.0
    dim: int = 2

    def __post_init__(self) -> None:
        if not np.isfinite(self.U) or self.U < 0:
            raise ValueError(f"U must be a finite number >= 0, got {self.U}")
        if not np.isfinite(self.J) or self.J <= 0:
            raise ValueError(f"J must be a finite number > 0, got {self.J}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dim must be an integer >= 2, got {self.dim}")

    @property
    def Z(self) -> int:
        return 2 * self.dim


def dispersion(params: ModelParams, k: Sequence[float] | np.ndarray) -> float | np.ndarray:
    """
    Nearest-neighbour dispersion J_k = (J/d) * sum_i cos(k_i).

    `k` is one momentum tuple or an array whose last axis holds the d components.
    """
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != params.dim:
        raise ValueError(f"momentum has {k.shape[-1]} components, model has dim={params.dim}")
    value = params.J / params.dim * np.cos(k).sum(axis=-1)
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class MomentumGrid:
    """
    Periodic momentum grid k_i = 2*pi*m_i/n_i with flat (C-order) point indexing.

    `add_table[i, j]` and `sub_table[i, j]` give the flat index of k_i + k_j and
    k_i - k_j modulo the grid, so momentum conservation in collision sums is exact.
    """

    params: ModelParams
    sizes: tuple[int, ...]
    indices: np.ndarray
    momenta: np.ndarray
    dispersion: np.ndarray
    add_table: np.ndarray = field(repr=False)
    sub_table: np.ndarray = field(repr=False)

    @property
    def n_points(self) -> int:
        return int(self.dispersion.size)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    def index_of(self, m: Sequence[int]) -> int:
        """Flat index of the integer tuple m (wrapped into the grid)."""
        wrapped = np.mod(np.asarray(m, dtype=np.int64), self.sizes)
        return int(np.ravel_multi_index(tuple(wrapped), self.sizes))

    def add(self, i: int, j: int) -> int:
        return int(self.add_table[i, j])

    def sub(self, i: int, j: int) -> int:
        return int(self.sub_table[i, j])

    def negate(self, i: int) -> int:
        return int(self.sub_table[self.index_of([0] * self.dim), i])

    def energy_spacing(self) -> float:
        """Mean spacing of the distinct J_k values (grid energy resolution)."""
        levels = np.unique(np.round(self.dispersion, 12))
        if levels.size < 2:
            return 0.0
        return float((levels[-1] - levels[0]) / (levels.size - 1))

    def default_eta(self) -> float:
        return 0.5 * self.energy_spacing()

    def zero_dispersion_mask(self, tol: float = 1e-12) -> np.ndarray:
        return np.abs(self.dispersion) <= tol * self.params.J


def _axis_cosines(n: int) -> np.ndarray:
    """cos(2*pi*m/n) for m = 0..n-1, exactly even under m -> n-m and odd under theta -> pi-theta."""
    m = np.arange(n)
    folded = np.minimum(m, n - m)
    theta = 2.0 * np.pi * folded / n
    values = np.where(4 * folded < n, np.cos(theta), -np.cos(np.pi - theta))
    return np.where(4 * folded == n, 0.0, values)


def build_grid(params: ModelParams, sizes: Sequence[int]) -> MomentumGrid:
    """Build the periodic grid and tabulate J_k plus the momentum addition tables."""
    sizes = tuple(int(n) for n in sizes)
    if len(sizes) != params.dim:
        raise ValueError(f"grid has {len(sizes)} axes, model has dim={params.dim}")
    for axis, n in enumerate(sizes):
        if n < 2:
            raise ValueError(f"grid size {n} on axis {axis} must be >= 2")

    # 1) Tuples entiers m en ordre C, puis impulsions physiques
    mesh = np.meshgrid(*[np.arange(n) for n in sizes], indexing="ij")
    indices = np.stack([g.ravel() for g in mesh], axis=-1).astype(np.int64)
    momenta = 2.0 * np.pi * indices / np.asarray(sizes, dtype=float)

    # 2) Dispersion via tables de cosinus par axe (zéros exacts quand ça s'annule)
    cosines = [_axis_cosines(n)[indices[:, axis]] for axis, n in enumerate(sizes)]
    jk = params.J / params.dim * np.sum(cosines, axis=0)
    jk = np.where(np.abs(jk) < 1e-14 * params.J, 0.0, jk)

    # 3) Arithmétique des impulsions fermée sur les indices plats
    summed = np.mod(indices[:, None, :] + indices[None, :, :], sizes)
    diffed = np.mod(indices[:, None, :] - indices[None, :, :], sizes)
    add_table = np.ravel_multi_index(tuple(np.moveaxis(summed, -1, 0)), sizes).astype(np.intp)
    sub_table = np.ravel_multi_index(tuple(np.moveaxis(diffed, -1, 0)), sizes).astype(np.intp)

    grid = MomentumGrid(
        params=params,
        sizes=sizes,
        indices=indices,
        momenta=momenta,
        dispersion=jk,
        add_table=add_table,
        sub_table=sub_table,
    )
    logger.debug("Grid %s built: %d points, energy spacing %.4g", sizes, grid.n_points, grid.energy_spacing())
    return grid
