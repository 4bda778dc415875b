# src/tools/kernels.py
"""
Collision integrals of the doublon/holon Boltzmann equations.

Occupations are arrays f[a, s, k] with a in (MINUS, PLUS), s in (UP, DOWN)
and k the flat grid index. Every collision takes the incoming pair
(k, s), (p, s_bar) to the outgoing pair (r, s), (q, s_bar) with
r = k + p - q on the grid, so momentum is conserved exactly.

Rates are evaluated block by block over k. The block size depends only on
the grid, each k row is reduced in one fixed order, and threads only decide
which worker handles which block: results are bitwise independent of the
thread count.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np

from src.tools.lattice import ModelParams, MomentumGrid
from src.tools.spectrum import MINUS, PLUS, SpectralTable, build_spectral_table

logger = logging.getLogger(__name__)

UP = 0
DOWN = 1

Regime = Literal["strong", "weak", "general"]
DeltaMode = Literal["gaussian", "resonant"]
Channel = Tuple[int, int, int, int]

RESONANCE_TOL = 1e-9
BLOCK_ELEMENTS = 1 << 18
CACHE_ELEMENTS = 1 << 24

STRONG_CHANNELS = ("pp", "ph", "ph2")
ALL_CHANNELS: Tuple[Channel, ...] = tuple(
    (d, a, b, c) for d in (MINUS, PLUS) for a in (MINUS, PLUS) for b in (MINUS, PLUS) for c in (MINUS, PLUS)
)


def channel_energy_shift(channel: Channel) -> int:
    """Number of quasi-particles created by a (d, a, b, c) collision: mismatch ~ shift * U."""
    d, a, b, c = channel
    return (a + c) - (b + d)


def elastic_channels() -> List[Channel]:
    return [ch for ch in ALL_CHANNELS if channel_energy_shift(ch) == 0]


def inelastic_channels() -> List[Channel]:
    return [ch for ch in ALL_CHANNELS if channel_energy_shift(ch) != 0]


def delta_broadened(x: float | np.ndarray, eta: float) -> float | np.ndarray:
    """Gaussian regularization of the energy delta, exp(-x^2 / 2 eta^2) / (eta sqrt(2 pi))."""
    if eta <= 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    x = np.asarray(x, dtype=float)
    value = np.exp(-0.5 * (x / eta) ** 2) / (eta * np.sqrt(2.0 * np.pi))
    return float(value) if value.ndim == 0 else value


def cross_section_strong(channel: str, jk: float, jp: float, jq: float, jr: float) -> float | np.ndarray:
    """
    Energy-shell cross sections of the strong-coupling kernel:
    pp -> (J_q + J_r)^2, ph -> (J_q - J_p)^2, ph2 -> (J_r - J_p)^2, with r = k + p - q.
    """
    if channel == "pp":
        return (jq + jr) ** 2
    if channel == "ph":
        return (jq - jp) ** 2
    if channel == "ph2":
        return (jr - jp) ** 2
    raise ValueError(f"unknown strong-coupling channel '{channel}'")


def symmetric_cross_section(channel: str, jk, jp, jq, jr):
    """
    In/out symmetric form of `cross_section_strong`, equal to it on the energy shell
    J_r + J_q = J_k + J_p and unchanged under every relabeling of the same collision.
    """
    if channel == "pp":
        return 0.25 * ((jk + jp) + (jr + jq)) ** 2
    if channel == "ph":
        return 0.25 * ((jp - jq) + (jr - jk)) ** 2
    if channel == "ph2":
        return 0.25 * ((jp - jr) + (jq - jk)) ** 2
    raise ValueError(f"unknown strong-coupling channel '{channel}'")


def collision_amplitude(o1, o2, o3, o4, j1, j2, j3, j4):
    """
    Four-point coefficient of a collision with slots 1 = (a, r), 2 = (d, k), 3 = (c, q), 4 = (b, p).

    Each `o` is a pair (O[s, 0], O[s, 1]) of rotation entries of the slot's species
    at the slot's momentum; arrays broadcast. Invariant under swapping slots
    (1 3)(2 4) and (1 2)(3 4).
    """
    s1, s2, s3, s4 = (o[0] + o[1] for o in (o1, o2, o3, o4))
    t1, t2, t3, t4 = (o[0] - o[1] for o in (o1, o2, o3, o4))
    p12 = o1[0] * o2[0] + o1[1] * o2[1]
    p14 = o1[0] * o4[0] + o1[1] * o4[1]
    p23 = o2[0] * o3[0] + o2[1] * o3[1]
    p34 = o3[0] * o4[0] + o3[1] * o4[1]
    x13 = o1[0] * o3[1] + o1[1] * o3[0]
    x24 = o2[0] * o4[1] + o2[1] * o4[0]
    total = (
        j1 * s1 * (t2 * p34 - t3 * x24 + t4 * p23)
        + j2 * s2 * (t1 * p34 - t4 * x13 + t3 * p14)
        + j3 * s3 * (t4 * p12 - t1 * x24 + t2 * p14)
        + j4 * s4 * (t3 * p12 - t2 * x13 + t1 * p23)
    )
    return -total / 16.0


def _balance(fk, fp, fr, fq):
    """Gain/loss bracket f_k f_p (1-f_r)(1-f_q) - f_r f_q (1-f_k)(1-f_p), expanded."""
    return fk * fp * (1.0 - fr - fq) - fr * fq * (1.0 - fk - fp)


def _traffic(fk, fp, fr, fq):
    """Gross bracket f_k f_p (1-f_r)(1-f_q) + f_r f_q (1-f_k)(1-f_p)."""
    return fk * fp * (1.0 - fr) * (1.0 - fq) + fr * fq * (1.0 - fk) * (1.0 - fp)


# ---------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """Spin-symmetric weak-coupling potential: same[q] = V^{ss}_q, opposite[q] = V^{s s_bar}_q."""

    same: np.ndarray
    opposite: np.ndarray

    def value(self, s: int, s_other: int, q: int) -> float:
        return float(self.same[q] if s == s_other else self.opposite[q])


def build_potential(
    grid: MomentumGrid,
    kind: str = "hubbard",
    same: float | Sequence[float] | None = None,
    opposite: float | Sequence[float] | None = None,
) -> Potential:
    n = grid.n_points
    if kind == "hubbard":
        potential = Potential(same=np.zeros(n), opposite=np.full(n, float(grid.params.U)))
    elif kind == "constant":
        potential = Potential(
            same=np.full(n, float(same or 0.0)),
            opposite=np.full(n, float(grid.params.U if opposite is None else opposite)),
        )
    elif kind == "table":
        if same is None or opposite is None:
            raise ValueError("table potential needs both 'same' and 'opposite' arrays")
        potential = Potential(same=np.asarray(same, dtype=float), opposite=np.asarray(opposite, dtype=float))
    else:
        raise ValueError(f"unknown potential kind '{kind}'")

    for name in ("same", "opposite"):
        table = getattr(potential, name)
        if table.shape != (n,):
            raise ValueError(f"potential '{name}' has {table.size} entries, grid has {n} points")
        if not np.all(np.isfinite(table)):
            raise ValueError(f"potential '{name}' must be finite")
        if not np.allclose(table, table[grid.sub_table[0]], rtol=0.0, atol=1e-12):
            raise ValueError(f"potential '{name}' must be symmetric under q -> -q")
    return potential


@dataclass(frozen=True)
class KernelConfig:
    """eta has no default: callers derive it from the grid (`MomentumGrid.default_eta`) or set it."""

    regime: Regime
    eta: float
    delta: DeltaMode = "gaussian"
    potential: Optional[Potential] = None

    def __post_init__(self) -> None:
        if self.regime not in ("strong", "weak", "general"):
            raise ValueError(f"unknown regime '{self.regime}'")
        if self.delta not in ("gaussian", "resonant"):
            raise ValueError(f"unknown delta mode '{self.delta}'")
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")

    def weight(self, mismatch):
        """Energy-delta weight of a collision with the given energy mismatch."""
        if self.delta == "gaussian":
            return delta_broadened(mismatch, self.eta)
        peak = delta_broadened(0.0, self.eta)
        return np.where(np.abs(mismatch) <= RESONANCE_TOL, peak, 0.0)


# ---------------------------------------------------------------------
# Block evaluator
# ---------------------------------------------------------------------

def _occupations(state) -> np.ndarray:
    f = np.asarray(getattr(state, "f", state), dtype=float)
    if f.ndim != 3 or f.shape[:2] != (2, 2):
        raise ValueError(f"occupations must have shape (2, 2, N), got {f.shape}")
    return f


class CollisionKernel:
    """
    Callable RHS evaluator f -> df/dt for one regime on one grid.

    `active` masks momenta out of every collision (their rate is zero);
    `channels` restricts the general kernel to a subset of (d, a, b, c).
    State-independent geometry is cached per block while it fits in memory.
    """

    def __init__(
        self,
        grid: MomentumGrid,
        config: KernelConfig,
        spectral: Optional[SpectralTable] = None,
        threads: int = 1,
        active: Optional[np.ndarray] = None,
        channels: Optional[Iterable[Channel]] = None,
    ):
        self.grid = grid
        self.config = config
        self.threads = max(1, int(threads))
        n = grid.n_points

        if config.regime == "general" and spectral is None:
            spectral = build_spectral_table(grid.params, grid, "strong")
        self.spectral = spectral

        if active is None and spectral is not None and config.regime == "general":
            active = spectral.active
        self.active = None if active is None or np.all(active) else np.asarray(active, dtype=bool)

        self.channels: Tuple[Channel, ...] = tuple(channels) if channels is not None else ALL_CHANNELS
        self.potential = config.potential
        if config.regime == "weak" and self.potential is None:
            self.potential = build_potential(grid, "hubbard")

        block = max(1, BLOCK_ELEMENTS // (n * n))
        self._blocks = [np.arange(start, min(start + block, n)) for start in range(0, n, block)]
        self._q = np.arange(n)
        self._cache: Dict[Tuple[str, int], object] = {}
        self._cache_ok = {
            "strong": 4 * n**3 <= CACHE_ELEMENTS,
            "weak": 3 * n**3 <= CACHE_ELEMENTS,
            "general": (1 + len(self.channels)) * n**3 <= CACHE_ELEMENTS,
            "ddot": (1 + len(ALL_CHANNELS)) * n**3 <= CACHE_ELEMENTS,
        }
        self._rate_scale: Optional[float] = None

    # -- public API -----------------------------------------------------

    def __call__(self, state) -> np.ndarray:
        f = self._prepare(state)
        if self.config.regime == "strong":
            return self._run(lambda ks: self._strong_block(f, ks, gross=False))
        if self.config.regime == "weak":
            return self._run(lambda ks: self._weak_block(f, ks))
        return self._run(lambda ks: self._general_block(f, ks))

    def scattering_rate(self, state) -> np.ndarray:
        """Gross strong-coupling collision rate per mode (gain plus loss traffic)."""
        if self.config.regime != "strong":
            raise ValueError("scattering_rate is defined for the strong regime")
        f = self._prepare(state)
        return self._run(lambda ks: self._strong_block(f, ks, gross=True))

    def ddot(self, state) -> float:
        """Double-occupancy drift from the general-regime collision machinery."""
        if self.spectral is None or self.spectral.order != "strong":
            raise ValueError("ddot needs a strong-order spectral table")
        f = self._prepare(state)
        blocks = self._map(lambda ks: self._ddot_block(f, ks))
        n = self.grid.n_points
        return float(-4.0 * np.pi / n**3 * np.sum(np.concatenate(blocks)))

    def rate_scale(self) -> float:
        """2 pi c^2 <delta weight> over all (k, p, q), c the regime's coupling scale."""
        if self._rate_scale is None:
            n = self.grid.n_points
            total = float(np.sum(np.concatenate(self._map(self._mean_weight_block))))
            mean_weight = total / n**3
            if self.config.regime == "weak":
                coupling = float(max(np.max(np.abs(self.potential.same)), np.max(np.abs(self.potential.opposite))))
            else:
                coupling = self.grid.params.J
            scale = 2.0 * np.pi * coupling**2 * mean_weight
            self._rate_scale = scale if scale > 0 else 1.0
        return self._rate_scale

    # -- plumbing -------------------------------------------------------

    def _prepare(self, state) -> np.ndarray:
        f = _occupations(state)
        if f.shape[2] != self.grid.n_points:
            raise ValueError(f"state has {f.shape[2]} momenta, grid has {self.grid.n_points}")
        overshoot = max(float(-f.min()), float(f.max() - 1.0), 0.0)
        if overshoot > 0.0:
            logger.debug("Clamping occupations before collision sum (overshoot %.3g)", overshoot)
            f = np.clip(f, 0.0, 1.0)
        return f

    def _map(self, fn: Callable[[np.ndarray], np.ndarray]) -> List[np.ndarray]:
        if self.threads == 1 or len(self._blocks) == 1:
            return [fn(ks) for ks in self._blocks]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, self._blocks))

    def _run(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        return np.concatenate(self._map(fn), axis=-1)

    def _cached(self, kind: str, ks: np.ndarray, build: Callable[[np.ndarray], object]):
        key = (kind, int(ks[0]))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        value = build(ks)
        if self._cache_ok[kind]:
            self._cache[key] = value
        return value

    def _outgoing(self, ks: np.ndarray) -> np.ndarray:
        """r = k + p - q for the block, shape (K, N, N)."""
        return self.grid.sub_table[self.grid.add_table[ks][:, :, None], self._q[None, None, :]]

    def _process_mask(self, ks: np.ndarray, r: np.ndarray) -> Optional[np.ndarray]:
        if self.active is None:
            return None
        act = self.active
        return act[ks][:, None, None] & act[None, :, None] & act[None, None, :] & act[r]

    def _energies(self, ks: np.ndarray, r: np.ndarray):
        jv = self.grid.dispersion
        return jv[ks][:, None, None], jv[None, :, None], jv[None, None, :], jv[r]

    def _mean_weight_block(self, ks: np.ndarray) -> np.ndarray:
        r = self._outgoing(ks)
        jk, jp, jq, jr = self._energies(ks, r)
        mismatch = jr + jq - jk - jp
        if self.config.regime != "weak":
            mismatch = 0.5 * mismatch
        weight = np.broadcast_to(self.config.weight(mismatch), r.shape)
        return weight.reshape(ks.size, -1).sum(axis=1)

    # -- strong coupling ------------------------------------------------

    def _strong_geometry(self, ks: np.ndarray):
        r = self._outgoing(ks)
        jk, jp, jq, jr = self._energies(ks, r)
        # les énergies des quasi-particules dispersent en -J_k/2
        delta = self.config.weight(0.5 * (jr + jq - jk - jp))
        mask = self._process_mask(ks, r)
        if mask is not None:
            delta = delta * mask
        weights = tuple(delta * symmetric_cross_section(ch, jk, jp, jq, jr) for ch in STRONG_CHANNELS)
        return r, weights

    def _strong_block(self, f: np.ndarray, ks: np.ndarray, gross: bool) -> np.ndarray:
        r, (w_pp, w_ph, w_ph2) = self._cached("strong", ks, self._strong_geometry)
        bracket = _traffic if gross else _balance
        f_r = f[:, :, r]
        out = np.empty((2, 2, ks.size))
        for a in (MINUS, PLUS):
            b = 1 - a
            for s in (UP, DOWN):
                sb = 1 - s
                fk = f[a, s, ks][:, None, None]
                p_same, p_other = f[a, sb][None, :, None], f[b, sb][None, :, None]
                q_same, q_other = f[a, sb][None, None, :], f[b, sb][None, None, :]
                total = (
                    w_pp * bracket(fk, p_same, f_r[a, s], q_same)
                    + w_ph * bracket(fk, p_other, f_r[b, s], q_same)
                    + w_ph2 * bracket(fk, p_other, f_r[a, s], q_other)
                )
                out[a, s] = total.reshape(ks.size, -1).sum(axis=1)
        prefactor = 2.0 * np.pi / self.grid.n_points**2
        return prefactor * out if gross else -prefactor * out

    # -- weak coupling --------------------------------------------------

    def _weak_geometry(self, ks: np.ndarray):
        r = self._outgoing(ks)
        jk, jp, jq, jr = self._energies(ks, r)
        delta = self.config.weight(jk + jp - jr - jq)
        mask = self._process_mask(ks, r)
        if mask is not None:
            delta = delta * mask
        same, opposite = self.potential.same, self.potential.opposite
        transfer = self.grid.sub_table.T[None, :, :]  # q - p
        exchange = self.grid.sub_table[ks][:, None, :]  # k - q
        direct = same[transfer] + opposite[transfer]
        w_opposite = delta * direct * opposite[transfer]
        w_same = delta * (direct * same[transfer] - same[transfer] * same[exchange])
        return r, w_opposite, w_same

    def _weak_block(self, f: np.ndarray, ks: np.ndarray) -> np.ndarray:
        r, w_opposite, w_same = self._cached("weak", ks, self._weak_geometry)
        n_occ = f[MINUS]
        n_r = n_occ[:, r]
        out = np.zeros((2, 2, ks.size))
        for s in (UP, DOWN):
            sb = 1 - s
            fk = n_occ[s, ks][:, None, None]
            total = w_opposite * _balance(fk, n_occ[sb][None, :, None], n_r[s], n_occ[sb][None, None, :]) + w_same * _balance(
                fk, n_occ[s][None, :, None], n_r[s], n_occ[s][None, None, :]
            )
            out[MINUS, s] = total.reshape(ks.size, -1).sum(axis=1)
        return -2.0 * np.pi / self.grid.n_points**2 * out

    # -- general U ------------------------------------------------------

    def _slots(self, ks: np.ndarray, r: np.ndarray):
        """Rotation entries per species for slots r, k, q, p (broadcast shapes)."""
        rot = self.spectral.rotation
        at_r = [(rot[r, sp, 0], rot[r, sp, 1]) for sp in (MINUS, PLUS)]
        at_k = [(rot[ks, sp, 0][:, None, None], rot[ks, sp, 1][:, None, None]) for sp in (MINUS, PLUS)]
        at_q = [(rot[:, sp, 0][None, None, :], rot[:, sp, 1][None, None, :]) for sp in (MINUS, PLUS)]
        at_p = [(rot[:, sp, 0][None, :, None], rot[:, sp, 1][None, :, None]) for sp in (MINUS, PLUS)]
        return at_r, at_k, at_q, at_p

    def _mismatch(self, channel: Channel, ks: np.ndarray, r: np.ndarray) -> np.ndarray:
        d, a, b, c = channel
        e = self.spectral.species_energies
        return e[a][r] - e[b][None, :, None] + e[c][None, None, :] - e[d][ks][:, None, None]

    def _general_geometry(self, ks: np.ndarray):
        r = self._outgoing(ks)
        jk, jp, jq, jr = self._energies(ks, r)
        at_r, at_k, at_q, at_p = self._slots(ks, r)
        mask = self._process_mask(ks, r)
        weights = []
        for channel in self.channels:
            d, a, b, c = channel
            amp = collision_amplitude(at_r[a], at_k[d], at_q[c], at_p[b], jr, jk, jq, jp)
            w = self.config.weight(self._mismatch(channel, ks, r)) * amp**2
            if mask is not None:
                w = w * mask
            weights.append(w)
        return r, weights

    def _general_block(self, f: np.ndarray, ks: np.ndarray) -> np.ndarray:
        r, weights = self._cached("general", ks, self._general_geometry)
        f_r = f[:, :, r]
        totals: Dict[Tuple[int, int], np.ndarray] = {}
        for (d, a, b, c), w in zip(self.channels, weights):
            for s in (UP, DOWN):
                sb = 1 - s
                term = w * _balance(f[d, s, ks][:, None, None], f[b, sb][None, :, None], f_r[a, s], f[c, sb][None, None, :])
                key = (d, s)
                totals[key] = term if key not in totals else totals[key] + term
        out = np.zeros((2, 2, ks.size))
        for (d, s), total in totals.items():
            out[d, s] = total.reshape(ks.size, -1).sum(axis=1)
        return -32.0 * np.pi / self.grid.n_points**2 * out

    # -- double occupancy -----------------------------------------------

    def _ddot_geometry(self, ks: np.ndarray):
        r = self._outgoing(ks)
        jk, jp, jq, jr = self._energies(ks, r)
        at_r, at_k, at_q, at_p = self._slots(ks, r)
        rot = self.spectral.rotation
        mask = self._process_mask(ks, r)
        u = self.spectral.U
        gap = np.hypot(jk, u)
        suppression = np.divide(jk, gap, out=np.zeros_like(gap), where=gap > 0)
        weights = []
        for channel in ALL_CHANNELS:
            d, a, b, c = channel
            o_r, o_p, o_q = at_r[a], at_p[b], at_q[c]
            t_k = (rot[ks, 1 - d, 0] - rot[ks, 1 - d, 1])[:, None, None]
            g = t_k * (
                jr * (o_r[0] + o_r[1]) * (o_p[0] * o_q[0] + o_p[1] * o_q[1])
                - jp * (o_p[0] + o_p[1]) * (o_r[0] * o_q[1] + o_r[1] * o_q[0])
                + jq * (o_q[0] + o_q[1]) * (o_r[0] * o_p[0] + o_r[1] * o_p[1])
            )
            amp = collision_amplitude(o_r, at_k[d], o_q, o_p, jr, jk, jq, jp)
            w = suppression * self.config.weight(self._mismatch(channel, ks, r)) * g * amp
            if mask is not None:
                w = w * mask
            weights.append(w)
        return r, weights

    def _ddot_block(self, f: np.ndarray, ks: np.ndarray) -> np.ndarray:
        r, weights = self._cached("ddot", ks, self._ddot_geometry)
        f_r = f[:, :, r]
        total = np.zeros(r.shape)
        for (d, a, b, c), w in zip(ALL_CHANNELS, weights):
            for s in (UP, DOWN):
                sb = 1 - s
                total = total + w * _balance(f[d, s, ks][:, None, None], f[b, sb][None, :, None], f_r[a, s], f[c, sb][None, None, :])
        return total.reshape(ks.size, -1).sum(axis=1)


# ---------------------------------------------------------------------
# Functional entry points
# ---------------------------------------------------------------------

def strong_rhs(state, grid: MomentumGrid, config: KernelConfig, threads: int = 1, active: Optional[np.ndarray] = None) -> np.ndarray:
    cfg = config if config.regime == "strong" else KernelConfig("strong", config.eta, config.delta)
    return CollisionKernel(grid, cfg, threads=threads, active=active)(state)


def weak_rhs(state, grid: MomentumGrid, config: KernelConfig, threads: int = 1, active: Optional[np.ndarray] = None) -> np.ndarray:
    cfg = config if config.regime == "weak" else KernelConfig("weak", config.eta, config.delta, config.potential)
    return CollisionKernel(grid, cfg, threads=threads, active=active)(state)


def general_rhs(
    state,
    grid: MomentumGrid,
    spectral: SpectralTable,
    config: KernelConfig,
    threads: int = 1,
    channels: Optional[Iterable[Channel]] = None,
    active: Optional[np.ndarray] = None,
) -> np.ndarray:
    cfg = config if config.regime == "general" else KernelConfig("general", config.eta, config.delta)
    return CollisionKernel(grid, cfg, spectral=spectral, threads=threads, channels=channels, active=active)(state)


def strong_scattering_rate(state, grid: MomentumGrid, config: KernelConfig, threads: int = 1) -> np.ndarray:
    cfg = config if config.regime == "strong" else KernelConfig("strong", config.eta, config.delta)
    return CollisionKernel(grid, cfg, threads=threads).scattering_rate(state)


def with_coupling(grid: MomentumGrid, U: float) -> ModelParams:
    """Model parameters of `grid` with a different U (dispersion is U-independent)."""
    p = grid.params
    return ModelParams(U=U, J=p.J, dim=p.dim)
