# src/tools/oracle.py
"""
Reference implementations and limit checks.

The brute-force kernels below are literal loops over the collision sums with
their own momentum arithmetic on integer tuples and math.fsum accumulation;
they share nothing with the vectorized evaluator beyond the delta weight and
the spectral tables they are given.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.tools.dynamics import DistributionState, IntegratorConfig, integrate, stationarity_residual
from src.tools.kernels import (
    ALL_CHANNELS,
    DOWN,
    STRONG_CHANNELS,
    UP,
    Channel,
    CollisionKernel,
    KernelConfig,
    build_potential,
    general_rhs,
    strong_rhs,
    symmetric_cross_section,
    weak_rhs,
    with_coupling,
)
from src.tools.lattice import ModelParams, MomentumGrid, build_grid
from src.tools.observables import entropy, species_counts
from src.tools.scenarios import make_equilibrium, make_probe_state, make_pump_bump
from src.tools.spectrum import (
    MINUS,
    PLUS,
    SpectralTable,
    build_spectral_table,
    eigen_residual,
    orthogonality_residual,
)

logger = logging.getLogger(__name__)

MAX_ORACLE_POINTS = 256
PLANE_LABELS = {(MINUS, UP): "minus_up", (MINUS, DOWN): "minus_down", (PLUS, UP): "plus_up", (PLUS, DOWN): "plus_down"}


@dataclass
class ComparisonReport:
    label: str
    max_abs_diff: float
    rms_rel_diff: float
    max_rel_diff: float
    tolerance: float
    passed: bool
    channels: Dict[str, float] = field(default_factory=dict)
    masked: int = 0


def _relative(diff_norm: float, ref_norm: float) -> float:
    if ref_norm > 0:
        return diff_norm / ref_norm
    return 0.0 if diff_norm == 0 else math.inf


def compare_fields(
    reference: np.ndarray,
    candidate: np.ndarray,
    tolerance: float,
    label: str = "",
    metric: str = "max_rel",
    planes: Optional[Iterable[Tuple[int, int]]] = None,
    points: Optional[np.ndarray] = None,
) -> ComparisonReport:
    """
    Compare two RHS fields. `max_rel` is max|diff| / max|ref|, `rms_rel` is
    ||diff||_2 / ||ref||_2; the per-plane breakdown uses the chosen metric.
    """
    planes = list(planes) if planes is not None else list(PLANE_LABELS)
    sel = points if points is not None else slice(None)

    def metrics(ref: np.ndarray, cand: np.ndarray) -> Tuple[float, float, float]:
        diff = cand - ref
        max_abs = float(np.max(np.abs(diff))) if diff.size else 0.0
        max_rel = _relative(max_abs, float(np.max(np.abs(ref))) if ref.size else 0.0)
        rms_rel = _relative(float(np.linalg.norm(diff)), float(np.linalg.norm(ref)))
        return max_abs, max_rel, rms_rel

    ref_all = np.stack([reference[a, s][sel] for a, s in planes])
    cand_all = np.stack([candidate[a, s][sel] for a, s in planes])
    max_abs, max_rel, rms_rel = metrics(ref_all, cand_all)
    breakdown = {}
    for a, s in planes:
        _, plane_max, plane_rms = metrics(reference[a, s][sel], candidate[a, s][sel])
        breakdown[PLANE_LABELS[(a, s)]] = plane_max if metric == "max_rel" else plane_rms
    value = max_rel if metric == "max_rel" else rms_rel
    return ComparisonReport(
        label=label,
        max_abs_diff=max_abs,
        rms_rel_diff=rms_rel,
        max_rel_diff=max_rel,
        tolerance=tolerance,
        passed=bool(value <= tolerance),
        channels=breakdown,
    )


# ---------------------------------------------------------------------
# Brute-force reference kernels
# ---------------------------------------------------------------------

def literal_amplitude(o1, o2, o3, o4, j1: float, j2: float, j3: float, j4: float) -> float:
    """Four-point coefficient written out as the triple sum over X, Y, V."""
    total = 0.0
    for x in (0, 1):
        sign = 1.0 if x == 0 else -1.0
        for y in (0, 1):
            for v in (0, 1):
                vb = 1 - v
                term = (
                    j1 * o1[y] * (o2[x] * o3[v] * o4[v] - o2[v] * o3[x] * o4[vb] + o2[v] * o3[v] * o4[x])
                    + j2 * o2[y] * (o1[x] * o3[v] * o4[v] - o1[v] * o3[vb] * o4[x] + o1[v] * o3[x] * o4[v])
                    + j3 * o3[y] * (o1[v] * o2[v] * o4[x] - o1[x] * o2[v] * o4[vb] + o1[v] * o2[x] * o4[v])
                    + j4 * o4[y] * (o1[v] * o2[v] * o3[x] - o1[v] * o2[x] * o3[vb] + o1[x] * o2[v] * o3[v])
                )
                total += sign * term
    return -total / 16.0


class _TupleGrid:
    """Momentum bookkeeping on integer tuples, independent of the grid's lookup tables."""

    def __init__(self, grid: MomentumGrid):
        self.sizes = grid.sizes
        self.tuples = [tuple(int(v) for v in m) for m in grid.indices]
        self.lookup = {m: i for i, m in enumerate(self.tuples)}

    def combine(self, i: int, j: int, l: int) -> int:
        """Index of m_i + m_j - m_l (mod grid)."""
        m = tuple((a + b - c) % n for a, b, c, n in zip(self.tuples[i], self.tuples[j], self.tuples[l], self.sizes))
        return self.lookup[m]


def _gain_loss(fk: float, fp: float, fr: float, fq: float) -> float:
    return fk * fp * (1.0 - fr) * (1.0 - fq) - fr * fq * (1.0 - fk) * (1.0 - fp)


def _weight(config: KernelConfig, mismatch: float) -> float:
    return float(config.weight(mismatch))


def brute_force_rhs(
    state,
    grid: MomentumGrid,
    spectral: Optional[SpectralTable],
    config: KernelConfig,
    active: Optional[np.ndarray] = None,
    channels: Optional[Iterable[Channel]] = None,
) -> np.ndarray:
    """Literal nested-loop collision sums for the configured regime (grids up to 256 points)."""
    n = grid.n_points
    if n > MAX_ORACLE_POINTS:
        raise ValueError(f"brute-force reference limited to {MAX_ORACLE_POINTS} points, grid has {n}")
    f = np.clip(np.asarray(getattr(state, "f", state), dtype=float), 0.0, 1.0).tolist()
    act = [True] * n if active is None else [bool(x) for x in active]
    tuples = _TupleGrid(grid)
    jv = [float(x) for x in grid.dispersion]

    if config.regime == "strong":
        return _brute_strong(f, jv, tuples, config, act)
    if config.regime == "weak":
        potential = config.potential or build_potential(grid, "hubbard")
        return _brute_weak(f, jv, tuples, config, act, potential)
    if spectral is None:
        spectral = build_spectral_table(grid.params, grid, "strong")
    if active is None:
        act = [bool(x) for x in spectral.active]
    return _brute_general(f, jv, tuples, config, act, spectral, list(channels or ALL_CHANNELS))


def _brute_strong(f, jv, tuples: _TupleGrid, config: KernelConfig, act) -> np.ndarray:
    n = len(jv)
    rhs = np.zeros((2, 2, n))
    for a in (MINUS, PLUS):
        b = 1 - a
        for s in (UP, DOWN):
            sb = 1 - s
            for k in range(n):
                if not act[k]:
                    continue
                terms = []
                for p in range(n):
                    for q in range(n):
                        r = tuples.combine(k, p, q)
                        if not (act[p] and act[q] and act[r]):
                            continue
                        jk, jp, jq, jr = jv[k], jv[p], jv[q], jv[r]
                        dw = _weight(config, 0.5 * (jr + jq - jk - jp))
                        if dw == 0.0:
                            continue
                        fk = f[a][s][k]
                        # (partner in, outgoing at r, outgoing at q) per channel
                        legs = {
                            "pp": (f[a][sb][p], f[a][s][r], f[a][sb][q]),
                            "ph": (f[b][sb][p], f[b][s][r], f[a][sb][q]),
                            "ph2": (f[b][sb][p], f[a][s][r], f[b][sb][q]),
                        }
                        for channel in STRONG_CHANNELS:
                            fp, fr, fq = legs[channel]
                            w = symmetric_cross_section(channel, jk, jp, jq, jr)
                            terms.append(dw * w * _gain_loss(fk, fp, fr, fq))
                rhs[a, s, k] = -2.0 * math.pi / n**2 * math.fsum(terms)
    return rhs


def _brute_weak(f, jv, tuples: _TupleGrid, config: KernelConfig, act, potential) -> np.ndarray:
    """Transfer-momentum form: (k, p) -> (k - q, p + q) with exchange partner k - p - q."""
    n = len(jv)
    nf = f[MINUS]
    zero = tuples.lookup[tuple(0 for _ in tuples.sizes)]
    rhs = np.zeros((2, 2, n))
    for s in (UP, DOWN):
        for k in range(n):
            if not act[k]:
                continue
            terms = []
            for p in range(n):
                for q in range(n):
                    r = tuples.combine(k, zero, q)  # k - q
                    q_out = tuples.combine(p, q, zero)  # p + q
                    if not (act[p] and act[r] and act[q_out]):
                        continue
                    dw = _weight(config, jv[k] + jv[p] - jv[r] - jv[q_out])
                    if dw == 0.0:
                        continue
                    for s2 in (UP, DOWN):
                        direct = sum(potential.value(s, s1, q) for s1 in (UP, DOWN)) * potential.value(s, s2, q)
                        terms.append(dw * direct * _gain_loss(nf[s][k], nf[s2][p], nf[s][r], nf[s2][q_out]))
                    exchange_q = tuples.combine(k, zero, tuples.combine(p, q, zero))  # k - p - q
                    exchange = potential.value(s, s, q) * potential.value(s, s, exchange_q)
                    terms.append(-dw * exchange * _gain_loss(nf[s][k], nf[s][p], nf[s][r], nf[s][q_out]))
            rhs[MINUS, s, k] = -2.0 * math.pi / n**2 * math.fsum(terms)
    return rhs


def _brute_general(f, jv, tuples: _TupleGrid, config: KernelConfig, act, spectral: SpectralTable, channels) -> np.ndarray:
    n = len(jv)
    rot = spectral.rotation.tolist()
    energy = spectral.species_energies.tolist()
    rhs = np.zeros((2, 2, n))
    for d in (MINUS, PLUS):
        for k in range(n):
            if not act[k]:
                continue
            terms = {UP: [], DOWN: []}
            for p in range(n):
                for q in range(n):
                    r = tuples.combine(k, p, q)
                    if not (act[p] and act[q] and act[r]):
                        continue
                    for dd, a, b, c in channels:
                        if dd != d:
                            continue
                        mismatch = energy[a][r] - energy[b][p] + energy[c][q] - energy[d][k]
                        dw = _weight(config, mismatch)
                        if dw == 0.0:
                            continue
                        amp = literal_amplitude(rot[r][a], rot[k][d], rot[q][c], rot[p][b], jv[r], jv[k], jv[q], jv[p])
                        for s in (UP, DOWN):
                            sb = 1 - s
                            bracket = _gain_loss(f[d][s][k], f[b][sb][p], f[a][s][r], f[c][sb][q])
                            terms[s].append(dw * amp * amp * bracket)
            for s in (UP, DOWN):
                rhs[d, s, k] = -32.0 * math.pi / n**2 * math.fsum(terms[s])
    return rhs


# ---------------------------------------------------------------------
# Limit-equivalence checks
# ---------------------------------------------------------------------

def check_strong_limit(
    grid: MomentumGrid,
    U_list: Sequence[float],
    probe_state: DistributionState,
    eta: float = 0.5,
    tolerance: float = 0.05,
    threads: int = 1,
) -> List[ComparisonReport]:
    """RMS relative difference of general_rhs against strong_rhs for each U (increasing, >= 10)."""
    U_list = [float(u) for u in U_list]
    if min(U_list) < 10 or any(b <= a for a, b in zip(U_list, U_list[1:])):
        raise ValueError("check_strong_limit needs a strictly increasing U list with U >= 10")

    config = KernelConfig("strong", eta)
    reference = strong_rhs(probe_state, grid, config, threads=threads)
    reports = []
    for U in U_list:
        params = with_coupling(grid, U)
        spectral = build_spectral_table(params, grid, "strong")
        candidate = general_rhs(probe_state, grid, spectral, config, threads=threads)
        report = compare_fields(reference, candidate, tolerance, label=f"strong-limit U={U:g}", metric="rms_rel")
        logger.info("🔬 Limite forte U=%g: rms_rel=%.3e", U, report.rms_rel_diff)
        reports.append(report)
    return reports


def check_weak_limit(
    grid: MomentumGrid,
    U_list: Sequence[float],
    probe_state: DistributionState,
    eta: float = 0.1,
    tolerance: float = 0.05,
    threads: int = 1,
) -> List[ComparisonReport]:
    """
    RMS relative difference of the (-,-,-,-) general channel against weak_rhs with the
    Hubbard potential, per U (decreasing, <= 0.1). J_k = 0 momenta are masked and reported.
    """
    U_list = [float(u) for u in U_list]
    if max(U_list) > 0.1 or min(U_list) < 0 or any(b >= a for a, b in zip(U_list, U_list[1:])):
        raise ValueError("check_weak_limit needs a strictly decreasing U list with 0 <= U <= 0.1")

    reports = []
    for U in U_list:
        params = with_coupling(grid, U)
        spectral = build_spectral_table(params, grid, "weak")
        weak_grid = build_grid(params, grid.sizes)
        config = KernelConfig("weak", eta, potential=build_potential(weak_grid, "hubbard"))
        reference = weak_rhs(probe_state, weak_grid, config, threads=threads, active=spectral.active)
        candidate = general_rhs(
            probe_state,
            weak_grid,
            spectral,
            KernelConfig("general", eta),
            threads=threads,
            channels=[(MINUS, MINUS, MINUS, MINUS)],
            active=spectral.active,
        )
        report = compare_fields(
            reference,
            candidate,
            tolerance,
            label=f"weak-limit U={U:g}",
            metric="rms_rel",
            planes=[(MINUS, UP), (MINUS, DOWN)],
            points=spectral.active,
        )
        report.masked = spectral.n_masked
        logger.info("🔬 Limite faible U=%g: rms_rel=%.3e (%d impulsions masquées)", U, report.rms_rel_diff, report.masked)
        reports.append(report)
    return reports


# ---------------------------------------------------------------------
# Relaxation rate at the gap minimum
# ---------------------------------------------------------------------

@dataclass
class RateScaling:
    exponent: float
    widths: List[float]
    rates: List[float]
    control_rates: List[float]
    control_exponent: float


def _fit_power(widths: Sequence[float], rates: Sequence[float]) -> float:
    if any(r <= 0 for r in rates):
        return math.nan
    slope, _ = np.polyfit(np.log(widths), np.log(rates), 1)
    return float(slope)


def rate_scaling_at_gap_minimum(
    grid: MomentumGrid,
    widths: Sequence[float],
    amplitude: float = 0.05,
    config: Optional[KernelConfig] = None,
    threads: int = 1,
) -> RateScaling:
    """
    Power law of the collision rate of pump bumps centred on J_k = 0 versus bump width,
    with a band-edge bump (centre J) as control.
    """
    widths = [float(w) for w in widths]
    if min(widths) <= 0 or any(b >= a for a, b in zip(widths, widths[1:])):
        raise ValueError("widths must be positive and strictly decreasing")
    config = config or KernelConfig("strong", grid.default_eta() or 0.1, "resonant")
    kernel = CollisionKernel(grid, config, threads=threads)

    def rate(center: float, width: float) -> float:
        state = make_pump_bump(grid, center, width, amplitude)
        n_exc = float(state.f[PLUS].mean())
        if n_exc == 0.0:
            return 0.0
        return float(np.mean(kernel.scattering_rate(state))) / n_exc**2

    rates = [rate(0.0, w) for w in widths]
    control = [rate(grid.params.J, w) for w in widths]
    result = RateScaling(
        exponent=_fit_power(widths, rates),
        widths=widths,
        rates=rates,
        control_rates=control,
        control_exponent=_fit_power(widths, control),
    )
    logger.info("🐢 Exposant du taux au minimum du gap %.3f (contrôle %.3f)", result.exponent, result.control_exponent)
    return result


# ---------------------------------------------------------------------
# Validation suite
# ---------------------------------------------------------------------

def _row(check: str, value: float, tolerance: float, passed: bool) -> Dict[str, object]:
    return {"check": check, "value": float(value), "tolerance": float(tolerance), "passed": bool(passed)}


def validation_suite(quick: bool = False, threads: int = 1) -> pd.DataFrame:
    """Run the reference checks; `quick` keeps to 4x4 grids."""
    rows: List[Dict[str, object]] = []

    # 1) Spectre sur une grille contenant J_k = 0
    params = ModelParams(U=20.0)
    grid = build_grid(params, [4, 4])
    table = build_spectral_table(params, grid, "strong")
    rows.append(_row("spectrum orthogonality", orthogonality_residual(table.rotation), 1e-12, orthogonality_residual(table.rotation) < 1e-12))
    residual = eigen_residual(params, grid.dispersion, table.rotation, table.e_minus, table.e_plus)
    rows.append(_row("spectrum eigen equation", residual, 1e-12, residual < 1e-12))
    gap_error = abs(float(table.gap.min()) - params.U)
    rows.append(_row("minimum direct gap = U", gap_error, 1e-12, gap_error <= 1e-12))

    # 2) Noyaux optimisés vs boucles littérales
    seeds = range(2) if quick else range(5)
    regimes = {
        "strong": KernelConfig("strong", 0.3),
        "weak": KernelConfig("weak", 0.3, potential=build_potential(grid, "constant", same=0.4, opposite=1.0)),
        "general": KernelConfig("general", 0.3),
    }
    for name, config in regimes.items():
        worst = 0.0
        for seed in seeds:
            probe = make_probe_state(grid, seed=seed, spin_symmetric=False)
            ref = brute_force_rhs(probe, grid, table, config)
            fast = CollisionKernel(grid, config, spectral=table, threads=threads)(probe)
            worst = max(worst, compare_fields(ref, fast, 1e-13).max_rel_diff)
        rows.append(_row(f"oracle {name}", worst, 1e-13, worst <= 1e-13))

    # 3) Bilan détaillé + conservation
    eq_kernel = CollisionKernel(grid, KernelConfig("strong", 0.2, "resonant"), threads=threads)
    fixed = stationarity_residual(make_equilibrium(grid, 2.0, -2.0, 1.0), eq_kernel)
    rows.append(_row("equilibrium fixed point", fixed, 1e-10, fixed < 1e-10))
    probe = make_probe_state(grid, seed=7)
    rate = CollisionKernel(grid, KernelConfig("strong", 0.3), threads=threads)(probe)
    drift = float(np.max(np.abs(rate.mean(axis=2)))) / float(np.max(np.abs(rate)))
    rows.append(_row("species conservation", drift, 1e-13, drift <= 1e-13))

    if not quick:
        # 4) Limites, relaxation lente, court run d'entropie
        strong_grid = build_grid(ModelParams(U=20.0), [6, 6])
        strong = check_strong_limit(strong_grid, [20.0, 50.0, 100.0], make_probe_state(strong_grid, seed=1), threads=threads)
        series = [r.rms_rel_diff for r in strong]
        rows.append(_row("strong limit rms(U=100)", series[-1], 0.05, series[-1] <= 0.05 and series[0] > series[1] > series[2]))

        weak = check_weak_limit(grid, [0.1, 0.03, 0.01], make_probe_state(grid, seed=1), threads=threads)
        series = [r.rms_rel_diff for r in weak]
        rows.append(_row("weak limit rms(U=0.01)", series[-1], 0.05, series[-1] <= 0.05 and series[0] > series[1] > series[2]))

        rate_grid = build_grid(ModelParams(U=20.0), [12, 12])
        scaling = rate_scaling_at_gap_minimum(rate_grid, [0.4, 0.2, 0.1], threads=threads)
        rows.append(_row("gap-minimum rate exponent", scaling.exponent, 0.5, abs(scaling.exponent - 2.0) <= 0.5))
        ratio = scaling.control_rates[-1] / scaling.rates[-1] if scaling.rates[-1] > 0 else math.inf
        rows.append(_row("band-edge / gap-minimum rate", ratio, 10.0, ratio >= 10.0))

        run_grid = build_grid(ModelParams(U=20.0), [8, 8])
        run_kernel = CollisionKernel(run_grid, KernelConfig("strong", 0.2), threads=threads)
        start = make_pump_bump(run_grid, 0.5, 0.2, 0.3)
        snapshots = integrate(start, run_kernel, IntegratorConfig(dt=0.01, t_final=1.0))
        entropies = [entropy(s) for s in snapshots]
        worst_drop = min(b - a + 1e-9 * abs(a) for a, b in zip(entropies, entropies[1:]))
        rows.append(_row("entropy non-decreasing", worst_drop, 0.0, worst_drop >= 0.0))
        first, last = species_counts(snapshots[0]), species_counts(snapshots[-1])
        count_drift = max(abs(y - x) / abs(x) for x, y in zip(first, last) if x != 0)
        rows.append(_row("species count drift", count_drift, 1e-8, count_drift < 1e-8))

    frame = pd.DataFrame(rows, columns=["check", "value", "tolerance", "passed"])
    logger.info("✅ Validation: %d/%d contrôles OK", int(frame["passed"].sum()), len(frame))
    return frame
