# src/tools/dynamics.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, List, Optional

import numpy as np

from src.tools.kernels import CollisionKernel

logger = logging.getLogger(__name__)

RhsEvaluator = Callable[[np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    """Raised when the trajectory cannot be continued (NaN/Inf, repeated rejection)."""


class StepRejected(IntegrationError):
    """Raised when a step overshoots [0, 1] by more than the rejection threshold."""


@dataclass
class DistributionState:
    """
    Occupations f[a, s, k]: a = 0 hole (-), 1 quasi-particle (+); s = 0 up, 1 down;
    k = flat grid index. `t` in units of hbar/J.
    """

    f: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        self.f = np.asarray(self.f, dtype=float)
        if self.f.ndim != 3 or self.f.shape[:2] != (2, 2):
            raise ValueError(f"occupations must have shape (2, 2, N), got {self.f.shape}")

    @property
    def n_points(self) -> int:
        return int(self.f.shape[2])

    def copy(self) -> "DistributionState":
        return DistributionState(self.f.copy(), self.t)

    @classmethod
    def from_planes(cls, f_minus: np.ndarray, f_plus: np.ndarray, t: float = 0.0) -> "DistributionState":
        """Spin-symmetric state from one hole plane and one quasi-particle plane."""
        f_minus = np.asarray(f_minus, dtype=float)
        f_plus = np.asarray(f_plus, dtype=float)
        return cls(np.stack([np.stack([f_minus, f_minus]), np.stack([f_plus, f_plus])]), t)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_final: float
    output_every: int = 1
    clamp_tolerance: float = 1e-9
    reject_threshold: float = 1e-3
    max_halvings: int = 3

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_final >= 0:
            raise ValueError(f"t_final must be >= 0, got {self.t_final}")
        if self.output_every < 1:
            raise ValueError(f"output_every must be >= 1, got {self.output_every}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


def enforce_physical(f: np.ndarray, clamp_tolerance: float = 1e-9, reject_threshold: float = 1e-3) -> np.ndarray:
    """Clamp occupations to [0, 1]; log beyond the tolerance, reject beyond the threshold."""
    if not np.all(np.isfinite(f)):
        raise IntegrationError("non-finite occupation in state")
    overshoot = max(float(-f.min()), float(f.max() - 1.0), 0.0)
    if overshoot == 0.0:
        return f
    if overshoot > reject_threshold:
        raise StepRejected(f"occupation overshoot {overshoot:.3g} exceeds {reject_threshold:g}; reduce dt")
    if overshoot > clamp_tolerance:
        logger.warning("⚠️ Clamping des occupations sur [0, 1] (dépassement %.3g)", overshoot)
    return np.clip(f, 0.0, 1.0)


def rk4_step(
    state: DistributionState,
    rhs: RhsEvaluator,
    dt: float,
    clamp_tolerance: float = 1e-9,
    reject_threshold: float = 1e-3,
) -> DistributionState:
    """Pas Runge-Kutta classique d'ordre 4, suivi de la politique de clamping."""
    f = state.f
    k1 = rhs(f)
    k2 = rhs(f + 0.5 * dt * k1)
    k3 = rhs(f + 0.5 * dt * k2)
    k4 = rhs(f + dt * k3)
    f_new = f + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return DistributionState(enforce_physical(f_new, clamp_tolerance, reject_threshold), state.t + dt)


def _advance(state: DistributionState, rhs: RhsEvaluator, dt: float, config: IntegratorConfig, depth: int = 0) -> DistributionState:
    try:
        return rk4_step(state, rhs, dt, config.clamp_tolerance, config.reject_threshold)
    except StepRejected as exc:
        if depth >= config.max_halvings:
            raise IntegrationError(f"step rejected {depth + 1} times at t={state.t:.6g}: {exc}") from exc
        logger.debug("Step rejected at t=%.6g, retrying with dt=%.3g", state.t, dt / 2)
        half = _advance(state, rhs, dt / 2, config, depth + 1)
        return _advance(half, rhs, dt / 2, config, depth + 1)


def integrate(
    state: DistributionState,
    rhs: RhsEvaluator,
    config: IntegratorConfig,
    observer: Optional[Callable[[DistributionState, int], Any]] = None,
    on_step: Optional[Callable[[DistributionState, int], None]] = None,
) -> List[Any]:
    """
    Advance `state` to t_final with fixed-step RK4.

    `observer(state, step)` is recorded at step 0, every `output_every` steps
    and at the final step; `on_step` runs after every accepted step.
    Returns the recorded series.
    """
    observer = observer or (lambda s, step: s.copy())
    enforce_physical(state.f, config.clamp_tolerance, config.reject_threshold)

    t0 = state.t
    n_steps = config.n_steps
    records = [observer(state, 0)]
    if on_step is not None:
        on_step(state, 0)

    for step in range(1, n_steps + 1):
        state = _advance(state, rhs, config.dt, config)
        state.t = t0 + step * config.dt
        if on_step is not None:
            on_step(state, step)
        if step % config.output_every == 0 or step == n_steps:
            records.append(observer(state, step))

    logger.debug("Integrated %d steps to t=%.6g", n_steps, state.t)
    return records


def stationarity_residual(state, kernel: CollisionKernel) -> float:
    """sup |df/dt| in units of the kernel's reference rate scale."""
    rate = kernel(state)
    return float(np.max(np.abs(rate))) / kernel.rate_scale()
