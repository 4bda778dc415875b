# tests/test_dynamics.py
"""
RK4 integrator: accuracy on a linear relaxation, recording schedule,
clamp/reject policy and step halving.
"""

import logging

import numpy as np
import pytest


def _relaxation(f):
    return -(f - 0.5)


def _state(value=0.9, n=4):
    from src.tools.dynamics import DistributionState

    return DistributionState(np.full((2, 2, n), value))


def test_distribution_state_shape_and_planes():
    from src.tools.dynamics import DistributionState

    state = DistributionState.from_planes(np.full(5, 0.8), np.full(5, 0.1), t=2.0)
    assert state.f.shape == (2, 2, 5)
    assert state.n_points == 5
    assert state.t == 2.0
    assert np.all(state.f[1] == 0.1)

    clone = state.copy()
    clone.f[0, 0, 0] = 0.0
    assert state.f[0, 0, 0] == 0.8

    with pytest.raises(ValueError, match="shape"):
        DistributionState(np.zeros((4, 5)))


def test_integrator_config_validation():
    from src.tools.dynamics import IntegratorConfig

    assert IntegratorConfig(dt=0.01, t_final=1.0).n_steps == 100
    assert IntegratorConfig(dt=0.01, t_final=0.0).n_steps == 0
    with pytest.raises(ValueError, match="dt"):
        IntegratorConfig(dt=0.0, t_final=1.0)
    with pytest.raises(ValueError, match="output_every"):
        IntegratorConfig(dt=0.1, t_final=1.0, output_every=0)


def test_rk4_step_on_linear_relaxation():
    from src.tools.dynamics import rk4_step

    out = rk4_step(_state(), _relaxation, 0.1)

    assert out.t == pytest.approx(0.1)
    assert np.allclose(out.f, 0.5 + 0.4 * np.exp(-0.1), atol=1e-7)


def test_rk4_global_error_is_fourth_order():
    from src.tools.dynamics import IntegratorConfig, integrate

    exact = 0.5 + 0.4 * np.exp(-1.0)
    errors = []
    for dt in (0.1, 0.05):
        final = integrate(_state(), _relaxation, IntegratorConfig(dt=dt, t_final=1.0))[-1]
        errors.append(float(np.max(np.abs(final.f - exact))))

    assert 14.0 < errors[0] / errors[1] < 18.0


def test_recording_schedule_and_callbacks():
    from src.tools.dynamics import IntegratorConfig, integrate

    seen = []
    records = integrate(
        _state(),
        _relaxation,
        IntegratorConfig(dt=0.1, t_final=1.0, output_every=3),
        observer=lambda s, step: (step, s.t),
        on_step=lambda s, step: seen.append(step),
    )

    assert [step for step, _ in records] == [0, 3, 6, 9, 10]
    assert records[-1][1] == pytest.approx(1.0)
    assert seen == list(range(11))


def test_zero_duration_records_only_the_initial_state():
    from src.tools.dynamics import IntegratorConfig, integrate

    records = integrate(_state(), _relaxation, IntegratorConfig(dt=0.1, t_final=0.0))

    assert len(records) == 1
    assert np.all(records[0].f == 0.9)


def test_enforce_physical_policy(caplog):
    from src.tools.dynamics import IntegrationError, StepRejected, enforce_physical

    inside = np.array([0.0, 0.5, 1.0])
    assert enforce_physical(inside) is inside

    with caplog.at_level(logging.WARNING, logger="src.tools.dynamics"):
        clamped = enforce_physical(np.array([-1e-6, 0.5, 1.0 + 1e-6]))
    assert np.array_equal(clamped, inside)
    assert "Clamping" in caplog.text

    with pytest.raises(StepRejected):
        enforce_physical(np.array([0.5, 1.01]))
    with pytest.raises(IntegrationError, match="non-finite"):
        enforce_physical(np.array([0.5, np.nan]))

    assert issubclass(StepRejected, IntegrationError)


def test_rejected_step_is_retried_as_half_steps():
    from src.tools.dynamics import IntegratorConfig, integrate

    calls = {"n": 0}

    def kick_once(f):
        # first RK4 stage set overshoots, later evaluations are stationary
        calls["n"] += 1
        return np.full_like(f, 10.0) if calls["n"] <= 4 else np.zeros_like(f)

    records = integrate(_state(0.5), kick_once, IntegratorConfig(dt=0.1, t_final=0.1))

    assert calls["n"] == 12
    assert np.all(records[-1].f == 0.5)
    assert records[-1].t == pytest.approx(0.1)


def test_persistent_overshoot_raises_after_bounded_halving():
    from src.tools.dynamics import IntegrationError, IntegratorConfig, integrate

    with pytest.raises(IntegrationError, match="rejected"):
        integrate(_state(1.0), lambda f: np.ones_like(f), IntegratorConfig(dt=0.1, t_final=0.1, max_halvings=3))


def test_non_finite_rate_aborts_the_run():
    from src.tools.dynamics import IntegrationError, IntegratorConfig, integrate

    with pytest.raises(IntegrationError, match="non-finite"):
        integrate(_state(), lambda f: np.full_like(f, np.nan), IntegratorConfig(dt=0.1, t_final=0.2))


def test_forward_then_backward_step_returns_to_the_start():
    from src.tools.dynamics import rk4_step

    start = _state()
    for dt in (0.1, 0.05):
        back = rk4_step(rk4_step(start, _relaxation, dt), _relaxation, -dt)
        assert back.t == pytest.approx(0.0, abs=1e-15)
        assert np.max(np.abs(back.f - start.f)) < dt**5


def test_step_pair_error_on_the_collision_kernel_is_high_order():
    from src.tools.dynamics import rk4_step
    from src.tools.kernels import CollisionKernel, KernelConfig
    from src.tools.lattice import ModelParams, build_grid
    from src.tools.scenarios import make_probe_state

    grid = build_grid(ModelParams(U=20.0), [4, 4])
    kernel = CollisionKernel(grid, KernelConfig("strong", 0.5))
    start = make_probe_state(grid, seed=4)

    errors = []
    for dt in (0.1, 0.05):
        back = rk4_step(rk4_step(start, kernel, dt), kernel, -dt)
        errors.append(float(np.max(np.abs(back.f - start.f))))

    # halving dt shrinks an O(dt^5) error at least 16-fold
    assert errors[1] > 0
    assert errors[0] / errors[1] > 16.0
