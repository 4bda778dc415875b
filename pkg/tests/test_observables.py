# tests/test_observables.py
"""
Trajectory observables: entropy, counts, kinetic invariant and the record layout.
"""

import math

import numpy as np
import pytest


def _grid():
    from src.tools.lattice import ModelParams, build_grid

    return build_grid(ModelParams(U=20.0), [4, 4])


def test_entropy_of_uniform_occupation():
    from src.tools.dynamics import DistributionState
    from src.tools.observables import entropy

    per_plane = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))
    state = DistributionState(np.full((2, 2, 16), 0.25))

    assert per_plane == pytest.approx(0.5623351446)
    assert entropy(state) == pytest.approx(4 * per_plane)


def test_entropy_of_pure_state_is_zero():
    from src.tools.observables import entropy
    from src.tools.scenarios import make_pump_bump

    ground = make_pump_bump(_grid(), center=0.0, width=0.2, amplitude=0.0)

    assert entropy(ground) == 0.0


def test_species_counts_order():
    from src.tools.dynamics import DistributionState
    from src.tools.observables import species_counts

    f = np.empty((2, 2, 16))
    f[0, 0], f[0, 1], f[1, 0], f[1, 1] = 0.9, 0.8, 0.1, 0.2
    counts = species_counts(DistributionState(f))

    assert counts.plus_up == pytest.approx(0.1)
    assert counts.plus_down == pytest.approx(0.2)
    assert counts.minus_up == pytest.approx(0.9)
    assert counts.minus_down == pytest.approx(0.8)


def test_kinetic_invariant():
    from src.tools.observables import kinetic_invariant
    from src.tools.scenarios import make_equilibrium

    grid = _grid()
    state = make_equilibrium(grid, 1.0, -1.0, 2.0)
    expected = np.sum(grid.dispersion * 2.0 * (state.f[0, 0] + state.f[1, 0])) / grid.n_points

    assert kinetic_invariant(state, grid) == pytest.approx(expected)


def test_observe_builds_a_full_record():
    from src.tools.kernels import CollisionKernel, KernelConfig
    from src.tools.observables import RECORD_COLUMNS, observe
    from src.tools.scenarios import make_pump_bump

    grid = _grid()
    state = make_pump_bump(grid, 0.5, 0.2, 0.3)
    kernel = CollisionKernel(grid, KernelConfig("strong", 0.3))

    record = observe(state, grid, kernel)
    row = record.as_row()

    assert list(row) == RECORD_COLUMNS
    assert math.isnan(row["Ddot"])
    assert row["rhs_norm"] > 0
    assert row["f_min"] == pytest.approx(state.f.min())
    assert row["N_plus_up"] == pytest.approx(state.f[1, 0].mean())

    ddot_kernel = CollisionKernel(grid, KernelConfig("general", 0.3))
    assert math.isfinite(observe(state, grid, kernel, ddot_kernel).Ddot)


def test_ddot_diagnostic_uses_the_general_machinery():
    from src.tools.kernels import CollisionKernel, KernelConfig
    from src.tools.observables import ddot_diagnostic
    from src.tools.scenarios import make_probe_state
    from src.tools.spectrum import build_spectral_table

    grid = _grid()
    table = build_spectral_table(grid.params, grid, "strong")
    state = make_probe_state(grid, seed=6)

    value = ddot_diagnostic(state, table, grid, KernelConfig("strong", 0.3))

    assert value == CollisionKernel(grid, KernelConfig("general", 0.3), spectral=table).ddot(state)


def test_ddot_vanishes_for_ground_and_constant_states():
    from src.tools.dynamics import DistributionState
    from src.tools.kernels import KernelConfig
    from src.tools.observables import ddot_diagnostic
    from src.tools.scenarios import make_ground_plus_noise
    from src.tools.spectrum import build_spectral_table

    grid = _grid()
    table = build_spectral_table(grid.params, grid, "strong")
    config = KernelConfig("general", 0.3)

    ground = make_ground_plus_noise(grid, noise=0.0)
    constant = DistributionState(np.full((2, 2, grid.n_points), 0.5))

    assert ddot_diagnostic(ground, table, grid, config) == pytest.approx(0.0, abs=1e-15)
    assert ddot_diagnostic(constant, table, grid, config) == pytest.approx(0.0, abs=1e-15)


def test_ddot_is_suppressed_at_large_interaction():
    from src.tools.kernels import KernelConfig
    from src.tools.lattice import ModelParams, build_grid
    from src.tools.observables import ddot_diagnostic
    from src.tools.scenarios import make_probe_state
    from src.tools.spectrum import build_spectral_table

    values = {}
    for U in (10.0, 100.0):
        params = ModelParams(U=U)
        grid = build_grid(params, [4, 4])
        table = build_spectral_table(params, grid, "strong")
        state = make_probe_state(grid, seed=6)
        values[U] = abs(ddot_diagnostic(state, table, grid, KernelConfig("general", 0.3)))

    assert values[10.0] > 0
    assert values[100.0] < values[10.0]
