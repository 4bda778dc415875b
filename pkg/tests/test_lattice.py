# tests/test_lattice.py
"""
Momentum grid and dispersion: indexing, closed momentum arithmetic,
exact zeros of J_k and parameter validation.
"""

import numpy as np
import pytest


def test_dispersion_values_on_square_lattice():
    from src.tools.lattice import ModelParams, dispersion

    params = ModelParams(U=20.0)

    assert dispersion(params, [0.0, 0.0]) == pytest.approx(1.0)
    assert dispersion(params, [np.pi, 0.0]) == pytest.approx(0.0, abs=1e-15)
    assert dispersion(params, [np.pi, np.pi]) == pytest.approx(-1.0)

    batch = dispersion(params, np.array([[0.0, 0.0], [np.pi / 2, 0.0]]))
    assert batch.shape == (2,)
    assert batch[1] == pytest.approx(0.5)


def test_dispersion_rejects_wrong_component_count():
    from src.tools.lattice import ModelParams, dispersion

    with pytest.raises(ValueError, match="components"):
        dispersion(ModelParams(U=1.0, dim=3), [0.0, 0.0])


def test_grid_indexing_is_c_order():
    from src.tools.lattice import ModelParams, build_grid

    grid = build_grid(ModelParams(U=20.0), [4, 4])

    assert grid.n_points == 16
    assert grid.dim == 2
    assert grid.index_of([1, 0]) == 4
    assert grid.index_of([-1, 5]) == grid.index_of([3, 1])
    assert np.allclose(grid.momenta[4], [np.pi / 2, 0.0])


def test_momentum_arithmetic_wraps_around_the_zone():
    from src.tools.lattice import ModelParams, build_grid

    grid = build_grid(ModelParams(U=20.0), [4, 4])

    assert grid.add(grid.index_of([3, 1]), grid.index_of([2, 3])) == grid.index_of([1, 0])
    assert grid.sub(grid.index_of([0, 1]), grid.index_of([1, 2])) == grid.index_of([3, 3])
    assert grid.negate(grid.index_of([1, 2])) == grid.index_of([3, 2])

    # (k + p) - p = k for every pair
    rows = np.arange(grid.n_points)
    for p in range(grid.n_points):
        assert np.array_equal(grid.sub_table[grid.add_table[rows, p], p], rows)


def test_zero_dispersion_points_are_exact():
    from src.tools.lattice import ModelParams, build_grid

    grid = build_grid(ModelParams(U=20.0), [4, 4])

    zeros = grid.zero_dispersion_mask()
    assert int(zeros.sum()) == 6
    assert np.all(grid.dispersion[zeros] == 0.0)
    # J_{-k} = J_k bitwise
    assert np.array_equal(grid.dispersion, grid.dispersion[grid.sub_table[0]])


def test_energy_spacing_and_default_eta():
    from src.tools.lattice import ModelParams, build_grid

    grid = build_grid(ModelParams(U=20.0), [4, 4])

    # levels -1, -0.5, 0, 0.5, 1
    assert grid.energy_spacing() == pytest.approx(0.5)
    assert grid.default_eta() == pytest.approx(0.25)


def test_three_dimensional_grid():
    from src.tools.lattice import ModelParams, build_grid

    params = ModelParams(U=1.0, dim=3)
    grid = build_grid(params, [4, 4, 4])

    assert params.Z == 6
    assert grid.n_points == 64
    assert grid.dispersion[grid.index_of([2, 0, 0])] == pytest.approx(1.0 / 3.0)


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"U": -1.0}, "U must be"),
        ({"U": float("nan")}, "U must be"),
        ({"U": 1.0, "J": 0.0}, "J must be"),
        ({"U": 1.0, "dim": 1}, "dim must be"),
    ],
)
def test_model_params_validation(kwargs, message):
    from src.tools.lattice import ModelParams

    with pytest.raises(ValueError, match=message):
        ModelParams(**kwargs)


def test_build_grid_rejects_bad_sizes():
    from src.tools.lattice import ModelParams, build_grid

    with pytest.raises(ValueError, match="grid size 1 on axis 0 must be >= 2"):
        build_grid(ModelParams(U=1.0), [1, 8])
    with pytest.raises(ValueError, match="axes"):
        build_grid(ModelParams(U=1.0), [4, 4, 4])
