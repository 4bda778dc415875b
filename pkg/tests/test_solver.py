# tests/test_solver.py
"""
KineticSolver orchestration: output files, scenario wiring and error reporting.
"""

import json
import math
from pathlib import Path

import numpy as np
import pandas as pd


def _config(tmp_path, **overrides):
    from src.config import RunConfig

    data = {
        "model": {"U": 20, "dim": 2, "grid_sizes": [4, 4]},
        "kernel": {"regime": "strong", "eta": 0.3},
        "init": {"kind": "pump_bump", "center": 0.5, "width": 0.2, "amplitude": 0.3},
        "integrate": {"dt": 0.01, "t_final": 0.05},
        "output": {"directory": str(tmp_path)},
        "threads": 1,
    }
    data.update(overrides)
    return RunConfig.model_validate(data)


def test_run_writes_trajectory_and_final_snapshot(tmp_path):
    from src.solver import KineticSolver
    from src.tools.observables import RECORD_COLUMNS

    result = KineticSolver(_config(tmp_path)).run()

    assert result["status"] == "success"
    assert result["records"] == 6
    frame = pd.read_csv(result["trajectory"])
    assert list(frame.columns) == RECORD_COLUMNS
    assert frame["t"].iloc[-1] == 0.05
    assert frame["Ddot"].notna().all()
    assert [Path(p).name for p in result["snapshots"]] == ["snapshot_5.json"]
    assert result["final"]["t"] == 0.05


def test_zero_duration_gives_one_row(tmp_path):
    from src.solver import KineticSolver

    result = KineticSolver(_config(tmp_path, integrate={"dt": 0.01, "t_final": 0})).run()

    assert result["status"] == "success"
    assert len(pd.read_csv(result["trajectory"])) == 1


def test_periodic_snapshots(tmp_path):
    from src.solver import KineticSolver

    output = {"directory": str(tmp_path), "snapshot_stride": 2}
    result = KineticSolver(_config(tmp_path, output=output)).run()

    names = sorted(Path(p).name for p in result["snapshots"])
    assert names == ["snapshot_2.json", "snapshot_4.json", "snapshot_5.json"]


def test_equilibrium_run_stays_stationary(tmp_path):
    from src.solver import KineticSolver

    result = KineticSolver(
        _config(
            tmp_path,
            kernel={"regime": "strong", "eta": 0.2, "delta": "resonant"},
            init={"kind": "equilibrium", "alpha_plus": 2.0, "alpha_minus": -2.0, "beta": 1.0},
            integrate={"dt": 0.01, "t_final": 10.0, "output_every": 1000},
        )
    ).run()

    frame = pd.read_csv(result["trajectory"])
    assert len(frame) == 2
    first, last = frame["rhs_norm"].iloc[0], frame["rhs_norm"].iloc[-1]
    assert first < 1e-10 and last < 1e-10
    assert last <= first + 1e-12


def test_weak_regime_defaults_to_hubbard_potential_and_leaves_ddot_empty(tmp_path):
    from src.solver import KineticSolver

    solver = KineticSolver(_config(tmp_path, model={"U": 0.1, "dim": 2, "grid_sizes": [4, 4]}, kernel={"regime": "weak"}))

    assert np.all(solver.kernel.potential.opposite == 0.1)
    assert np.all(solver.kernel.potential.same == 0.0)
    assert solver.kernel_config.eta == 0.25
    assert solver.ddot_kernel is None

    result = solver.run()
    assert math.isnan(result["final"]["Ddot"])
    assert pd.read_csv(result["trajectory"])["Ddot"].isna().all()


def test_custom_file_reproduces_a_snapshot_bitwise(tmp_path):
    from src.solver import KineticSolver

    first = KineticSolver(_config(tmp_path / "a")).run()
    source = first["snapshots"][-1]

    second = KineticSolver(
        _config(
            tmp_path / "b",
            init={"kind": "custom_file", "path": source},
            integrate={"dt": 0.01, "t_final": 0},
            output={"directory": str(tmp_path / "b")},
        )
    ).run()

    original = json.loads(open(source, encoding="utf-8").read())
    reloaded = json.loads(open(second["snapshots"][-1], encoding="utf-8").read())
    assert reloaded["f"] == original["f"]
    assert reloaded["t"] == original["t"]


def test_missing_custom_file_is_reported(tmp_path):
    from src.solver import KineticSolver

    result = KineticSolver(_config(tmp_path, init={"kind": "custom_file", "path": str(tmp_path / "nope.json")})).run()

    assert result["status"] == "error"
    assert "cannot read snapshot" in result["message"]


def test_integration_failure_becomes_an_error_status(tmp_path, mocker):
    from src.solver import KineticSolver
    from src.tools.dynamics import IntegrationError

    mocker.patch("src.solver.integrate", side_effect=IntegrationError("step rejected 4 times"))
    result = KineticSolver(_config(tmp_path)).run()

    assert result == {"status": "error", "message": "step rejected 4 times"}


def test_seed_falls_back_to_run_seed(tmp_path, mocker):
    import src.solver as solver_module
    from src.solver import KineticSolver

    spy = mocker.spy(solver_module, "make_ground_plus_noise")
    solver = KineticSolver(_config(tmp_path, init={"kind": "ground_plus_noise", "noise": 0.02}, seed=7))
    solver.initial_state()

    assert spy.call_args.args[2] == 7
