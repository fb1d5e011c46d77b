import pytest

from mbpcn.cli import EXIT_BLOWUP, EXIT_CONFIG, EXIT_MBP, EXIT_OK, EXIT_SOLVER, main
from mbpcn.output import read_snapshot, read_timeseries


def test_bounds_prints_coarsening_values(capsys):
    assert main(["bounds", "--mobility", "degenerate", "--eps", "0.00390625", "--cells", "256"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "s2_unconditional=1.44" in out
    assert "tau_max_with_s2_zero=0.4166666666666667" in out


def test_run_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    ts = tmp_path / "ts.csv"
    cfg.write_text(f"cells_per_side = 16\nn_steps = 5\ntimeseries = {ts}\nsnapshot_dir = {tmp_path / 'snaps'}\nsnapshot_every = 5\n")
    assert main(["run", str(cfg), "--snapshot", str(tmp_path / "final.csv")]) == EXIT_OK
    rows = read_timeseries(ts)
    assert len(rows) == 6
    state, t, _ = read_snapshot(tmp_path / "snaps" / "snap_0000005.csv")
    assert t == rows[-1].t and state.shape == (16, 16)
    assert read_snapshot(tmp_path / "final.csv")[1] == rows[-1].t


def test_run_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        p = tmp_path / f"ts{k}.csv"
        main(["run", "--set", "cells_per_side=12", "--set", "initial=random", "--set", "seed=5", "--set", "stepping=perturbed", "--set", "n_steps=6", "--timeseries", str(p)])
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_config_error_exit(capsys):
    assert main(["run", "--set", "eps=-1"]) == EXIT_CONFIG
    assert "eps" in capsys.readouterr().err


def test_solver_failure_exit(capsys):
    code = main(["run", "--set", "cells_per_side=32", "--set", "solver.max_iters=1", "--set", "n_steps=1", "--set", "eps=0.1"])
    assert code == EXIT_SOLVER


def test_strict_mbp_exit(tmp_path):
    args = ["run", "--set", "cells_per_side=4", "--set", "initial=random", "--set", "init_amplitude=0.5", "--set", "s1=0",
            "--set", "s2=0", "--set", "n_steps=3", "--set", "horizon=300", "--strict-mbp", "--timeseries", str(tmp_path / "t.csv")]
    assert main(args) == EXIT_MBP
    assert (tmp_path / "t.csv").exists()


def test_blowup_exit():
    args = ["run", "--set", "cells_per_side=4", "--set", "initial=random", "--set", "init_amplitude=0.5", "--set", "s1=0",
            "--set", "s2=0", "--set", "n_steps=10", "--set", "horizon=10000"]
    assert main(args) == EXIT_BLOWUP


def test_threads_env(monkeypatch):
    monkeypatch.setenv("MBPCN_THREADS", "-3")
    assert main(["bounds"]) == EXIT_CONFIG
    monkeypatch.setenv("MBPCN_THREADS", "0")
    assert main(["bounds"]) == EXIT_OK


def test_verify_subcommand(capsys):
    assert main(["verify", "--trials", "10"]) == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out


def test_small_converge_and_coarsen(tmp_path, capsys):
    assert main(["converge", "--cells", "8", "--ladder", "4", "8", "--out", str(tmp_path / "c.csv")]) == EXIT_OK
    assert (tmp_path / "c.csv").read_text().startswith("n_steps,max_ratio")
    assert main(["coarsen", "--cells", "16", "--horizon", "4", "--tau", "1", "--timeseries", str(tmp_path / "co.csv")]) == EXIT_OK


def test_usage_error_exit():
    with pytest.raises(SystemExit) as info:
        main(["nope"])
    assert info.value.code == 2
