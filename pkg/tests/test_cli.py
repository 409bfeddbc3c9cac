import subprocess
import sys

import pytest

from radar.cli import EXIT_IO, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, main


def test_run_and_fit(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["run", "--dim", "12", "--budget", "200", "--trials", "2", "--algo", "radar,sgd",
                 "--epoch-mode", "oracle-halving", "--seed", "3", "--out", str(out)])
    assert code == EXIT_OK
    assert (out / "summary.csv").exists() and (out / "traces" / "sgd_trial1.csv").exists()
    capsys.readouterr()
    assert main(["fit", str(out), "--out", str(tmp_path / "refit")]) == EXIT_OK
    printed = capsys.readouterr().out.splitlines()
    assert printed[0] == "algorithm,iteration,mean_error_l2_sq,slope_trailing_decade"
    assert {l.split(",")[0] for l in printed[1:]} == {"radar", "sgd"}
    assert (tmp_path / "refit" / "summary.csv").read_bytes() == (out / "summary.csv").read_bytes()


def test_config_file_and_set(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("dim = 10\nbudget = 50\ntrials = 1\nalgorithms = rda\n")
    assert main(["run", "--config", str(cfg), "--set", "eta_sq=0.1", "--out", str(tmp_path / "o")]) == EXIT_OK


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--dim", "2"],
        ["run", "--algo", "radar,adam"],
        ["run", "--set", "colour=blue"],
        ["run", "--epoch-mode", "sometimes"],
        ["frobnicate"],
    ],
)
def test_validation_exit_code(argv, capsys):
    assert main(argv) == EXIT_VALIDATION


def test_io_exit_codes(tmp_path):
    f = tmp_path / "file"
    f.write_text("")
    assert main(["run", "--dim", "10", "--budget", "10", "--trials", "1", "--out", str(f / "x")]) == EXIT_IO
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == EXIT_IO
    assert main(["fit", str(tmp_path / "none.csv")]) == EXIT_IO


def test_fit_on_short_traces_is_reported(tmp_path, capsys):
    bad = tmp_path / "t.csv"
    bad.write_text("trial,algorithm,iteration,epoch,error_l2_sq,error_l1,radius,lambda\n"
                   "0,radar,0,1,1.0,1.0,1.0,0.1\n0,radar,5,1,1.0,1.0,1.0,0.1\n1,radar,0,1,1.0,1.0,1.0,0.1\n")
    assert main(["fit", str(bad)]) == EXIT_VALIDATION


def test_runtime_exit_code(monkeypatch, tmp_path):
    import radar.harness

    def boom(*a, **k):
        raise RuntimeError("oracle exploded")

    monkeypatch.setattr(radar.harness, "run_experiment", boom)
    assert main(["run", "--dim", "10", "--out", str(tmp_path)]) == EXIT_RUNTIME


def test_prox_check_command(capsys):
    assert main(["prox-check", "--dims", "3", "5", "--instances", "4"]) == EXIT_OK
    assert capsys.readouterr().out.count(" ok") == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "radar", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("radar ")


def test_workers_env_does_not_change_output(tmp_path, monkeypatch):
    outs = []
    for w in ("1", "3"):
        monkeypatch.setenv("RADAR_WORKERS", w)
        o = tmp_path / w
        assert main(["run", "--dim", "10", "--budget", "100", "--trials", "3", "--algo", "radar,eda",
                     "--out", str(o)]) == EXIT_OK
        outs.append(o)
    assert (outs[0] / "traces.csv").read_bytes() == (outs[1] / "traces.csv").read_bytes()
