import json
import subprocess
import sys
import warnings

import numpy as np
import pytest

from reldiff import cli
from reldiff import diffusion as dif
from reldiff import io
from reldiff.spectral import BathParams

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def run(tmp_path, command, config=None, *args):
    argv = [command, "--out", str(tmp_path / "out")]
    if config is not None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        argv += ["--config", str(path)]
    return cli.main(argv + list(args))


def outputs(tmp_path):
    return {f.name for f in (tmp_path / "out").iterdir()}


def test_alpha_command(tmp_path, capsys):
    code = run(tmp_path, "alpha", None, "--p", "2", "0.5", "0", "1", "--eps", "3", "--pi-eps", "1")
    assert code == 0
    assert {"alpha.json", "alpha.csv", "metadata.json"} <= outputs(tmp_path)
    out = json.loads((tmp_path / "out" / "alpha.json").read_text())
    p = np.array([2, 0.5, 0, 1.0])
    ref = dif.alpha_array(p, BathParams(beta=1.0, eps=3.0, pi_eps=1.0))
    assert np.allclose(out["result"]["alpha"], ref, rtol=0, atol=1e-15 * np.abs(ref).max())
    assert "alpha^{mu nu}" in capsys.readouterr().out


def test_alpha_json_feeds_back_as_config(tmp_path):
    assert run(tmp_path, "alpha", {"bath": {"eps": 2.0, "pi_eps": 0.5, "rapidity": 0.4},
                                   "alpha": {"p_spatial": [0.3, 0.0, 1.0], "m": 1.5}}) == 0
    first = json.loads((tmp_path / "out" / "alpha.json").read_text())
    again = tmp_path / "again"
    again.mkdir()
    assert cli.main(["alpha", "--config", str(tmp_path / "out" / "alpha.json"), "--out", str(again / "out")]) == 0
    second = json.loads((again / "out" / "alpha.json").read_text())
    assert second["result"] == first["result"]


def test_spectral_command(tmp_path):
    assert run(tmp_path, "spectral", {"spectral": {"preset": "planck", "beta": 1.0}}) == 0
    rep = json.loads((tmp_path / "out" / "spectral.json").read_text())
    assert rep["inequality_holds"] and rep["converged"]
    assert rep["eps_over_3pi"] == pytest.approx(1.0, rel=1e-9)
    assert rep["r_current"] == pytest.approx(rep["r_current_closed_form"], rel=1e-6)
    assert {"spectral_weight.csv", "spectral_weight.png"} <= outputs(tmp_path)


def test_simulate_command(tmp_path):
    cfg = {"bath": {"eps": 3.0, "pi_eps": 1.0, "tau_c": 0.5},
           "sim": {"dt": 4e-3, "steps": 100, "ensemble": 400, "record_every": 25, "burn_in": 50,
                   "dump_trajectories": 2, "init": {"kind": "juttner"}, "reference_cells": 128}}
    assert run(tmp_path, "simulate", cfg) == 0
    names = outputs(tmp_path)
    assert {"moments.csv", "radial_hist.csv", "hist3d.csv", "trajectories.csv", "ensemble.json",
            "moments.png", "radial_hist.png"} <= names
    header, data = io.read_csv(tmp_path / "out" / "moments.csv")
    assert header[0] == "time" and "p2_mean_drift" in header
    assert data.shape[0] == 4
    summary = json.loads((tmp_path / "out" / "ensemble.json").read_text())
    assert summary["escaped"] == 0 and "stationarity" in summary


def test_kubo_command(tmp_path):
    cfg = {"spectral": {"preset": "planck"}, "kubo": {"p": [1.0, 0, 0, 0], "ensembles": 500}}
    assert run(tmp_path, "kubo", cfg) == 0
    header, data = io.read_csv(tmp_path / "out" / "kubo.csv")
    assert header == ["mu", "nu", "estimate", "stderr", "analytic", "z"]
    assert data.shape == (16, 6)
    assert {"kubo.json", "kubo_z.png"} <= outputs(tmp_path)


def test_fokker_planck_command(tmp_path):
    cfg = {"bath": {"eps": 3.0, "pi_eps": 1.0, "tau_c": 0.5}, "grid": {"cells": 64}}
    assert run(tmp_path, "fokker-planck", cfg) == 0
    fits = json.loads((tmp_path / "out" / "fits.json").read_text())["fits"]
    assert fits["invariant"]["l1"] < fits["d3p"]["l1"]
    assert {"profile.csv", "profile.png", "history.csv", "history.png"} <= outputs(tmp_path)


def test_fokker_planck_axisymmetric(tmp_path):
    cfg = {"bath": {"eps": 3.0, "pi_eps": 1.0, "tau_c": 0.5, "rapidity": 0.3},
           "grid": {"geometry": "axisymmetric", "n_rho": 12, "n_z": 24}}
    assert run(tmp_path, "fokker-planck", cfg) == 0
    assert "profile2d.csv" in outputs(tmp_path)


def test_equilibrium_check_both_signs(tmp_path):
    cfg = {"bath": {"eps": 3.0, "pi_eps": 1.0, "rapidity": 0.5}, "equilibrium": {"samples": 300}}
    assert run(tmp_path, "equilibrium-check", cfg) == 0
    good = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert good["flux_zero"] and good["detailed_balance"]
    assert run(tmp_path, "equilibrium-check", cfg, "--friction-sign", "paper-eq56") == 0
    bad = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert not bad["flux_zero"] and bad["friction_sign"] == "paper-eq56"


def test_format_selection(tmp_path):
    assert run(tmp_path, "alpha", None, "--p", "1", "0", "0", "0", "--eps", "3", "--pi-eps", "1",
               "--format", "csv") == 0
    assert outputs(tmp_path) == {"alpha.csv", "metadata.json"}
    meta = json.loads((tmp_path / "out" / "metadata.json").read_text())
    assert meta["files"] == ["alpha.csv"] and meta["command"] == "alpha"


def test_exit_codes(tmp_path, capsys):
    # spacelike momentum is a domain error
    assert run(tmp_path, "alpha", None, "--p", "1", "2", "0", "0", "--eps", "3", "--pi-eps", "1") == 2
    # negative spectral table entries
    table = tmp_path / "g.csv"
    table.write_text("k,g\n0,1\n1,-0.5\n2,0\n")
    assert run(tmp_path, "spectral", {"spectral": {"preset": "custom-table", "path": str(table)}}) == 2
    # usage and config errors
    assert cli.main(["no-such-command"]) == 1
    assert run(tmp_path, "alpha", {"colour": 1}) == 1
    assert run(tmp_path, "alpha", {"bath": {"eps": 3.0, "pi_eps": 1.0}, "alpha": {"p": [1, 0]}}) == 1
    assert run(tmp_path, "simulate", {"bath": {"eps": 3.0, "pi_eps": 1.0}, "sim": {"dtt": 1.0}}) == 1
    err = capsys.readouterr().err
    assert "ConfigError" in err and "Traceback" not in err


def test_non_convergence_exit_code(tmp_path):
    cfg = {"bath": {"eps": 3.0, "pi_eps": 1.0}, "grid": {"cells": 64, "max_time": 0.01}}
    assert run(tmp_path, "fokker-planck", cfg) == 3


def test_png_outputs_are_reproducible(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bath": {"eps": 3.0, "pi_eps": 1.0}, "equilibrium": {"samples": 200}}))
    blobs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(["equilibrium-check", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
        blobs.append((out / "residuals.png").read_bytes())
    assert blobs[0].startswith(PNG_MAGIC)
    assert blobs[0] == blobs[1]


def test_seed_changes_stochastic_output(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"spectral": {"preset": "planck"}, "kubo": {"p": [1.0, 0, 0, 0], "ensembles": 200}}))
    for seed in (1, 2):
        assert cli.main(["kubo", "--config", str(cfg), "--seed", str(seed), "--out", str(tmp_path / str(seed)),
                         "--format", "csv"]) == 0
    a = (tmp_path / "1" / "kubo.csv").read_bytes()
    b = (tmp_path / "2" / "kubo.csv").read_bytes()
    assert a != b


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "reldiff", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("reldiff ")
