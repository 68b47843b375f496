"""End-to-end tests for the ``taucorr`` command line.

Most cases call ``cli_main`` in-process (fast, easy to capture output);
one subprocess test exercises the installed console script.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from taucorr.cli import cli_main


def write_csv(path, rows):
    path.write_text(
        "\n".join(",".join(str(v) for v in row) for row in rows) + "\n",
        encoding="utf-8",
    )


@pytest.fixture
def comonotone_sample(tmp_path):
    path = tmp_path / "sample.csv"
    values = [(float(i), float(i) ** 3) for i in range(1, 13)]
    write_csv(path, values)
    return path


# ---------------------------------------------------------------------------
# tau / plugin


def test_tau_command_comonotone(comonotone_sample, tmp_path):
    out = tmp_path / "tau.csv"
    assert cli_main(["tau", "--input", str(comonotone_sample), "--output", str(out)]) == 0
    got = np.loadtxt(out, delimiter=",")
    np.testing.assert_array_equal(got, np.ones((2, 2)))


def test_tau_command_reads_header_rows(tmp_path):
    path = tmp_path / "sample.csv"
    path.write_text("a,b\n1,5\n2,4\n3,6\n", encoding="utf-8")
    out = tmp_path / "tau.csv"
    assert cli_main(["tau", "--input", str(path), "--output", str(out)]) == 0
    got = np.loadtxt(out, delimiter=",")
    assert got.shape == (2, 2)
    np.testing.assert_array_equal(np.diag(got), [1.0, 1.0])
    assert got[0, 1] == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_plugin_command_roundtrip_precision(comonotone_sample, tmp_path):
    out = tmp_path / "sigma.csv"
    assert cli_main(["plugin", "--input", str(comonotone_sample), "--output", str(out)]) == 0
    got = np.loadtxt(out, delimiter=",")
    # sin((pi/2) * 1) == 1 exactly and %.17g is lossless for doubles
    np.testing.assert_array_equal(got, np.ones((2, 2)))


def test_plugin_psd_projection_flag(tmp_path):
    rng = np.random.default_rng(3)
    x = rng.standard_normal((40, 5))
    path = tmp_path / "sample.csv"
    write_csv(path, x.tolist())
    out = tmp_path / "sigma.csv"
    code = cli_main(
        ["plugin", "--input", str(path), "--output", str(out), "--psd-project"]
    )
    assert code == 0
    got = np.loadtxt(out, delimiter=",")
    assert np.linalg.eigvalsh(got).min() >= -1e-12
    np.testing.assert_allclose(np.diag(got), 1.0, atol=1e-15)


# ---------------------------------------------------------------------------
# bounds


def test_bounds_command_stdout_json(capsys):
    assert cli_main(["bounds", "--n", "1000", "--d", "3", "--alpha", "0.5"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["f_value"] == pytest.approx(0.19939535199349057, rel=1e-15)
    assert payload["t_bound_population"] is None  # no norms supplied
    assert payload["constants"]["C1"] == pytest.approx(np.pi)


def test_bounds_command_with_norms_to_file(tmp_path):
    out = tmp_path / "bounds.json"
    code = cli_main(
        [
            "bounds", "--n", "1000", "--d", "3", "--alpha", "0.5",
            "--t-norm", "2.0", "--that-norm", "2.0", "--output", str(out),
        ]
    )
    assert code == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["t_bound_population"] == pytest.approx(0.2819876110633515, rel=1e-12)
    assert payload["sigma_bound_data_driven"] == pytest.approx(1.024116486110092, rel=1e-12)


def test_bounds_command_rejects_bad_alpha(capsys):
    assert cli_main(["bounds", "--n", "100", "--d", "3", "--alpha", "1.5"]) == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# elementary / refine


def _write_plugin_matrix(tmp_path, sigma):
    path = tmp_path / "plugin.csv"
    write_csv(path, np.asarray(sigma).tolist())
    return path


def test_elementary_command(tmp_path, capsys):
    # rank-one factor structure plus noise, read back through the CLI
    v = np.full(4, 0.5)
    sigma = np.outer(v, v) + np.diag(1.0 - v**2)
    path = _write_plugin_matrix(tmp_path, sigma)
    theta_out = tmp_path / "theta.csv"
    code = cli_main(
        [
            "elementary", "--input", str(path), "--n", "2000", "--alpha", "0.25",
            "--mu", "0.4", "--theta-output", str(theta_out),
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["r_hat"] == 1
    assert payload["mu_used"] == 0.4
    assert payload["sigma2_negative"] is False
    theta = np.loadtxt(theta_out, delimiter=",")
    assert theta.shape == (4, 4)


def test_refine_command_big_mu_gives_identity(tmp_path):
    sigma = np.array([[1.0, 0.3], [0.3, 1.0]])
    path = _write_plugin_matrix(tmp_path, sigma)
    out = tmp_path / "refined.csv"
    report = tmp_path / "report.json"
    code = cli_main(
        [
            "refine", "--input", str(path), "--n", "500", "--alpha", "0.25",
            "--mu", "10.0", "--output", str(out), "--report", str(report),
        ]
    )
    assert code == 0
    got = np.loadtxt(out, delimiter=",")
    np.testing.assert_array_equal(got, np.eye(2))
    rep = json.loads(report.read_text(encoding="utf-8"))
    assert rep["iterations"] == 0
    assert rep["converged"] is True
    assert rep["mu"] == 10.0


def test_refine_command_rejects_nonsquare(tmp_path, capsys):
    path = tmp_path / "rect.csv"
    write_csv(path, [[1.0, 0.2, 0.1], [0.2, 1.0, 0.0]])
    code = cli_main(
        ["refine", "--input", str(path), "--n", "100", "--alpha", "0.2",
         "--output", str(tmp_path / "o.csv")]
    )
    assert code == 2
    assert "square matrix" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# simulate


def _spec_file(tmp_path, payload, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_simulate_command_deterministic(tmp_path):
    spec = _spec_file(
        tmp_path, {"sigma": [[1.0, 0.5], [0.5, 1.0]], "seed": 7}
    )
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    for out in (a, b):
        assert cli_main(["simulate", "--spec", str(spec), "--n", "50",
                         "--output", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    x = np.loadtxt(a, delimiter=",")
    assert x.shape == (50, 2)
    # a different seed must change the draw
    assert cli_main(["simulate", "--spec", str(spec), "--n", "50",
                     "--output", str(c), "--seed", "8"]) == 0
    assert a.read_bytes() != c.read_bytes()


def test_simulate_command_header_and_factor_spec(tmp_path):
    spec = _spec_file(
        tmp_path,
        {"factor": {"d": 4, "r": 1, "factor_eigenvalues": [2.0],
                    "elementary": True},
         "marginals": "exp", "seed": 1},
    )
    out = tmp_path / "x.csv"
    code = cli_main(["simulate", "--spec", str(spec), "--n", "30",
                     "--output", str(out), "--header"])
    assert code == 0
    lines = out.read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "x0,x1,x2,x3"
    assert len(lines) == 31
    # exp marginal leaves only positive values
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert (data > 0.0).all()


def test_simulate_command_spec_errors(tmp_path, capsys):
    missing = _spec_file(tmp_path, {"generator": "gaussian"}, "missing.json")
    assert cli_main(["simulate", "--spec", str(missing), "--n", "10",
                     "--output", str(tmp_path / "o.csv")]) == 2
    assert "either 'sigma' or 'factor'" in capsys.readouterr().err

    bad_json = tmp_path / "broken.json"
    bad_json.write_text('{"sigma": [[1.0,\n', encoding="utf-8")
    assert cli_main(["simulate", "--spec", str(bad_json), "--n", "10",
                     "--output", str(tmp_path / "o.csv")]) == 2
    err = capsys.readouterr().err
    assert "broken.json:2:1" in err

    infeasible = _spec_file(
        tmp_path,
        {"factor": {"d": 6, "r": 2, "factor_eigenvalues": [2.0, 1.5],
                    "elementary": True}},
        "infeasible.json",
    )
    assert cli_main(["simulate", "--spec", str(infeasible), "--n", "10",
                     "--output", str(tmp_path / "o.csv")]) == 2


# ---------------------------------------------------------------------------
# malformed tabular input


def test_tau_command_non_numeric_cell(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,oops\n", encoding="utf-8")
    code = cli_main(["tau", "--input", str(path), "--output", str(tmp_path / "o.csv")])
    assert code == 2
    err = capsys.readouterr().err
    assert f"{path}:2: non-numeric cell 'oops'" in err


def test_tau_command_ragged_rows(tmp_path, capsys):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2\n3,4,5\n", encoding="utf-8")
    assert cli_main(["tau", "--input", str(path),
                     "--output", str(tmp_path / "o.csv")]) == 2
    assert "expected 2 columns, found 3" in capsys.readouterr().err


def test_tau_command_missing_file(tmp_path, capsys):
    assert cli_main(["tau", "--input", str(tmp_path / "nope.csv"),
                     "--output", str(tmp_path / "o.csv")]) == 2
    assert "error:" in capsys.readouterr().err


def test_tau_command_empty_file(tmp_path, capsys):
    path = tmp_path / "empty.csv"
    path.write_text("", encoding="utf-8")
    assert cli_main(["tau", "--input", str(path),
                     "--output", str(tmp_path / "o.csv")]) == 2
    assert "empty file" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# experiment


def _config_file(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_experiment_command_pass(tmp_path, capsys):
    cfg = _config_file(tmp_path, {"experiment": "sandwich", "d": 5,
                                  "replicates": 10, "seed": 4})
    out_base = tmp_path / "run"
    code = cli_main(["experiment", "--config", str(cfg), "--output", str(out_base)])
    assert code == 0
    captured = capsys.readouterr()
    assert "status=pass" in captured.err
    assert captured.out == ""  # results went to the files, not stdout
    payload = json.loads((tmp_path / "run.json").read_text(encoding="utf-8"))
    assert payload["status"] == "pass"
    assert (tmp_path / "run.csv").exists()


def test_experiment_command_stdout_when_no_output(tmp_path, capsys):
    cfg = _config_file(tmp_path, {"experiment": "sandwich", "d": 4,
                                  "replicates": 5})
    assert cli_main(["experiment", "--config", str(cfg)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["experiment"] == "sandwich"
    assert payload["schema_version"] == 1


def test_experiment_command_fail_exit_code(tmp_path):
    # too few replicates for the confidence bound to clear the floor
    cfg = _config_file(
        tmp_path,
        {"experiment": "bound_coverage_T", "n": 300, "d": 4,
         "alpha": 0.1, "replicates": 6},
    )
    assert cli_main(["experiment", "--config", str(cfg)]) == 1


def test_experiment_command_conditions_unmet_exit_code(tmp_path):
    cfg = _config_file(
        tmp_path,
        {"experiment": "elementary", "n": 40, "d": 8, "alpha": 0.25,
         "replicates": 2,
         "factor": {"d": 8, "r": 2, "factor_eigenvalues": [3.0, 2.0],
                    "elementary": True}},
    )
    assert cli_main(["experiment", "--config", str(cfg)]) == 3


def test_experiment_command_rejects_unknown_keys(tmp_path, capsys):
    cfg = _config_file(tmp_path, {"experiment": "sandwich", "bogus": True})
    assert cli_main(["experiment", "--config", str(cfg)]) == 2
    assert "unrecognised config keys" in capsys.readouterr().err


def test_experiment_command_seed_override(tmp_path):
    cfg = _config_file(
        tmp_path,
        {"experiment": "bound_coverage_T", "n": 200, "d": 3, "alpha": 0.3,
         "replicates": 4},
    )
    base_a, base_b = tmp_path / "a", tmp_path / "b"
    cli_main(["experiment", "--config", str(cfg), "--output", str(base_a)])
    cli_main(["experiment", "--config", str(cfg), "--output", str(base_b),
              "--seed", "99"])
    rec_a = json.loads((tmp_path / "a.json").read_text(encoding="utf-8"))["records"]
    rec_b = json.loads((tmp_path / "b.json").read_text(encoding="utf-8"))["records"]
    assert rec_a != rec_b


# ---------------------------------------------------------------------------
# parser behaviour and the installed entry point


def test_help_exits_zero(capsys):
    assert cli_main(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out


def test_unknown_subcommand_exits_two(capsys):
    assert cli_main(["frobnicate"]) == 2
    capsys.readouterr()


def test_console_script_smoke():
    proc = subprocess.run(
        [sys.executable, "-m", "taucorr.cli", "bounds", "--n", "400", "--d", "8",
         "--alpha", "0.1"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n"] == 400
