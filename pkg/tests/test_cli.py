"""Command-line interface: fit, predict, simulate, exit codes, round trips."""

import json

import numpy as np
import pytest
from scipy.special import expit

from rarefit.cli import EXIT_CONVERGENCE, EXIT_DATA, EXIT_OK, EXIT_USAGE, main


@pytest.fixture()
def csv_2x2(tmp_path):
    path = tmp_path / "table.csv"
    rows = ["y,x"]
    rows += ["0,0"] * 95 + ["1,0"] * 5 + ["0,1"] * 4 + ["1,1"]
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture()
def csv_separated(tmp_path):
    path = tmp_path / "sep.csv"
    rows = ["y,x"] + [f"{int(v > 0)},{v}" for v in (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)]
    path.write_text("\n".join(rows) + "\n")
    return path


def _read_tsv(path):
    lines = path.read_text().rstrip("\n").split("\n")
    header = lines[0].split("\t")
    return [dict(zip(header, line.split("\t"))) for line in lines[1:]]


def test_fit_worked_example_json(csv_2x2, tmp_path):
    out = tmp_path / "out"
    code = main([
        "fit", "--input", str(csv_2x2), "--outcome", "y", "--covariates", "x",
        "--methods", "fl,flic,flac", "--format", "json", "--out-dir", str(out),
    ])
    assert code == EXIT_OK
    report = json.loads((out / "fit.json").read_text())
    assert report["schema_version"] == 1
    expected = {"fl": (0.0544554, 0.25), "flic": (0.0486, 0.2282), "flac": (0.0516, 0.1683)}
    for method, (p0, p1) in expected.items():
        beta = report["methods"][method]["coefficients"]
        assert abs(expit(beta[0]) - p0) < 1e-4
        assert abs(expit(beta[0] + beta[1]) - p1) < 1e-4
        assert report["methods"][method]["converged"]


def test_fit_tsv_structure(csv_2x2, capsys):
    code = main([
        "fit", "--input", str(csv_2x2), "--outcome", "y", "--covariates", "x",
        "--methods", "ml",
    ])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0].split("\t")[:3] == ["method", "term", "estimate"]
    rows = [line.split("\t") for line in lines[1:]]
    assert [r[1] for r in rows] == ["(intercept)", "x"]
    assert abs(float(rows[1][2]) - np.log(4.75)) < 1e-4
    assert rows[0][4] == ""  # no odds ratio for the intercept


def test_intercept_only_fit(csv_2x2, capsys):
    code = main([
        "fit", "--input", str(csv_2x2), "--outcome", "y", "--covariates", "",
        "--methods", "ml",
    ])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.strip().split("\n")
    assert len(lines) == 2  # header plus the intercept row: no odds ratios
    estimate = float(lines[1].split("\t")[2])
    assert abs(estimate - np.log(6 / 99)) < 1e-6


def test_predict_worked_example_averages(csv_2x2, capsys):
    code = main([
        "predict", "--input", str(csv_2x2), "--outcome", "y", "--covariates", "x",
        "--methods", "fl,ab,au",
    ])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0].split("\t") == ["row", "pi_fl", "pi_ab", "pi_au", "au_clipped"]
    average = lines[-1].split("\t")
    assert average[0] == "average"
    assert abs(float(average[1]) - 0.0638) < 1e-4
    assert abs(float(average[2]) - 0.0704) < 1e-4
    assert abs(float(average[3]) - 0.0571) < 1e-4


def test_predict_flags_clipped_rows(tmp_path, capsys):
    rng = np.random.default_rng(3)
    x = np.concatenate([rng.normal(0, 1, 60), [8.0]])
    y = np.zeros(61, dtype=int)
    y[:3] = 1
    path = tmp_path / "clip.csv"
    path.write_text("y,x\n" + "\n".join(f"{yi},{xi}" for yi, xi in zip(y, x)) + "\n")
    code = main([
        "predict", "--input", str(path), "--outcome", "y", "--covariates", "x",
        "--methods", "au",
    ])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.strip().split("\n")
    flags = [line.split("\t")[2] for line in lines[1:-1]]
    assert "true" in flags


def test_fit_all_methods_and_tau_plumbing(csv_2x2, tmp_path):
    out = tmp_path / "all"
    code = main([
        "fit", "--input", str(csv_2x2), "--outcome", "y", "--covariates", "x",
        "--methods", "ml,wf,fl,flic,flac,lf,cp,rr", "--tau", "0.2",
        "--format", "json", "--out-dir", str(out),
    ])
    assert code == EXIT_OK
    report = json.loads((out / "fit.json").read_text())
    assert report["methods"]["wf"]["extras"]["tau"] == 0.2
    assert report["methods"]["rr"]["ci_method"] == ["wald", "wald"]
    assert report["methods"]["lf"]["ci_method"] == ["profile", "profile"]
    for method in ("ml", "flic", "flac", "lf", "rr"):
        assert abs(report["methods"][method]["mean_predicted"] - 6 / 105) < 1e-8


def test_separated_data_reported_not_fatal(csv_separated, tmp_path):
    out = tmp_path / "sep_out"
    code = main([
        "fit", "--input", str(csv_separated), "--outcome", "y", "--covariates", "x",
        "--methods", "ml,fl", "--format", "json", "--out-dir", str(out),
    ])
    assert code == EXIT_OK
    report = json.loads((out / "fit.json").read_text())
    assert report["methods"]["ml"]["separation"] is True
    assert report["methods"]["ml"]["converged"] is False
    assert report["methods"]["fl"]["converged"] is True


def test_usage_errors():
    assert main(["predict", "--input", "x.csv", "--outcome", "y",
                 "--methods", ""]) == EXIT_USAGE
    assert main(["fit", "--input", "x.csv", "--outcome", "y",
                 "--methods", "fl,bogus"]) == EXIT_USAGE
    # Prediction-only correctors are not fitting methods.
    assert main(["fit", "--input", "x.csv", "--outcome", "y",
                 "--methods", "ab"]) == EXIT_USAGE
    assert main(["fit", "--input", "x.csv", "--outcome", "y",
                 "--methods", "wf", "--tau", "0.7"]) == EXIT_USAGE
    assert main(["fit", "--input", "x.csv", "--outcome", "y",
                 "--methods", "fl", "--level", "1.2"]) == EXIT_USAGE
    assert main(["fit", "--input", "x.csv", "--outcome", "y",
                 "--methods", "rr", "--lambda", "-3"]) == EXIT_USAGE
    with pytest.raises(SystemExit) as excinfo:
        main(["fit", "--input", "x.csv", "--methods", "fl"])
    assert excinfo.value.code == EXIT_USAGE


def test_data_errors(tmp_path, csv_2x2, capsys):
    missing = main(["fit", "--input", str(tmp_path / "none.csv"), "--outcome", "y",
                    "--methods", "fl"])
    assert missing == EXIT_DATA

    bad_column = main(["fit", "--input", str(csv_2x2), "--outcome", "z",
                       "--methods", "fl"])
    assert bad_column == EXIT_DATA

    nonbinary = tmp_path / "nb.csv"
    nonbinary.write_text("y,x\n0,1\n2,0\n1,1\n")
    assert main(["fit", "--input", str(nonbinary), "--outcome", "y",
                 "--methods", "fl"]) == EXIT_DATA

    constant = tmp_path / "const.csv"
    constant.write_text("y,x\n" + "\n".join(f"{i % 2},7" for i in range(10)) + "\n")
    capsys.readouterr()
    assert main(["fit", "--input", str(constant), "--outcome", "y",
                 "--covariates", "x", "--methods", "fl"]) == EXIT_DATA
    assert "x" in capsys.readouterr().err


def test_convergence_failure_exit_code(csv_2x2, monkeypatch):
    import rarefit.cli as cli
    from rarefit.exceptions import ConvergenceError

    def explode(*args, **kwargs):
        raise ConvergenceError("forced")

    monkeypatch.setattr(cli, "fit_firth", explode)
    assert main(["fit", "--input", str(csv_2x2), "--outcome", "y",
                 "--methods", "fl"]) == EXIT_CONVERGENCE


def test_fit_json_round_trips_predictions(csv_2x2, tmp_path):
    out = tmp_path / "roundtrip"
    main(["fit", "--input", str(csv_2x2), "--outcome", "y", "--covariates", "x",
          "--methods", "fl", "--format", "json", "--out-dir", str(out)])
    main(["predict", "--input", str(csv_2x2), "--outcome", "y", "--covariates", "x",
          "--methods", "fl", "--format", "json", "--out-dir", str(out)])
    fit_report = json.loads((out / "fit.json").read_text())
    predict_report = json.loads((out / "predictions.json").read_text())
    beta = np.array(fit_report["methods"]["fl"]["coefficients"])
    X = np.column_stack([np.ones(105), np.r_[np.zeros(100), np.ones(5)]])
    rebuilt = expit(X @ beta)
    assert rebuilt.tolist() == predict_report["predictions"]["fl"]


def _scenario_file(tmp_path, **overrides):
    spec = {
        "methods": ["ml", "fl", "ab"],
        "scenarios": [{
            "n": 100, "target_rate": 0.2, "effect_size": 0.5,
            "sign_pattern": "mixed", "replications": 1, "seed": 5,
        }],
    }
    spec.update(overrides)
    path = tmp_path / "scenarios.json"
    path.write_text(json.dumps(spec))
    return path


def test_simulate_smoke_emits_all_tables(tmp_path):
    path = _scenario_file(tmp_path, ci_level=0.95)
    out = tmp_path / "sim"
    assert main(["simulate", "--input", str(path), "--out-dir", str(out)]) == EXIT_OK
    for name in ("event_rate", "predictions", "calibration", "coefficients", "intervals"):
        table = _read_tsv(out / f"{name}.tsv")
        assert len(table) == 3
        assert [row["method"] for row in table] == ["ml", "fl", "ab"]
    intervals = _read_tsv(out / "intervals.tsv")
    assert float(intervals[0]["coverage"]) >= 0.0


def test_simulate_rerun_is_byte_identical(tmp_path):
    path = _scenario_file(tmp_path)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    main(["simulate", "--input", str(path), "--out-dir", str(out1)])
    main(["simulate", "--input", str(path), "--out-dir", str(out2)])
    for name in ("event_rate", "predictions", "calibration", "coefficients", "intervals"):
        assert (out1 / f"{name}.tsv").read_bytes() == (out2 / f"{name}.tsv").read_bytes()


def test_simulate_json_summary(tmp_path):
    path = _scenario_file(tmp_path)
    out = tmp_path / "json_out"
    assert main(["simulate", "--input", str(path), "--out-dir", str(out),
                 "--format", "json"]) == EXIT_OK
    payload = json.loads((out / "summary.json").read_text())
    assert payload["schema_version"] == 1
    scenario = payload["scenarios"][0]
    assert set(scenario["methods"]) == {"ml", "fl", "ab"}
    assert scenario["methods"]["fl"]["n_used"] + scenario["methods"]["fl"]["n_failed"] \
        == 1 - scenario["n_excluded_separation"]


def test_simulate_grid_validation(tmp_path, capsys):
    path = tmp_path / "grid.json"
    path.write_text(json.dumps({"grid": {"replications": 3}, "methods": ["fl"]}))
    assert main(["simulate", "--input", str(path), "--dry-run"]) == EXIT_OK
    output = capsys.readouterr().out
    assert output.startswith("scenarios: 45\n")


def test_simulate_invalid_scenario_rejected(tmp_path):
    path = _scenario_file(tmp_path)
    spec = json.loads(path.read_text())
    spec["scenarios"][0]["target_rate"] = 3.0
    path.write_text(json.dumps(spec))
    assert main(["simulate", "--input", str(path), "--dry-run"]) == EXIT_DATA


def test_simulate_requires_out_dir(tmp_path):
    path = _scenario_file(tmp_path)
    assert main(["simulate", "--input", str(path)]) == EXIT_USAGE


def test_numbers_render_six_significant_digits(csv_2x2, capsys):
    main(["fit", "--input", str(csv_2x2), "--outcome", "y", "--covariates", "x",
          "--methods", "ml"])
    slope = capsys.readouterr().out.strip().split("\n")[2].split("\t")[2]
    assert slope == "1.55814"
