import json

import pandas as pd
import pytest
import toml
from typer.testing import CliRunner

from nph2ph.analyze import PATH_CONFIG
from nph2ph.cli import app
from nph2ph.data.standins import PATH_STANDINS, load_standin
from nph2ph.data.survival import serialize_csv
from nph2ph.results.store_output import validate_report
from nph2ph.utils.conf import load_conf

runner = CliRunner()


def _analyze(path_input, out_dir, config, *extra):
    args = ["analyze", "--input", str(path_input), "--out-dir", str(out_dir),
            "--path-config", str(config), "--quiet", *extra]
    return runner.invoke(app, args)


def _report(out_dir):
    with open(out_dir / "report.json") as report_file:
        return json.load(report_file)


@pytest.fixture(scope="module")
def long_run(tmp_path_factory):
    """One full analysis of the Long stand-in, shared by the report checks"""
    root = tmp_path_factory.mktemp("long")
    path_input = root / "long_standin.csv"
    path_input.write_bytes(serialize_csv(load_standin("long")))
    config = load_conf(PATH_CONFIG)
    config["analysis"]["kappa_pairs"] = 10000
    path_config = root / "config.toml"
    with open(path_config, "w") as toml_file:
        toml.dump(dict(config), toml_file)
    out_dir = root / "outputs"
    result = _analyze(path_input, out_dir, path_config)
    return result, out_dir, path_config


def test_analyze_long_standin(long_run):
    result, out_dir, _ = long_run
    assert result.exit_code == 0, result.output
    report = _report(out_dir)
    validate_report(report)
    assert report["tool"]["name"] == "nph2ph"
    assert report["input"]["flags"] == []
    assert report["changepoint"]["count"] == 1
    tau = report["changepoint"]["changepoints"][0]["tau"]
    assert tau == pytest.approx(0.46, abs=0.1)
    assert report["changepoint"]["r2_single"] is not None
    assert report["changepoint"]["prediction"]["r2"] > report["ph"]["prediction"]["r2"]
    assert report["ph"]["fit"]["beta_hat"] < 0
    assert report["landmark"]["t0"] == pytest.approx(
        report["changepoint"]["changepoints"][0]["tau_original"]
    )
    assert report["legendre"]["prediction"]["kappa"] is None
    assert report["null_reasons"]["/legendre/prediction/kappa"] == "time_varying_beta"


def test_analyze_writes_every_series(long_run):
    _, out_dir, _ = long_run
    report = _report(out_dir)
    for name, filename in report["series"].items():
        frame = pd.read_csv(out_dir / filename, sep="\t")
        assert len(frame) > 0, name
    assert "effect_path_piecewise" in report["series"]
    piecewise = pd.read_csv(out_dir / report["series"]["effect_path_piecewise"], sep="\t")
    assert piecewise["u_piecewise"].iloc[0] == 0.0
    assert piecewise["u_piecewise"].notna().all()
    assert "timescale" in report["series"]
    assert (out_dir / "input.csv").is_file()
    assert "figures" not in report


def test_analyze_is_idempotent(long_run, tmp_path):
    _, out_dir, path_config = long_run
    rerun = tmp_path / "rerun"
    result = _analyze(out_dir / "input.csv", rerun, path_config)
    assert result.exit_code == 0, result.output
    assert (rerun / "report.json").read_text() == (out_dir / "report.json").read_text()
    assert (rerun / "input.csv").read_bytes() == (out_dir / "input.csv").read_bytes()


def test_analyze_stages_switched_off(long_csv, fast_config, tmp_path):
    out_dir = tmp_path / "out"
    result = _analyze(long_csv, out_dir, fast_config,
                      "--changepoints", "0", "--legendre-order", "0")
    assert result.exit_code == 0, result.output
    report = _report(out_dir)
    assert report["changepoint"] is None
    assert report["legendre"] is None
    assert report["landmark"] is None
    assert report["null_reasons"]["/changepoint"] == "not_requested"
    assert report["null_reasons"]["/legendre"] == "not_requested"
    assert report["null_reasons"]["/landmark"] == "no_changepoint"
    assert report["ph"] is not None


def test_analyze_two_changepoints(long_csv, fast_config, tmp_path):
    out_dir = tmp_path / "out"
    result = _analyze(long_csv, out_dir, fast_config,
                      "--changepoints", "2", "--legendre-order", "0")
    assert result.exit_code == 0, result.output
    report = _report(out_dir)
    validate_report(report)
    changepoint = report["changepoint"]
    assert changepoint["count"] == 2
    assert len(changepoint["changepoints"]) == 2
    assert changepoint["r2_single"] is not None
    assert changepoint["prediction"]["kappa"] is None
    piecewise = pd.read_csv(out_dir / report["series"]["effect_path_piecewise"], sep="\t")
    assert "u_piecewise" in piecewise.columns


def test_analyze_with_svg(long_csv, fast_config, tmp_path):
    out_dir = tmp_path / "out"
    result = _analyze(long_csv, out_dir, fast_config, "--svg", "--legendre-order", "0")
    assert result.exit_code == 0, result.output
    report = _report(out_dir)
    assert report["figures"]
    for filename in report["figures"]:
        assert (out_dir / filename).read_text().lstrip().startswith("<?xml")


def test_analyze_missing_input(fast_config, tmp_path):
    out_dir = tmp_path / "out"
    result = _analyze(tmp_path / "missing.csv", out_dir, fast_config)
    assert result.exit_code == 2
    assert not out_dir.exists()


def test_analyze_corrupt_row(fast_config, tmp_path):
    path_input = tmp_path / "corrupt.csv"
    path_input.write_text("time,event,group\n1,1,0\n2,yes,1\n")
    out_dir = tmp_path / "out"
    result = _analyze(path_input, out_dir, fast_config)
    assert result.exit_code == 2
    assert "Row 2" in result.output
    assert not out_dir.exists()


def test_analyze_single_arm(fast_config, tmp_path):
    path_input = tmp_path / "single.csv"
    path_input.write_text("time,event,group\n1,1,0\n2,1,0\n3,0,0\n")
    out_dir = tmp_path / "out"
    result = _analyze(path_input, out_dir, fast_config)
    assert result.exit_code == 3
    assert not out_dir.exists()


def test_analyze_bad_settings(long_csv, fast_config, tmp_path):
    result = _analyze(long_csv, tmp_path / "out", fast_config, "--eps", "0.9,0.1")
    assert result.exit_code == 2
    result = _analyze(long_csv, tmp_path / "out", fast_config, "--bands", "0.9,,0.99")
    assert result.exit_code == 2


def _simulate(spec, out_dir, config, *extra):
    args = ["simulate", "--spec", str(spec), "--out-dir", str(out_dir),
            "--path-config", str(config), "--quiet", *extra]
    return runner.invoke(app, args)


def test_simulate_is_deterministic(fast_config, tmp_path):
    spec = PATH_STANDINS / "long.json"
    first = _simulate(spec, tmp_path / "a", fast_config, "--seed", "7")
    second = _simulate(spec, tmp_path / "b", fast_config, "--seed", "7")
    assert first.exit_code == second.exit_code == 0
    data = (tmp_path / "a" / "simulated.csv").read_bytes()
    assert data == (tmp_path / "b" / "simulated.csv").read_bytes()
    other = _simulate(spec, tmp_path / "c", fast_config, "--seed", "8")
    assert other.exit_code == 0
    assert (tmp_path / "c" / "simulated.csv").read_bytes() != data


def test_simulate_malformed_spec(fast_config, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text('{"n": 10,\n "beta": }')
    result = _simulate(spec, tmp_path / "out", fast_config)
    assert result.exit_code == 2
    assert "line 2" in result.output


def test_simulate_invalid_spec(fast_config, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text('{"n": 10, "censoring": {"kind": "weibull", "rate": 1}}')
    assert _simulate(spec, tmp_path / "out", fast_config).exit_code == 2
    assert _simulate(tmp_path / "missing.json", tmp_path / "out", fast_config).exit_code == 2


def test_simulate_unknown_oracle(fast_config, tmp_path):
    spec = PATH_STANDINS / "long.json"
    result = _simulate(spec, tmp_path / "out", fast_config, "--oracle", "everything")
    assert result.exit_code == 2


def test_simulate_kappa_oracle(fast_config, tmp_path):
    spec = PATH_STANDINS / "long.json"
    result = _simulate(spec, tmp_path / "out", fast_config, "--oracle", "kappa", "--pairs", "20000")
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "out" / "oracle_kappa.tsv", sep="\t")
    assert frame.loc[0, "replicates"] == 20000
    assert abs(frame.loc[0, "difference"]) < 0.02


def test_simulate_kappa_oracle_rejects_two_changepoints(fast_config, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(
        {"n": 50, "beta": {"changepoints": [1.0, 2.0], "values": [-1.0, 0.0, 1.0]}}
    ))
    result = _simulate(spec, tmp_path / "out", fast_config, "--oracle", "kappa")
    assert result.exit_code == 2


def test_simulate_bridge_oracle(fast_config, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(
        {"n": 50, "censoring": {"kind": "uniform", "max": 3.0}, "seed": 4}
    ))
    result = _simulate(spec, tmp_path / "out", fast_config, "--oracle", "bridge")
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "out" / "oracle_bridge.tsv", sep="\t")
    assert list(frame["band"]) == ["raw_90", "raw_99.9", "std_90", "std_99.9"]
    assert (frame["replicates"] == 500).all()
    assert frame["exceed_rate"].between(0.0, 1.0).all()


def test_simulate_r2argmax_oracle(fast_config, tmp_path):
    spec = PATH_STANDINS / "long.json"
    result = _simulate(spec, tmp_path / "out", fast_config, "--oracle", "r2argmax")
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(tmp_path / "out" / "oracle_r2argmax.tsv", sep="\t")
    assert len(frame) == 50
    assert frame["argmax_r2"].sum() == 1
    assert frame["argmin_l2"].sum() == 1


def test_validate_clean(long_csv):
    result = runner.invoke(app, ["validate", "--input", str(long_csv)])
    assert result.exit_code == 0
    assert json.loads(result.stdout) == {"flags": []}


def test_validate_flags_do_not_fail(tmp_path):
    path_input = tmp_path / "single.csv"
    path_input.write_text("time,event,group\n1,1,0\n2,1,0\n")
    result = runner.invoke(app, ["validate", "--input", str(path_input)])
    assert result.exit_code == 0
    assert "SingleArm" in json.loads(result.stdout)["flags"]


def test_validate_unreadable(tmp_path):
    path_input = tmp_path / "corrupt.csv"
    path_input.write_text("time,event\n1,1\n")
    result = runner.invoke(app, ["validate", "--input", str(path_input)])
    assert result.exit_code == 2
