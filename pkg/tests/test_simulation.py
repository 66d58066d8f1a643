import json

import numpy as np
import pytest
from scipy.stats import ks_2samp

from nph2ph.data.standins import STANDINS, load_standin, standin_spec
from nph2ph.data.timescale import build
from nph2ph.exceptions import InvalidSpec
from nph2ph.model.predict import kappa_piecewise, kappa_ph
from nph2ph.model.process import ms_exceed
from nph2ph.simulation.generator import (
    Censoring,
    SimSpec,
    gen_nph,
    inverse_cumulative_hazard,
    piecewise_survival,
    uniform_censoring_bound,
)
from nph2ph.simulation.oracles import (
    brute_l2_argmin,
    brute_r2_argmax,
    default_candidates,
    mc_bridge_exceed,
    mc_bridge_null,
    mc_kappa,
    null_spec,
    true_beta_on_grid,
)
from nph2ph.utils.parallel import ENV_THREADS, ordered_map, resolve_jobs
from nph2ph.utils.random import replicate_seed, substream


def test_gen_nph_is_deterministic(ph_spec):
    assert gen_nph(ph_spec) == gen_nph(ph_spec)
    assert gen_nph(ph_spec) != gen_nph(ph_spec.with_seed(12))


def test_gen_nph_layout():
    spec = SimSpec(n=50, baseline_hazard=0.5, log_hazard_ratios=(1.0,), seed=3)
    data = gen_nph(spec)
    assert data.n_per_group == (50, 50)
    assert data.d == 100
    assert np.all(data.time > 0)


def test_inverse_cumulative_hazard_inverts_survival():
    e = np.array([0.01, 0.3, 0.5, 1.0, 2.5, 7.0])
    changepoints, rates = (0.5, 2.0), (1.0, 0.2, 3.0)
    t = inverse_cumulative_hazard(e, changepoints, rates)
    np.testing.assert_allclose(piecewise_survival(t, changepoints, rates), np.exp(-e), rtol=1e-12)
    assert np.all(np.diff(t) > 0)


def test_proportional_arms_match_after_rescaling():
    spec = SimSpec(n=2000, baseline_hazard=0.3, log_hazard_ratios=(np.log(2.0),), seed=11)
    data = gen_nph(spec)
    control = data.time[data.group == 0]
    treated = data.time[data.group == 1]
    assert treated.mean() < control.mean()
    assert ks_2samp(control, 2.0 * treated).pvalue > 0.001


def test_uniform_censoring_bound():
    c = uniform_censoring_bound(0.5, 0.3)
    assert (1.0 - np.exp(-0.5 * c)) / (0.5 * c) == pytest.approx(0.3, abs=1e-12)
    with pytest.raises(ValueError):
        uniform_censoring_bound(0.5, 1.0)


def test_censored_share():
    spec = SimSpec(n=5000, censoring=Censoring("uniform", uniform_censoring_bound(1.0, 0.2)))
    data = gen_nph(spec)
    assert 1.0 - data.d / data.n == pytest.approx(0.2, abs=0.02)


def test_spec_from_dict():
    spec = SimSpec.from_dict({"n": 10, "beta": -0.5, "censoring": "none"})
    assert spec.log_hazard_ratios == (-0.5,)
    assert spec.changepoints == ()
    assert SimSpec.from_dict(spec.to_dict()) == spec

    piecewise = standin_spec("long")
    assert piecewise.changepoints == (8.5,)
    assert SimSpec.from_dict(piecewise.to_dict()) == piecewise


@pytest.mark.parametrize(
    "spec",
    [
        {"beta": 0.0},
        {"n": 10, "colour": "red"},
        {"n": 1},
        {"n": 10, "beta": {"changepoints": [2.0, 1.0], "values": [0, 1, 2]}},
        {"n": 10, "beta": {"changepoints": [1.0], "values": [0.0]}},
        {"n": 10, "censoring": {"kind": "weibull", "rate": 1.0}},
        {"n": 10, "censoring": {"kind": "uniform"}},
        {"n": 10, "seed": -1},
        {"n": "ten"},
        [1, 2],
    ],
)
def test_invalid_spec(spec):
    with pytest.raises(InvalidSpec):
        SimSpec.from_dict(spec)


def test_malformed_spec_json():
    with pytest.raises(json.JSONDecodeError) as info:
        SimSpec.from_json('{"n": 10,\n "beta": }')
    assert info.value.lineno == 2


def test_standins_load():
    for name in STANDINS:
        assert standin_spec(name).n > 100
    assert load_standin("long") == load_standin("long")
    assert load_standin("long", seed=1) != load_standin("long")
    with pytest.raises(ValueError):
        standin_spec("unknown")


def test_substreams_do_not_depend_on_draw_order():
    first = substream(7, 1).random(3)
    substream(7, 0).random(100)
    np.testing.assert_array_equal(substream(7, 1).random(3), first)
    assert not np.array_equal(substream(7, 0).random(3), first)
    assert replicate_seed(7, 0) == replicate_seed(7, 0)
    assert replicate_seed(7, 0) != replicate_seed(7, 1)


def test_resolve_jobs(monkeypatch):
    monkeypatch.delenv(ENV_THREADS, raising=False)
    assert resolve_jobs(None) == 1
    assert resolve_jobs(3) == 3
    monkeypatch.setenv(ENV_THREADS, "2")
    assert resolve_jobs(8) == 2
    monkeypatch.setenv(ENV_THREADS, "many")
    with pytest.raises(ValueError):
        resolve_jobs(2)


def test_ordered_map_keeps_order(monkeypatch):
    monkeypatch.delenv(ENV_THREADS, raising=False)
    serial = ordered_map(lambda x: x * x, range(10), n_jobs=1)
    assert serial == [x * x for x in range(10)]
    assert ordered_map(lambda x: x * x, range(10), n_jobs=2) == serial


def test_mc_kappa_does_not_depend_on_workers(monkeypatch):
    monkeypatch.delenv(ENV_THREADS, raising=False)
    serial = mc_kappa(-1.0, 300_000, seed=3, n_jobs=1)
    parallel = mc_kappa(-1.0, 300_000, seed=3, n_jobs=2)
    assert serial == parallel
    with pytest.raises(ValueError):
        mc_kappa(-1.0, 100)


@pytest.mark.parametrize("beta", [-2.0, -1.0, 0.0, 1.0])
def test_mc_kappa_matches_closed_form(beta):
    result = mc_kappa(beta, 1_000_000, seed=20)
    assert result.estimate == pytest.approx(kappa_ph(beta), abs=0.005)
    assert result.se < 0.001


@pytest.mark.parametrize(
    "beta_spec",
    [(0.045 * 8.5, -2.08, 0.05), (0.385 * 1.92, -0.089, -0.466), (0.5, 1.0, -1.0)],
)
def test_mc_kappa_matches_piecewise_closed_form(beta_spec):
    result = mc_kappa(beta_spec, 1_000_000, seed=21)
    assert result.estimate == pytest.approx(kappa_piecewise(*beta_spec), abs=0.01)


@pytest.mark.slow
def test_mc_bridge_exceed_near_miller_siegmund():
    result = mc_bridge_exceed(3.0, replicates=20_000, grid=2_000, seed=5)
    assert result.estimate == pytest.approx(ms_exceed(3.0), abs=0.02)


def test_null_spec():
    spec = null_spec(400)
    assert spec.n == 200
    assert spec.log_hazard_ratios == (0.0,)
    assert spec.censoring.kind == "uniform"


def test_mc_bridge_null_needs_replicates():
    with pytest.raises(ValueError):
        mc_bridge_null(100, replicates=10)


@pytest.mark.slow
def test_mc_bridge_null_calibration():
    calibration = mc_bridge_null(400, replicates=2000, seed=2024)
    table = calibration.to_frame().set_index("band")
    assert list(table.index) == ["raw_90", "raw_99.9", "std_90", "std_99.9"]
    assert 0.07 <= table.loc["raw_90", "exceed_rate"] <= 0.13
    assert table.loc["raw_99.9", "exceed_rate"] <= 0.005
    assert 0.9 <= calibration.u1_variance <= 1.1
    assert calibration.replicates == 2000


def test_default_candidates():
    candidates = default_candidates()
    assert len(candidates) == 50
    names = [name for name, _ in candidates.items()]
    assert names == sorted(names)
    assert "step_0.5_+0.0" in names


def test_brute_l2_finds_exact_candidate():
    units = np.arange(1, 101) / 100
    truth = -2.0 * np.where(units < 0.5, 1.0, 0.0)
    best, frame = brute_l2_argmin(truth, units, default_candidates())
    assert best == "step_0.5_+0.0"
    row = frame.set_index("name").loc[best]
    assert row["scale"] == pytest.approx(-2.0)
    assert row["l2"] == pytest.approx(0.0, abs=1e-12)


def test_brute_r2_prefers_a_time_varying_shape(long_trial):
    ts = build(long_trial)
    best, frame = brute_r2_argmax(long_trial, ts, default_candidates())
    assert len(frame) == 50
    assert best != "const"
    r2 = frame.set_index("name")["r2"]
    assert r2[best] == r2.max()
    assert r2[best] > r2["const"]


def test_true_beta_on_grid():
    spec = SimSpec(n=300, changepoints=(0.8,), log_hazard_ratios=(-2.0, 0.0), seed=5)
    ts = build(gen_nph(spec))
    truth = true_beta_on_grid(spec, ts)
    np.testing.assert_array_equal(truth, np.where(ts.times < 0.8, -2.0, 0.0))
