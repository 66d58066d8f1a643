import numpy as np
import pytest
import toml

from nph2ph.data.standins import load_standin
from nph2ph.data.survival import TrialData, serialize_csv
from nph2ph.simulation.generator import Censoring, SimSpec, gen_nph
from nph2ph.utils.conf import load_conf
from nph2ph.analyze import PATH_CONFIG


@pytest.fixture
def small_trial():
    """Five subjects: failures at 1, 2 (tied, one per group) and 4, a
    censoring at 3. Group 1 is out of the risk set at time 4."""
    return TrialData.from_arrays(
        time=[1.0, 2.0, 2.0, 3.0, 4.0],
        event=[1, 1, 1, 0, 1],
        group=[0, 1, 0, 1, 0],
    )


@pytest.fixture
def balanced_trial():
    """24 failures at distinct times, groups alternating"""
    n = 24
    return TrialData.from_arrays(
        time=np.arange(1, n + 1, dtype=float),
        event=np.ones(n),
        group=np.arange(n) % 2,
    )


@pytest.fixture(scope="session")
def ph_spec():
    return SimSpec(
        n=200,
        baseline_hazard=1.0,
        log_hazard_ratios=(-0.5,),
        censoring=Censoring("uniform", 3.0),
        seed=11,
    )


@pytest.fixture(scope="session")
def ph_trial(ph_spec):
    return gen_nph(ph_spec)


@pytest.fixture(scope="session")
def long_trial():
    return load_standin("long")


@pytest.fixture
def fast_config(tmp_path):
    """Default config with fewer Monte Carlo pairs, as a file"""
    config = load_conf(PATH_CONFIG)
    config["analysis"]["kappa_pairs"] = 10000
    config["simulation"]["pairs"] = 10000
    config["simulation"]["replicates"] = 500
    path = tmp_path / "config.toml"
    with open(path, "w") as toml_file:
        toml.dump(dict(config), toml_file)
    return path


@pytest.fixture
def long_csv(tmp_path, long_trial):
    path = tmp_path / "long_standin.csv"
    path.write_bytes(serialize_csv(long_trial))
    return path
