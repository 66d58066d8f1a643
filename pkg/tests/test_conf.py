import pytest
import toml

from nph2ph.analyze import PATH_CONFIG
from nph2ph.utils.conf import (
    Conf,
    load_conf,
    load_conf_analysis,
    load_conf_full,
    parse_landmark,
    update_config,
)
from nph2ph.utils.format_list import parse_float_list, to_list


def test_conf_warns_on_missing_key():
    conf = Conf({"a": 1})
    assert conf["a"] == 1
    with pytest.warns(UserWarning):
        assert conf["b"] is None


def test_default_config():
    config = load_conf_full(PATH_CONFIG)
    analysis = config["analysis"]
    assert analysis["changepoints"] == 1
    assert analysis["eps"] == (0.05, 0.95)
    assert analysis["bands"] == (0.90, 0.999)
    assert analysis["landmark"] == "auto"
    assert config["simulation"]["bridge_levels"] == (0.90, 0.999)
    assert config["output"]["digits"] == 17
    assert isinstance(config["parallel"], Conf)


def test_load_conf_section():
    assert load_conf(PATH_CONFIG, "simulation")["seed"] == 2024


def test_update_config_overrides():
    config = load_conf_full(PATH_CONFIG)
    config = update_config(
        config, changepoints=2, bands=[0.95], landmark="none", seed=7, svg=None
    )
    assert config["analysis"]["changepoints"] == 2
    assert config["analysis"]["bands"] == (0.95,)
    assert config["analysis"]["landmark"] is None
    assert config["simulation"]["seed"] == 7
    assert config["output"]["svg"] is False


def test_update_config_rejects_unknown_key():
    with pytest.raises(KeyError):
        update_config(load_conf_full(PATH_CONFIG), colour="red")


@pytest.mark.parametrize(
    "key, value",
    [
        ("changepoints", 3),
        ("legendre_order", 9),
        ("eps", [0.5, 0.4]),
        ("eps", [0.1]),
        ("bands", [1.5]),
        ("min_seg", 0),
        ("landmark", -1.0),
    ],
)
def test_update_config_checks_ranges(key, value):
    with pytest.raises(AssertionError):
        update_config(load_conf_full(PATH_CONFIG), **{key: value})


def test_analysis_section_from_file(tmp_path):
    config = toml.load(PATH_CONFIG)
    config["analysis"]["landmark"] = 6.0
    config["analysis"]["eps"] = [0.1, 0.9]
    path = tmp_path / "config.toml"
    with open(path, "w") as toml_file:
        toml.dump(config, toml_file)
    analysis = load_conf_analysis(path)
    assert analysis["landmark"] == 6.0
    assert analysis["eps"] == (0.1, 0.9)


def test_parse_landmark():
    assert parse_landmark(None) is None
    assert parse_landmark("None") is None
    assert parse_landmark("auto") == "auto"
    assert parse_landmark("2.5") == 2.5
    with pytest.raises(ValueError):
        parse_landmark("soon")


def test_format_list():
    assert to_list(3) == [3]
    assert to_list((1, 2)) == [1, 2]
    assert parse_float_list("0.90, 0.999") == [0.90, 0.999]
    with pytest.raises(ValueError):
        parse_float_list("0.9,,0.99")
