import toml
import warnings
from pathlib import Path
from typing import Union

from nph2ph.utils.format_list import to_list

# Strings read as Python values
SENTINELS = {"none": None, "None": None}
CHANGEPOINTS = (0, 1, 2)


class Conf(dict):
    """Sub-class of dict that overrides __getitem__ to allow for keys not in
    the original dict, defaulting to None.
    """

    def __init__(self, *args, **kwargs):
        self.update(*args, **kwargs)

    def __getitem__(self, key):
        """Get key from dict. If not present, return None and raise warning

        Parameters
        ----------
        key : Hashable

        Returns
        -------
            original value in the dict or None if not present
        """
        if key not in self:
            warnings.warn(f"Key '{key}' not in conf. Defaulting to None")
            return None
        return dict.__getitem__(self, key)


def load_conf(path: Union[str, Path], key: str = None) -> Conf:
    """Load TOML config as dict-like

    Parameters
    ----------
    path : str
        Path to TOML config file
    key : str, optional
        Section of the conf file to load

    Returns
    -------
    Conf
    """
    config = toml.load(path)
    return Conf(config) if key is None else Conf(config[key])


def parse_landmark(value):
    """"auto", None or a non-negative study time"""
    if value is None or value in SENTINELS:
        return None
    if value == "auto":
        return "auto"
    value = float(value)
    assert value >= 0, f"Landmark time must be non-negative, got {value}"
    return value


def check_eps(eps) -> tuple:
    eps = tuple(float(x) for x in to_list(eps))
    assert len(eps) == 2, f"eps needs two values, got {eps}"
    assert 0 < eps[0] < eps[1] < 1, f"eps must satisfy 0 < eps1 < eps2 < 1, got {eps}"
    return eps


def check_bands(bands) -> tuple:
    bands = tuple(float(x) for x in to_list(bands))
    assert bands, "At least one band level is needed"
    for level in bands:
        assert 0 < level < 1, f"Band level must lie in (0, 1), got {level}"
    return bands


def load_conf_analysis(path: Union[str, Path]) -> Conf:
    """Load TOML analysis params as dict-like, sentinels resolved and
    ranges checked

    Parameters
    ----------
    path : str

    Returns
    -------
    Conf
    """
    config = load_conf(path, "analysis")
    return _process_analysis(config)


def _process_analysis(config: Conf) -> Conf:
    assert config["changepoints"] in CHANGEPOINTS, (
        f"changepoints must be one of {CHANGEPOINTS}, got {config['changepoints']}"
    )
    assert 0 <= config["legendre_order"] <= 8, (
        f"legendre_order must lie in 0..8, got {config['legendre_order']}"
    )
    assert config["min_seg"] >= 1, f"min_seg must be positive, got {config['min_seg']}"
    config.update(
        {
            "eps": check_eps(config["eps"]),
            "bands": check_bands(config["bands"]),
            "landmark": parse_landmark(config["landmark"]),
        }
    )
    return config


def load_conf_simulation(path: Union[str, Path]) -> Conf:
    config = load_conf(path, "simulation")
    config.update({"bridge_levels": check_bands(config["bridge_levels"])})
    return config


def load_conf_full(path: Union[str, Path]) -> Conf:
    """Load TOML dictionary, fully processed

    Parameters
    ----------
    path : str
        Path to TOML config file

    Returns
    -------
    Conf
    """
    config = load_conf(path)
    config.update(
        {
            "analysis": load_conf_analysis(path),
            "simulation": load_conf_simulation(path),
            "output": Conf(config["output"]),
            "parallel": Conf(config["parallel"]),
        }
    )
    return config


def update_config(config: dict, **overrides) -> dict:
    """Applies command-line overrides, skipping the ones left as None.

    Keys are looked up in the [analysis], [simulation], [output] and
    [parallel] sections, in that order; `seed` goes to [simulation].
    """
    for key, value in overrides.items():
        if value is None:
            continue
        for section in ("analysis", "simulation", "output", "parallel"):
            if key in config[section]:
                config[section].update({key: value})
                break
        else:
            raise KeyError(f"Unknown config key '{key}'")
    config.update({"analysis": _process_analysis(Conf(config["analysis"]))})
    return config
