"""Simulated stand-ins for four published two-arm trials.

Each stand-in is a SimSpec whose hazards, changepoint and censoring are
set so the simulated trial resembles the published survival curves.
Study time is in months.
"""

from pathlib import Path
from typing import Optional

from nph2ph.data.survival import TrialData
from nph2ph.simulation.generator import SimSpec, gen_nph

PATH_STANDINS = Path(__file__).parent / "standins"
STANDINS = ("long", "andre", "jonker", "eggermont")


def standin_spec(name: str) -> SimSpec:
    if name not in STANDINS:
        raise ValueError(f"Unknown stand-in '{name}'. Use one of {STANDINS}")
    return SimSpec.load(PATH_STANDINS / f"{name}.json")


def load_standin(name: str, seed: Optional[int] = None) -> TrialData:
    """Simulated trial of a stand-in, with its bundled seed unless given"""
    spec = standin_spec(name)
    if seed is not None:
        spec = spec.with_seed(seed)
    return gen_nph(spec)
