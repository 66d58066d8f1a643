import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from nph2ph.data.survival import TrialData
from nph2ph.exceptions import InvalidSpec
from nph2ph.model.beta import BetaFunction
from nph2ph.utils.random import substream

CENSORING_KINDS = ("none", "uniform", "exponential")
# Substream indices under a spec seed
EVENT_STREAM = 0
CENSOR_STREAM = 1


@dataclass(frozen=True)
class Censoring:
    """Independent censoring: none, uniform on (0, value] or exponential with rate value"""

    kind: str = "none"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in CENSORING_KINDS:
            raise InvalidSpec(
                f"Unknown censoring '{self.kind}'. Use one of {CENSORING_KINDS}"
            )
        if self.kind != "none" and not self.value > 0:
            raise InvalidSpec(f"{self.kind} censoring needs a positive value, got {self.value}")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return self.value * (1.0 - rng.random(size))
        if self.kind == "exponential":
            return rng.standard_exponential(size) / self.value
        return np.full(size, np.inf)

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "max": self.value}
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": self.value}
        return {"kind": "none"}


@dataclass(frozen=True)
class SimSpec:
    """
    Two-arm trial under a piecewise-constant log hazard ratio.

    Group 0 has hazard `baseline_hazard`; group 1 has hazard
    baseline_hazard * exp(beta(t)), with beta given on the ORIGINAL time
    scale by its values between the changepoints.

    Attributes
    ----------
    n : int
        Subjects per arm.
    baseline_hazard : float
    changepoints : tuple of float
        Study times where beta switches level.
    log_hazard_ratios : tuple of float
        One more value than changepoints.
    censoring : Censoring
    seed : int
    """

    n: int
    baseline_hazard: float = 1.0
    changepoints: Tuple[float, ...] = ()
    log_hazard_ratios: Tuple[float, ...] = (0.0,)
    censoring: Censoring = field(default_factory=Censoring)
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidSpec(f"Need at least 2 subjects per arm, got {self.n}")
        if not (np.isfinite(self.baseline_hazard) and self.baseline_hazard > 0):
            raise InvalidSpec(f"Baseline hazard must be positive, got {self.baseline_hazard}")
        if len(self.log_hazard_ratios) != len(self.changepoints) + 1:
            raise InvalidSpec(
                f"{len(self.changepoints)} changepoints need "
                f"{len(self.changepoints) + 1} log hazard ratios"
            )
        if not np.all(np.isfinite(self.log_hazard_ratios)):
            raise InvalidSpec("Log hazard ratios must be finite")
        tau = np.asarray(self.changepoints, dtype=float)
        if tau.size and (tau[0] <= 0 or np.any(np.diff(tau) <= 0)):
            raise InvalidSpec(f"Changepoints must be positive and increasing, got {self.changepoints}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidSpec(f"Seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def beta(self) -> BetaFunction:
        return BetaFunction.from_levels(
            self.changepoints, self.log_hazard_ratios, scale="original"
        )

    def rates(self, group: int) -> np.ndarray:
        """Hazard of `group` on each segment"""
        return self.baseline_hazard * np.exp(group * np.asarray(self.log_hazard_ratios))

    def with_seed(self, seed: int) -> "SimSpec":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "baseline_hazard": self.baseline_hazard,
            "beta": {
                "changepoints": list(self.changepoints),
                "values": list(self.log_hazard_ratios),
            },
            "censoring": self.censoring.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, spec: dict) -> "SimSpec":
        """
        Reads the JSON layout

            {"n": 435, "baseline_hazard": 0.045,
             "beta": {"changepoints": [8.5], "values": [-2.08, 0.05]},
             "censoring": {"kind": "uniform", "max": 28.0},
             "seed": 7}

        `beta` may also be a single number for proportional hazards.
        """
        if not isinstance(spec, dict):
            raise InvalidSpec("Simulation spec must be a JSON object")
        unknown = set(spec) - {"n", "baseline_hazard", "beta", "censoring", "seed"}
        if unknown:
            raise InvalidSpec(f"Unknown spec keys: {sorted(unknown)}")
        if "n" not in spec:
            raise InvalidSpec("Simulation spec needs 'n', subjects per arm")
        try:
            beta = spec.get("beta", 0.0)
            if isinstance(beta, dict):
                changepoints = tuple(float(x) for x in beta.get("changepoints", []))
                values = tuple(float(x) for x in beta.get("values", [0.0]))
            else:
                changepoints, values = (), (float(beta),)
            censoring = spec.get("censoring", {"kind": "none"})
            if isinstance(censoring, str):
                censoring = {"kind": censoring}
            kind = censoring.get("kind", "none")
            value = censoring.get("max", censoring.get("rate", 0.0))
            return cls(
                n=int(spec["n"]),
                baseline_hazard=float(spec.get("baseline_hazard", 1.0)),
                changepoints=changepoints,
                log_hazard_ratios=values,
                censoring=Censoring(kind, float(value)),
                seed=int(spec.get("seed", 0)),
            )
        except (AttributeError, TypeError, ValueError) as err:
            if isinstance(err, InvalidSpec):
                raise
            raise InvalidSpec(f"Invalid simulation spec: {err}") from err

    @classmethod
    def from_json(cls, text: str) -> "SimSpec":
        """Parses JSON text; json.JSONDecodeError carries line and column"""
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SimSpec":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def inverse_cumulative_hazard(
    e: np.ndarray, changepoints: Sequence[float], rates: Sequence[float]
) -> np.ndarray:
    """
    Times at which a piecewise-constant hazard accumulates `e`.

    With e ~ Exp(1) this samples the piecewise exponential distribution.
    """
    breaks = np.concatenate([[0.0], np.asarray(changepoints, dtype=float)])
    rates = np.asarray(rates, dtype=float)
    cumulative = np.concatenate([[0.0], np.cumsum(rates[:-1] * np.diff(breaks))])
    seg = np.searchsorted(cumulative, e, side="right") - 1
    return breaks[seg] + (e - cumulative[seg]) / rates[seg]


def piecewise_survival(
    t, changepoints: Sequence[float], rates: Sequence[float]
) -> np.ndarray:
    """Analytic survival exp(-H(t)) of a piecewise-constant hazard"""
    t = np.asarray(t, dtype=float)
    breaks = np.concatenate([[0.0], np.asarray(changepoints, dtype=float), [np.inf]])
    exposure = np.clip(t[..., None] - breaks[:-1], 0.0, np.diff(breaks))
    return np.exp(-exposure @ np.asarray(rates, dtype=float))


def gen_nph(spec: SimSpec) -> TrialData:
    """
    Simulates a trial by inverse transform of the cumulative hazard.

    Group 0 fills the first n rows, group 1 the next n. Event times and
    censoring times come from separate substreams of the spec seed, so the
    same spec always gives the same data.
    """
    n = int(spec.n)
    group = np.repeat([0, 1], n)
    e = substream(spec.seed, EVENT_STREAM).standard_exponential(2 * n)
    t_event = np.empty(2 * n)
    for g in (0, 1):
        rows = group == g
        t_event[rows] = inverse_cumulative_hazard(e[rows], spec.changepoints, spec.rates(g))
    t_event = np.maximum(t_event, np.finfo(float).tiny)
    t_censor = spec.censoring.draw(substream(spec.seed, CENSOR_STREAM), 2 * n)
    event = t_event <= t_censor
    return TrialData.from_arrays(np.minimum(t_event, t_censor), event, group)


def uniform_censoring_bound(rate: float, fraction: float) -> float:
    """
    Upper limit c of uniform censoring that censors `fraction` of
    exponential(rate) failure times: (1 - exp(-rate c)) / (rate c) = fraction.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"Censored fraction must lie in (0, 1), got {fraction}")
    if not rate > 0:
        raise ValueError(f"Rate must be positive, got {rate}")

    def excess(x):
        return -np.expm1(-x) / x - fraction

    x = brentq(excess, 1e-12, 1e6 / fraction, xtol=1e-14)
    return float(x / rate)
