import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import bisect
from scipy.special import kolmogorov
from scipy.stats import norm

from nph2ph.data.timescale import TimeScale
from nph2ph.model.beta import BetaFunction, beta_values
from nph2ph.model.score import expectation, risk_table
from nph2ph.utils.format_list import to_list

EPS = (0.05, 0.95)
BAND_LEVELS = (0.90, 0.999)
KOLMOGOROV_TERMS = 10
# Below this the alternating series converges slowly; scipy is exact there
SERIES_MIN_A = 0.5
BAND_XTOL = 1e-12


@dataclass(frozen=True, eq=False)
class EffectPath:
    """Treatment-effect process on the grid t_j = j / k, j = 0..k.

    Linear interpolation between grid points.
    """

    t: np.ndarray
    values: np.ndarray
    beta: BetaFunction

    @property
    def k(self) -> int:
        return self.t.size - 1

    def __call__(self, t):
        out = np.interp(t, self.t, self.values)
        return float(out) if np.ndim(t) == 0 else out

    def grid_index(self, tau: float) -> int:
        """Index of the grid point tau = j / k, for interior tau"""
        j = int(round(tau * self.k))
        if abs(j - tau * self.k) > 1e-9 or not 0 < j < self.k:
            raise ValueError(f"{tau} is not an interior grid point of a {self.k}-point grid")
        return j


def _check_eps(eps1, eps2):
    if not 0 < eps1 < eps2 < 1:
        raise ValueError(f"Need 0 < eps1 < eps2 < 1, got ({eps1}, {eps2})")


def effect_path(data, ts: Optional[TimeScale], beta) -> EffectPath:
    """
    Standardized cumulative sum of Schoenfeld-type residuals on the grid.

    The increment at a grid point with d tied failures is
    (d1 - d e) / sqrt(d v), where e and v = e (1 - e) are the risk-set
    mean and variance of Z under beta, and the sum is scaled by k^(-1/2).

    Parameters
    ----------
    data : TrialData or RiskTable
    ts : TimeScale, optional
    beta : BetaFunction or float
        Log hazard ratio on the unit scale.

    Returns
    -------
    EffectPath
    """
    table = risk_table(data, ts)
    if not isinstance(beta, BetaFunction):
        beta = BetaFunction.constant(float(beta))
    e = expectation(table, beta_values(beta, table.unit))
    v = e * (1.0 - e)
    with np.errstate(divide="ignore", invalid="ignore"):
        increment = (table.d1 - table.d * e) / np.sqrt(table.d * v)
    uninformative = v <= 0
    if uninformative.any():
        warnings.warn(f"{uninformative.sum()} grid points with zero variance add nothing")
        increment[uninformative] = 0.0
    values = np.concatenate([[0.0], np.cumsum(increment)]) / np.sqrt(table.k)
    t = np.arange(table.k + 1) / table.k
    return EffectPath(t=t, values=values, beta=beta)


@dataclass(frozen=True, eq=False)
class BridgePath:
    t: np.ndarray
    values: np.ndarray
    standardized: np.ndarray
    sup_raw: float
    sup_std: float
    eps1: float
    eps2: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"t": self.t, "u_bridge": self.values, "u_bridge_std": self.standardized}
        )


def bridge(path: EffectPath, eps1: float = EPS[0], eps2: float = EPS[1]) -> BridgePath:
    """
    Tied-down process U(t) - t U(1), and its standardization by
    sqrt(t (1 - t)) on [eps1, eps2]. Standardized values outside that
    window are NaN.
    """
    _check_eps(eps1, eps2)
    t = path.t
    values = path.values - t * path.values[-1]
    values[0] = 0.0
    values[-1] = 0.0
    inside = (t >= eps1) & (t <= eps2)
    standardized = np.full(t.shape, np.nan)
    standardized[inside] = values[inside] / np.sqrt(t[inside] * (1.0 - t[inside]))
    sup_std = float(np.max(np.abs(standardized[inside]))) if inside.any() else 0.0
    return BridgePath(
        t=t,
        values=values,
        standardized=standardized,
        sup_raw=float(np.max(np.abs(values))),
        sup_std=sup_std,
        eps1=eps1,
        eps2=eps2,
    )


def kolmogorov_exceed(a: float, terms: int = KOLMOGOROV_TERMS) -> float:
    """
    P(sup |B| >= a) for a Brownian bridge B, the Kolmogorov series

        2 sum_{k>=1} (-1)^(k+1) exp(-2 k^2 a^2)

    truncated at `terms`. Below a = SERIES_MIN_A the series converges too
    slowly to truncate, so `terms` is ignored and scipy's exact
    `kolmogorov(a)` is returned instead.
    """
    if a <= 0:
        return 1.0
    if a < SERIES_MIN_A:
        return float(kolmogorov(a))
    k = np.arange(1, terms + 1)
    p = 2.0 * np.sum((-1.0) ** (k + 1) * np.exp(-2.0 * k ** 2 * a ** 2))
    return float(np.clip(p, 0.0, 1.0))


def ms_exceed(a: float, eps1: float = EPS[0], eps2: float = EPS[1]) -> float:
    """
    Miller-Siegmund approximation of P(sup |B(t)| / sqrt(t (1 - t)) >= a)
    over t in [eps1, eps2]:

        4 phi(a) / a + phi(a) (a - 1/a) log{eps2 (1 - eps1) / (eps1 (1 - eps2))}

    Only meaningful for a > 1; smaller thresholds return 1.
    """
    _check_eps(eps1, eps2)
    if a <= 1:
        return 1.0
    phi = norm.pdf(a)
    log_ratio = np.log(eps2 * (1.0 - eps1) / (eps1 * (1.0 - eps2)))
    p = 4.0 * phi / a + phi * (a - 1.0 / a) * log_ratio
    return float(np.clip(p, 0.0, 1.0))


@dataclass(frozen=True)
class BandSpec:
    level: float
    standardized: bool
    threshold: float
    eps1: float = EPS[0]
    eps2: float = EPS[1]

    @property
    def name(self) -> str:
        kind = "std" if self.standardized else "raw"
        return f"{kind}_{self.level * 100:g}"

    def upper(self, t):
        """Upper band curve; NaN outside [eps1, eps2] for standardized bands"""
        t = np.asarray(t, dtype=float)
        if not self.standardized:
            return np.full(t.shape, self.threshold)
        inside = (t >= self.eps1) & (t <= self.eps2)
        out = np.full(t.shape, np.nan)
        out[inside] = self.threshold * np.sqrt(t[inside] * (1.0 - t[inside]))
        return out

    def lower(self, t):
        return -self.upper(t)

    def tail(self, a: float) -> float:
        if self.standardized:
            return ms_exceed(a, self.eps1, self.eps2)
        return kolmogorov_exceed(a)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "level": self.level,
            "standardized": self.standardized,
            "threshold": self.threshold,
            "eps": [self.eps1, self.eps2],
        }


def band(
    level: float, standardized: bool = False, eps1: float = EPS[0], eps2: float = EPS[1]
) -> BandSpec:
    """
    Confidence band for the bridged process.

    Raw bands are the constants +-a with kolmogorov_exceed(a) = 1 - level.
    Standardized bands are +-a sqrt(t (1 - t)) on [eps1, eps2], with
    ms_exceed(a, eps1, eps2) = 1 - level. The root is found by bisection.
    """
    if not 0 < level < 1:
        raise ValueError(f"Band level must lie in (0, 1), got {level}")
    _check_eps(eps1, eps2)
    target = 1.0 - level

    def excess(a):
        if standardized:
            return ms_exceed(a, eps1, eps2) - target
        return kolmogorov_exceed(a) - target

    lo = 1.0 if standardized else 1e-6
    threshold = bisect(excess, lo, 50.0, xtol=BAND_XTOL, maxiter=500)
    return BandSpec(level, standardized, float(threshold), eps1, eps2)


def default_bands(
    levels: Sequence[float] = BAND_LEVELS, eps1: float = EPS[0], eps2: float = EPS[1]
) -> List[BandSpec]:
    """Raw and standardized band at each level"""
    return [
        band(level, standardized, eps1, eps2)
        for standardized in (False, True)
        for level in levels
    ]


@dataclass(frozen=True)
class BandCheck:
    band: BandSpec
    exceeded: bool
    first_exceedance: Optional[float]
    tail_probability: float

    def to_dict(self) -> dict:
        out = self.band.to_dict()
        out.update(
            {
                "exceeded": self.exceeded,
                "first_exceedance": self.first_exceedance,
                "tail_probability": self.tail_probability,
            }
        )
        return out


@dataclass(frozen=True, eq=False)
class Diagnostic:
    bridge: BridgePath
    checks: List[BandCheck] = field(default_factory=list)

    @property
    def sup_raw(self) -> float:
        return self.bridge.sup_raw

    @property
    def sup_std(self) -> float:
        return self.bridge.sup_std

    @property
    def exceeded(self) -> bool:
        return any(check.exceeded for check in self.checks)

    def to_dict(self) -> dict:
        return {
            "sup_raw": self.sup_raw,
            "sup_std": self.sup_std,
            "eps": [self.bridge.eps1, self.bridge.eps2],
            "bands": [check.to_dict() for check in self.checks],
        }


def fit_diagnostic(path: EffectPath, bands) -> Diagnostic:
    """
    Checks the bridged process against each band.

    Parameters
    ----------
    path : EffectPath
    bands : BandSpec or list of BandSpec

    Returns
    -------
    Diagnostic
        Per band: whether the bridge leaves it, the first grid time where
        it does, and the tail probability of the observed sup.
    """
    bands = to_list(bands)
    eps = (bands[0].eps1, bands[0].eps2) if bands else EPS
    summary = bridge(path, *eps)
    checks = []
    for spec in bands:
        tied = summary if (spec.eps1, spec.eps2) == eps else bridge(path, spec.eps1, spec.eps2)
        if spec.standardized:
            stat, sup = np.abs(tied.standardized), tied.sup_std
        else:
            stat, sup = np.abs(tied.values), tied.sup_raw
        over = np.nan_to_num(stat, nan=0.0) > spec.threshold
        first = float(tied.t[np.argmax(over)]) if over.any() else None
        checks.append(BandCheck(spec, bool(over.any()), first, spec.tail(sup)))
    return Diagnostic(summary, checks)


def path_frame(path: EffectPath, diagnostic: Diagnostic) -> pd.DataFrame:
    """Plot series: path, bridge, standardized bridge and band curves"""
    frame = pd.DataFrame({"t": path.t, "u_star": path.values})
    frame["u_bridge"] = diagnostic.bridge.values
    frame["u_bridge_std"] = diagnostic.bridge.standardized
    for check in diagnostic.checks:
        frame[f"band_lo_{check.band.name}"] = check.band.lower(path.t)
        frame[f"band_hi_{check.band.name}"] = check.band.upper(path.t)
    return frame
