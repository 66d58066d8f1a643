"""Brute-force Monte Carlo checks for the closed-form results.

Every oracle splits its work into blocks with their own substream of the
master seed and adds the block results up in block order, so the answer
does not depend on the number of workers.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from nph2ph.data.timescale import TimeScale, build
from nph2ph.exceptions import DegenerateShape, NoInformativeFailures
from nph2ph.model.beta import BetaFunction
from nph2ph.model.predict import r2
from nph2ph.model.process import BAND_LEVELS, EPS, band, bridge, effect_path
from nph2ph.model.score import fit_scaled_shape, prepare
from nph2ph.simulation.generator import (
    Censoring,
    SimSpec,
    gen_nph,
    inverse_cumulative_hazard,
    uniform_censoring_bound,
)
from nph2ph.utils.parallel import ordered_map
from nph2ph.utils.random import replicate_seed, substream

KAPPA_BLOCK = 100_000
MIN_PAIRS = 10_000
BRIDGE_BLOCK = 10_000
BRIDGE_GRID = 10_000
MIN_NULL_REPLICATES = 500
NULL_CENSORED = 0.2


@dataclass(frozen=True)
class McResult:
    estimate: float
    se: float
    replicates: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "se": self.se,
            "replicates": self.replicates,
            "seed": self.seed,
        }


def _proportion(hits: int, replicates: int, seed: int) -> McResult:
    p = hits / replicates
    return McResult(float(p), float(np.sqrt(p * (1.0 - p) / replicates)), replicates, seed)


def _blocks(total: int, size: int):
    starts = range(0, total, size)
    return [(b, min(size, total - start)) for b, start in enumerate(starts)]


def replicate_specs(spec: SimSpec, replicates: int, seed: int) -> Iterator[SimSpec]:
    """The spec with one derived seed per replicate"""
    for r in range(replicates):
        yield spec.with_seed(replicate_seed(seed, r))


def mc_kappa(
    beta_spec: Union[float, Sequence[float]],
    pairs: int = 1_000_000,
    seed: int = 0,
    n_jobs: int = 1,
) -> McResult:
    """
    Fraction of independent pairs with T_1 > T_0.

    Parameters
    ----------
    beta_spec : float or (tau_e, beta1, beta2)
        Log hazard ratio of group 1, constant or switching at tau_e on the
        unit-exponential time scale of group 0.
    pairs : int
        At least 10^4.
    seed : int
    n_jobs : int

    Returns
    -------
    McResult
    """
    if pairs < MIN_PAIRS:
        raise ValueError(f"Need at least {MIN_PAIRS} pairs, got {pairs}")
    if np.ndim(beta_spec) == 0:
        changepoints, log_hr = (), (float(beta_spec),)
    else:
        tau_e, beta1, beta2 = (float(x) for x in beta_spec)
        changepoints, log_hr = (tau_e,), (beta1, beta2)
    rates = np.exp(np.asarray(log_hr))

    def run(block):
        index, size = block
        rng = substream(seed, index)
        t0 = rng.standard_exponential(size)
        t1 = inverse_cumulative_hazard(rng.standard_exponential(size), changepoints, rates)
        return int(np.sum(t1 > t0))

    hits = ordered_map(run, _blocks(pairs, KAPPA_BLOCK), n_jobs=n_jobs)
    return _proportion(sum(hits), pairs, seed)


def mc_bridge_exceed(
    a: float,
    eps1: float = EPS[0],
    eps2: float = EPS[1],
    replicates: int = 100_000,
    grid: int = BRIDGE_GRID,
    seed: int = 0,
    n_jobs: int = 1,
) -> McResult:
    """
    P(sup |B(t)| / sqrt(t (1 - t)) >= a) over [eps1, eps2] for a Brownian
    bridge B, by simulation.

    In s = log(t / (1 - t)) / 2 the standardized bridge is a stationary
    Ornstein-Uhlenbeck process with correlation exp(-|s - s'|), so it is
    sampled exactly on `grid` points evenly spaced in s.
    """
    s_lo = 0.5 * np.log(eps1 / (1.0 - eps1))
    s_hi = 0.5 * np.log(eps2 / (1.0 - eps2))
    rho = np.exp(-(s_hi - s_lo) / (grid - 1))
    innovation = np.sqrt(1.0 - rho ** 2)

    def run(block):
        index, size = block
        rng = substream(seed, index)
        x = rng.standard_normal(size)
        hit = np.abs(x) >= a
        for _ in range(grid - 1):
            x = rho * x + innovation * rng.standard_normal(size)
            hit |= np.abs(x) >= a
        return int(hit.sum())

    hits = ordered_map(run, _blocks(replicates, BRIDGE_BLOCK), n_jobs=n_jobs)
    return _proportion(sum(hits), replicates, seed)


def null_spec(n: int, censored: float = NULL_CENSORED) -> SimSpec:
    """n subjects in total, no treatment effect, uniform censoring of the
    given share under a unit baseline hazard"""
    censoring = Censoring("uniform", uniform_censoring_bound(1.0, censored))
    return SimSpec(n=n // 2, baseline_hazard=1.0, censoring=censoring)


@dataclass(frozen=True, eq=False)
class BridgeCalibration:
    table: pd.DataFrame
    u1_variance: float
    replicates: int
    seed: int

    def to_frame(self) -> pd.DataFrame:
        return self.table


def mc_bridge_null(
    n: int,
    replicates: int = 2000,
    seed: int = 0,
    levels: Sequence[float] = BAND_LEVELS,
    eps: Tuple[float, float] = EPS,
    spec: Optional[SimSpec] = None,
    n_jobs: int = 1,
) -> BridgeCalibration:
    """
    Band exceedance rates of the bridged process on null trials.

    Each replicate simulates `n` subjects in total (n/2 per arm) under
    beta = 0 with 20% uniform censoring, and builds the process at the
    true beta = 0.

    Returns
    -------
    BridgeCalibration
        Per band: level, threshold, exceedance rate and its standard error;
        plus the sample variance of U(1) across replicates.
    """
    if replicates < MIN_NULL_REPLICATES:
        raise ValueError(f"Need at least {MIN_NULL_REPLICATES} replicates, got {replicates}")
    base = null_spec(n) if spec is None else spec

    def run(r):
        data = gen_nph(base.with_seed(replicate_seed(seed, r)))
        try:
            path = effect_path(data, build(data), 0.0)
        except NoInformativeFailures:
            return np.nan, np.nan, np.nan
        tied = bridge(path, *eps)
        return tied.sup_raw, tied.sup_std, path.values[-1]

    chunks = np.array_split(np.arange(replicates), max(1, replicates // 100))
    results = ordered_map(lambda idx: [run(r) for r in idx], chunks, n_jobs=n_jobs)
    values = np.array([row for chunk in results for row in chunk])
    values = values[~np.isnan(values).any(axis=1)]
    m = len(values)

    rows = []
    for standardized in (False, True):
        sups = values[:, 1] if standardized else values[:, 0]
        for level in levels:
            spec_band = band(level, standardized, *eps)
            rate = float(np.mean(sups > spec_band.threshold))
            rows.append(
                {
                    "band": spec_band.name,
                    "level": level,
                    "standardized": standardized,
                    "threshold": spec_band.threshold,
                    "exceed_rate": rate,
                    "se": float(np.sqrt(rate * (1.0 - rate) / m)),
                }
            )
    return BridgeCalibration(
        table=pd.DataFrame(rows),
        u1_variance=float(np.var(values[:, 2], ddof=1)),
        replicates=m,
        seed=seed,
    )


@dataclass(frozen=True)
class CandidateSet:
    """Finite class of beta(t) shapes, by name"""

    shapes: Dict[str, BetaFunction]

    def __post_init__(self):
        if not self.shapes:
            raise ValueError("A candidate set needs at least one shape")

    def __len__(self):
        return len(self.shapes)

    def items(self):
        return sorted(self.shapes.items())


def default_candidates() -> CandidateSet:
    """
    50 shapes on the unit scale: the constant, 45 steps (changepoint at
    0.1..0.9 times ratio -1, -0.5, 0, 0.5, 2) and 4 smooth trends.
    """
    shapes = {"const": BetaFunction.constant(1.0)}
    for tau in np.round(np.arange(1, 10) / 10, 1):
        for ratio in (-1.0, -0.5, 0.0, 0.5, 2.0):
            shapes[f"step_{tau:.1f}_{ratio:+.1f}"] = BetaFunction.piecewise(1.0, (tau,), (ratio,))
    shapes["ramp_up"] = BetaFunction.polynomial((0.0, 1.0 / 3.0))
    shapes["ramp_down"] = BetaFunction.polynomial((1.0, -1.0 / 3.0))
    shapes["square_up"] = BetaFunction.polynomial((0.2, 0.0, 2.0 / 15.0))
    shapes["square_down"] = BetaFunction.polynomial((1.2, -2.0 / 3.0, 2.0 / 15.0))
    return CandidateSet(shapes)


def brute_r2_argmax(
    data, ts: Optional[TimeScale], candidates: CandidateSet, n_jobs: int = 1
) -> Tuple[str, pd.DataFrame]:
    """
    R2 of every candidate shape after refitting its scale.

    Returns
    -------
    best : str
        Name of the candidate with the largest R2; ties go to the first
        name in sorted order.
    table : pandas.DataFrame
        Columns name, beta0, r2, converged, sorted by name.
    """
    table, ts = prepare(data, ts)

    def evaluate(item):
        name, shape = item
        try:
            fit = fit_scaled_shape(table, shape)
        except DegenerateShape:
            return name, np.nan, np.nan, False
        return name, fit.beta_hat, r2(table, ts, shape.scaled(fit.beta_hat)), fit.converged

    rows = ordered_map(evaluate, candidates.items(), n_jobs=n_jobs)
    frame = pd.DataFrame(rows, columns=["name", "beta0", "r2", "converged"])
    frame = frame.sort_values("name", kind="mergesort").reset_index(drop=True)
    best = str(frame.loc[frame["r2"].idxmax(), "name"])
    return best, frame


def brute_l2_argmin(
    truth: np.ndarray, units: np.ndarray, candidates: CandidateSet
) -> Tuple[str, pd.DataFrame]:
    """
    Candidate closest in L2 to the true beta(t), each shape at its best scale.

    Parameters
    ----------
    truth : numpy.array
        True log hazard ratio at the unit times `units`.
    units : numpy.array
    candidates : CandidateSet
    """
    rows = []
    for name, shape in candidates.items():
        b = shape(units)
        scale = float(truth @ b / (b @ b)) if np.any(b != 0) else 0.0
        rows.append((name, scale, float(np.sqrt(np.mean((truth - scale * b) ** 2)))))
    frame = pd.DataFrame(rows, columns=["name", "scale", "l2"])
    best = str(frame.loc[frame["l2"].idxmin(), "name"])
    return best, frame


def true_beta_on_grid(spec: SimSpec, ts: TimeScale) -> np.ndarray:
    """Generating beta at the grid failure times, i.e. at ts.units"""
    return spec.beta(ts.times)
