"""Risk-set weights and Breslow partial-likelihood fits for a binary group.

Every fit here is one-dimensional: beta(t) = beta0 * b(t) for a known
shape b, possibly restricted to a segment of the unit time grid. Batches
of segments are fitted together, one row of a mask matrix per segment.
"""

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np
import pandas as pd
from scipy.special import expit

from nph2ph.data.survival import TrialData, event_table, risk_set
from nph2ph.data.timescale import TimeScale, build, from_unit
from nph2ph.exceptions import (
    DegenerateShape,
    EmptyRiskSet,
    NoInformativeFailures,
    SegmentTooSmall,
)
from nph2ph.model.beta import BetaFunction, beta_values
from nph2ph.utils.parallel import ordered_map, resolve_jobs

SCORE_TOL = 1e-8
MAX_ITER = 50
MAX_HALVING = 30
BETA_CAP = 10.0
MIN_SEG = 5
# Slack when a split s = j / k is compared with the grid
SPLIT_TOL = 1e-12
# Segments fitted per batch; bounds the (rows, k) work arrays
CHUNK_ROWS = 1024


@dataclass(frozen=True, eq=False)
class RiskTable:
    """Event table restricted to the grid of a TimeScale.

    Arrays are aligned with the grid: `unit[j] = (j + 1) / k`.
    """

    time: np.ndarray
    unit: np.ndarray
    d: np.ndarray
    d1: np.ndarray
    n0: np.ndarray
    n1: np.ndarray

    @property
    def k(self) -> int:
        return self.time.size

    @property
    def informative(self) -> np.ndarray:
        return (self.n0 > 0) & (self.n1 > 0)

    @property
    def log_odds(self) -> np.ndarray:
        """log(n1 / n0), the null log odds of a group-1 failure"""
        with np.errstate(divide="ignore"):
            return np.log(self.n1) - np.log(self.n0)


def risk_table(data: Union[TrialData, RiskTable], ts: Optional[TimeScale] = None):
    """
    Counts at the grid failure times.

    Parameters
    ----------
    data : TrialData or RiskTable
        A RiskTable is returned as it is.
    ts : TimeScale, optional
        Built from `data` when not given.

    Returns
    -------
    RiskTable
    """
    if isinstance(data, RiskTable):
        return data
    if ts is None:
        ts = build(data)
    table = event_table(data)
    keep = np.isin(table.time, ts.times)
    assert keep.sum() == ts.k, "TimeScale does not belong to this data"
    return RiskTable(
        time=table.time[keep],
        unit=ts.units,
        d=table.d[keep],
        d1=table.d1[keep],
        n0=table.n0[keep],
        n1=table.n1[keep],
    )


def prepare(data, ts: Optional[TimeScale] = None):
    """RiskTable and TimeScale of `data`, building the TimeScale when missing"""
    if ts is None and not isinstance(data, RiskTable):
        ts = build(data)
    return risk_table(data, ts), ts


def expectation(table: RiskTable, beta_t) -> np.ndarray:
    """E_beta(Z | t) at every grid point, given beta(t) on the grid"""
    return expit(np.asarray(beta_t) + table.log_odds)


def _beta_at(beta, t):
    return float(beta_values(beta, np.asarray(t, dtype=float)))


def pi_weights(data: TrialData, ts: TimeScale, beta, t: float) -> pd.Series:
    """
    Probabilities exp(beta(t) Z_j) / sum over the risk set at unit time t.

    Parameters
    ----------
    data : TrialData
    ts : TimeScale
    beta : BetaFunction or float
        Evaluated at the unit time t.
    t : float
        Unit time. The risk set is taken at from_unit(ts, t).

    Returns
    -------
    pandas.Series
        Weights indexed by position in `data`, summing to 1.
    """
    idx = risk_set(data, from_unit(ts, t)) if t > 0 else np.arange(data.n)
    if idx.size == 0:
        raise EmptyRiskSet(f"No subject at risk at unit time {t}")
    eta = _beta_at(beta, t) * data.group[idx]
    w = np.exp(eta - eta.max())
    return pd.Series(w / w.sum(), index=idx, name="pi")


class RiskMoments(NamedTuple):
    e: float
    v: float
    observed: float


def moments(data: TrialData, ts: TimeScale, beta, t: float) -> RiskMoments:
    """Conditional mean and variance of Z over the risk set, plus the observed
    group total of the failures at that time"""
    w = pi_weights(data, ts, beta, t)
    e = float(np.sum(data.group[w.index] * w.to_numpy()))
    t_orig = from_unit(ts, t)
    failed = data.event & (data.time == t_orig)
    observed = float(data.group[failed].sum())
    return RiskMoments(e=e, v=e * (1.0 - e), observed=observed)


@dataclass(frozen=True)
class PartialLikFit:
    beta_hat: float
    se: float
    loglik: float
    iterations: int
    converged: bool
    score: float = 0.0
    monotone: bool = False

    @property
    def hazard_ratio(self) -> float:
        return float(np.exp(self.beta_hat))

    def ci95(self) -> tuple:
        half = 1.959963984540054 * self.se
        return float(np.exp(self.beta_hat - half)), float(np.exp(self.beta_hat + half))

    def to_dict(self) -> dict:
        lo, hi = self.ci95()
        return {
            "beta_hat": self.beta_hat,
            "se": self.se,
            "hazard_ratio": self.hazard_ratio,
            "ci95": [lo, hi],
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "monotone": self.monotone,
        }


class _Batch(NamedTuple):
    beta: np.ndarray
    se: np.ndarray
    loglik: np.ndarray
    score: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    monotone: np.ndarray


def _limits(table, b):
    """Score as beta0 goes to +inf and -inf, row by row"""
    d, d1 = table.d, table.d1
    one_if_n1 = (table.n1 > 0).astype(float)
    one_if_no_n0 = (table.n0 == 0).astype(float)
    pos, neg = b > 0, b < 0
    e_up = np.where(pos, one_if_n1, np.where(neg, one_if_no_n0, 0.0))
    e_down = np.where(pos, one_if_no_n0, np.where(neg, one_if_n1, 0.0))
    u_up = np.sum(b * (d1 - d * e_up), axis=1)
    u_down = np.sum(b * (d1 - d * e_down), axis=1)
    return u_up, u_down


def _newton(table: RiskTable, b: np.ndarray, mask: np.ndarray) -> _Batch:
    """
    Newton-Raphson for beta0 in beta(t) = beta0 * b(t), one fit per mask row.

    Parameters
    ----------
    table : RiskTable
    b : numpy.array
        Shape values on the grid, (k,) or (S, k).
    mask : numpy.array of bool
        (S, k). Grid points that enter each fit.

    Returns
    -------
    _Batch
    """
    mask = np.atleast_2d(mask)
    weight = mask.astype(float)
    b = np.broadcast_to(b, mask.shape) * weight
    d, d1 = table.d, table.d1
    offset = table.log_odds
    with np.errstate(divide="ignore"):
        log_n0, log_n1 = np.log(table.n0), np.log(table.n1)

    def evaluate(beta0):
        eta = beta0[:, None] * b
        e = expit(eta + offset)
        u = np.sum(b * (d1 - d * e), axis=1)
        j = np.sum(b ** 2 * d * e * (1.0 - e), axis=1)
        ll = np.sum(weight * (d1 * eta - d * np.logaddexp(log_n0, log_n1 + eta)), axis=1)
        return u, j, ll

    u_up, u_down = _limits(table, b)
    flat = (np.abs(u_up) <= SCORE_TOL) & (np.abs(u_down) <= SCORE_TOL)
    up = (u_up >= -SCORE_TOL) & ~flat
    down = (u_down <= SCORE_TOL) & ~flat & ~up
    monotone = up | down

    beta = np.zeros(mask.shape[0])
    beta[up] = BETA_CAP
    beta[down] = -BETA_CAP
    iterations = np.zeros(mask.shape[0], dtype=int)
    active = ~monotone & ~flat
    u, j, ll = evaluate(beta)

    for it in range(1, MAX_ITER + 1):
        active &= np.abs(u) >= SCORE_TOL
        if not active.any():
            break
        step = np.where(active, u / np.maximum(j, np.finfo(float).tiny), 0.0)
        for _ in range(MAX_HALVING):
            trial = np.clip(beta + step, -BETA_CAP, BETA_CAP)
            u_t, j_t, ll_t = evaluate(trial)
            worse = active & (ll_t < ll)
            if not worse.any():
                break
            step = np.where(worse, step / 2.0, step)
        beta = np.where(active, trial, beta)
        u = np.where(active, u_t, u)
        j = np.where(active, j_t, j)
        ll = np.where(active, ll_t, ll)
        iterations[active] = it

    converged = (np.abs(u) < SCORE_TOL) & ~monotone
    with np.errstate(divide="ignore"):
        se = 1.0 / np.sqrt(j)
    return _Batch(beta, se, ll, u, iterations, converged, monotone)


def _row_fit(batch: _Batch, i: int = 0) -> PartialLikFit:
    return PartialLikFit(
        beta_hat=float(batch.beta[i]),
        se=float(batch.se[i]),
        loglik=float(batch.loglik[i]),
        iterations=int(batch.iterations[i]),
        converged=bool(batch.converged[i]),
        score=float(batch.score[i]),
        monotone=bool(batch.monotone[i]),
    )


def _check_informative(table, mask=None):
    informative = table.informative if mask is None else table.informative & mask
    if not informative.any():
        raise NoInformativeFailures("No failure with both groups at risk")


def _fit(table, b, mask):
    fit = _row_fit(_newton(table, b, mask))
    if fit.monotone:
        warnings.warn(
            f"Monotone partial likelihood, beta capped at {fit.beta_hat:+.0f}"
        )
    return fit


def fit_constant(data, ts: Optional[TimeScale] = None) -> PartialLikFit:
    """
    Cox fit of a constant log hazard ratio, Breslow ties.

    Parameters
    ----------
    data : TrialData or RiskTable
    ts : TimeScale, optional

    Returns
    -------
    PartialLikFit
    """
    table = risk_table(data, ts)
    _check_informative(table)
    return _fit(table, np.ones(table.k), np.ones((1, table.k), dtype=bool))


def shape_values(table: RiskTable, shape) -> np.ndarray:
    """Shape evaluated at the grid, from a callable of unit time or an array"""
    if callable(shape):
        b = beta_values(shape, table.unit)
    else:
        b = np.asarray(shape, dtype=float)
        if b.shape != (table.k,):
            raise ValueError(f"Shape must have {table.k} grid values, got {b.shape}")
    if not np.any(b[table.informative] != 0):
        raise DegenerateShape("Shape vanishes on every informative failure")
    return b


def fit_scaled_shape(data, shape, ts: Optional[TimeScale] = None) -> PartialLikFit:
    """Fits beta0 in beta(t) = beta0 * b(t) for a fixed shape b"""
    table = risk_table(data, ts)
    _check_informative(table)
    b = shape_values(table, shape)
    return _fit(table, b, np.ones((1, table.k), dtype=bool))


def valid_splits(k: int, min_seg: int = MIN_SEG) -> np.ndarray:
    """Grid indices j whose split at s = j / k leaves min_seg points per side.

    The failure at s itself counts as before the split, so j runs over
    min_seg..k - min_seg, i.e. s in [min_seg / k, 1 - min_seg / k].
    """
    return np.arange(min_seg, k - min_seg + 1)


def _segment_masks(table, lower, upper):
    """Row i selects lower[i] < unit <= upper[i]"""
    unit = table.unit[None, :]
    return (unit > np.asarray(lower)[:, None]) & (unit <= np.asarray(upper)[:, None])


def segment_loglik(table: RiskTable, lower, upper, n_jobs: int = 1) -> np.ndarray:
    """Maximised constant-beta log likelihood on each segment (lower, upper]"""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.size == 0:
        return np.array([])
    n_chunks = max(resolve_jobs(n_jobs), int(np.ceil(lower.size / CHUNK_ROWS)))
    chunks = np.array_split(np.arange(lower.size), min(n_chunks, lower.size))

    def run(idx):
        mask = _segment_masks(table, lower[idx], upper[idx])
        return _newton(table, np.ones(table.k), mask).loglik

    return np.concatenate(ordered_map(run, chunks, n_jobs=n_jobs))


class SplitLikelihood(NamedTuple):
    loglik: float
    beta_before: PartialLikFit
    beta_after: PartialLikFit


def loglik_split(
    data, s: float, ts: Optional[TimeScale] = None, min_seg: int = MIN_SEG
) -> SplitLikelihood:
    """
    Log likelihood of separate constant fits before and after unit time s.

    Grid points with unit time <= s are "before", the rest "after".

    Raises
    ------
    SegmentTooSmall
        Either side has fewer than `min_seg` grid failures.
    """
    table = risk_table(data, ts)
    before = table.unit <= s + SPLIT_TOL
    n_before, n_after = int(before.sum()), int((~before).sum())
    if n_before < min_seg or n_after < min_seg:
        raise SegmentTooSmall(
            f"Split at {s} leaves {n_before} and {n_after} failures, "
            f"need {min_seg} on each side"
        )
    _check_informative(table, before)
    _check_informative(table, ~before)
    batch = _newton(table, np.ones(table.k), np.vstack([before, ~before]))
    fit_before, fit_after = _row_fit(batch, 0), _row_fit(batch, 1)
    return SplitLikelihood(fit_before.loglik + fit_after.loglik, fit_before, fit_after)


def split_scan(table: RiskTable, min_seg: int = MIN_SEG, n_jobs: int = 1) -> pd.DataFrame:
    """
    loglik_split at every valid grid split.

    Returns
    -------
    pandas.DataFrame
        Columns s, loglik_before, loglik_after, loglik, ordered by s.
    """
    j = valid_splits(table.k, min_seg)
    if j.size == 0:
        raise SegmentTooSmall(
            f"{table.k} grid failures cannot hold two segments of {min_seg}"
        )
    s = j / table.k
    ll_before = segment_loglik(table, np.zeros(s.size), s, n_jobs=n_jobs)
    ll_after = segment_loglik(table, s, np.full(s.size, np.inf), n_jobs=n_jobs)
    return pd.DataFrame(
        {
            "s": s,
            "loglik_before": ll_before,
            "loglik_after": ll_after,
            "loglik": ll_before + ll_after,
        }
    )
