"""Re-expression of non-proportional hazards as proportional hazards.

A piecewise (or smoothly varying) log hazard ratio is the same model as a
constant one applied to a rescaled, time-dependent group indicator. The
shape comes from the drift of the treatment-effect process under
beta = 0; the scale from the partial likelihood.
"""

import warnings
from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from nph2ph.data.timescale import TimeScale, from_unit
from nph2ph.exceptions import DegenerateShape, SegmentTooSmall, UndefinedRatio
from nph2ph.model.beta import BetaFunction
from nph2ph.model.legendre import MAX_ORDER, legendre_all
from nph2ph.model.predict import r2
from nph2ph.model.process import EffectPath, effect_path
from nph2ph.model.score import (
    MIN_SEG,
    PartialLikFit,
    RiskTable,
    fit_constant,
    fit_scaled_shape,
    prepare,
    risk_table,
    segment_loglik,
    split_scan,
    valid_splits,
)

D2MAX = 64.0
LEGENDRE_ORDER = 4
CURVATURE_GRID = 1024
# Shrunk curvature lands just inside d2max
SHRINK_MARGIN = 1e-12


class EulerSlopes(NamedTuple):
    slope_before: float
    slope_after: float
    ratio: float


@dataclass(frozen=True)
class ChangepointFit:
    tau: float
    tau_original: float
    slope_before: float
    slope_after: float
    ratio: float
    beta0: float
    beta: BetaFunction
    fit: PartialLikFit
    r2: float
    loglik: float
    loglik_gain: float
    # R2 of the best single-changepoint model, kept next to a two-changepoint fit
    r2_single: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "tau_original": self.tau_original,
            "slope_before": self.slope_before,
            "slope_after": self.slope_after,
            "ratio": self.ratio,
            "beta0": self.beta0,
            "beta": self.beta.to_dict(),
            "hazard_ratios": [float(np.exp(level)) for level in self.beta.levels],
            "fit": self.fit.to_dict(),
            "r2": self.r2,
            "loglik": self.loglik,
            "loglik_gain": self.loglik_gain,
            "r2_single": self.r2_single,
        }


def chord_slopes(path: EffectPath, taus) -> List[float]:
    """Slopes of the chords of the process between 0, taus and 1"""
    bounds = (0.0,) + tuple(taus) + (1.0,)
    idx = [0] + [path.grid_index(tau) for tau in taus] + [path.k]
    return [
        float((path.values[idx[i + 1]] - path.values[idx[i]]) / (bounds[i + 1] - bounds[i]))
        for i in range(len(bounds) - 1)
    ]


def euler_slopes(path: EffectPath, tau: float) -> EulerSlopes:
    """
    Chord slopes of the process before and after tau.

    slope_before = U(tau) / tau, slope_after = (U(1) - U(tau)) / (1 - tau).
    The ratio is NaN when slope_before is zero.
    """
    before, after = chord_slopes(path, (tau,))
    ratio = after / before if before != 0 else np.nan
    return EulerSlopes(before, after, float(ratio))


def piecewise_path(path: EffectPath, taus) -> np.ndarray:
    """Piecewise linear interpolation of the process through 0, taus and 1.

    `taus` is one changepoint or an increasing sequence of them.
    """
    taus = tuple(np.atleast_1d(np.asarray(taus, dtype=float)))
    knots = np.array((0.0,) + taus + (1.0,))
    idx = [0] + [path.grid_index(tau) for tau in taus] + [path.k]
    return np.interp(path.t, knots, path.values[idx])


def zp_covariate(z, tau: float, ratio: float, t):
    """Group indicator rescaled by the slope ratio from tau on"""
    if not np.isfinite(ratio):
        raise UndefinedRatio(f"Slope ratio must be finite, got {ratio}")
    z = np.asarray(z, dtype=float)
    out = np.where(np.asarray(t) < tau, z, ratio * z)
    return float(out) if np.ndim(out) == 0 else out


def fit_piecewise(
    data, ts: Optional[TimeScale], tau: float, ratio: float
) -> Tuple[BetaFunction, PartialLikFit]:
    """
    Scale of the shape I{t<tau} + ratio I{t>=tau} by partial likelihood.

    Returns
    -------
    beta : BetaFunction
        beta0_hat * (I{t<tau} + ratio I{t>=tau})
    fit : PartialLikFit
    """
    if not np.isfinite(ratio):
        raise UndefinedRatio(f"Slope ratio must be finite, got {ratio}")
    shape = BetaFunction.piecewise(1.0, (tau,), (ratio,))
    fit = fit_scaled_shape(data, shape, ts)
    return BetaFunction.piecewise(fit.beta_hat, (tau,), (ratio,)), fit


def _finish(table, ts, drift, taus, best_loglik):
    """Slopes, scale fit and metrics for changepoints taus"""
    if len(taus) == 1:
        slopes = euler_slopes(drift, taus[0])
        if not np.isfinite(slopes.ratio):
            raise UndefinedRatio("Process is flat before the changepoint")
        beta, fit = fit_piecewise(table, ts, taus[0], slopes.ratio)
        slopes = [slopes.slope_before, slopes.slope_after]
    else:
        slopes = chord_slopes(drift, taus)
        if slopes[0] == 0:
            raise UndefinedRatio("Process is flat before the first changepoint")
        shape = BetaFunction.piecewise(1.0, taus, [s / slopes[0] for s in slopes[1:]])
        fit = fit_scaled_shape(table, shape)
        beta = shape.scaled(fit.beta_hat)
    explained = r2(table, ts, beta)
    gain = best_loglik - fit_constant(table).loglik

    fits = []
    for i, tau in enumerate(taus):
        before, after = slopes[i], slopes[i + 1]
        fits.append(
            ChangepointFit(
                tau=float(tau),
                tau_original=float(from_unit(ts, tau)) if ts is not None else float("nan"),
                slope_before=float(before),
                slope_after=float(after),
                ratio=float(after / before) if before != 0 else float("nan"),
                beta0=fit.beta_hat,
                beta=beta,
                fit=fit,
                r2=explained,
                loglik=float(best_loglik),
                loglik_gain=float(gain),
            )
        )
    return fits


def find_changepoint(
    data, ts: Optional[TimeScale], min_seg: int = MIN_SEG, n_jobs: int = 1
) -> ChangepointFit:
    """
    Single changepoint by maximising the split log likelihood over the grid.

    Parameters
    ----------
    data : TrialData or RiskTable
    ts : TimeScale
        Needed to map tau back to study time.
    min_seg : int, default 5
        Minimum grid failures on either side.
    n_jobs : int, default 1

    Returns
    -------
    ChangepointFit
    """
    table, ts = prepare(data, ts)
    if table.k < 2 * min_seg:
        raise SegmentTooSmall(
            f"{table.k} grid failures, need {2 * min_seg} for a changepoint"
        )
    scan = split_scan(table, min_seg, n_jobs=n_jobs)
    best = int(np.argmax(scan["loglik"].to_numpy()))
    tau = float(scan["s"].iloc[best])
    drift = effect_path(table, ts, 0.0)
    fit = _finish(table, ts, drift, (tau,), scan["loglik"].iloc[best])[0]
    return replace(fit, r2_single=fit.r2)


def _pair_scan(table: RiskTable, min_seg: int, n_jobs: int):
    """Best (s1, s2) for three constant segments; ties go to the smaller pair"""
    k = table.k
    first = valid_splits(k, min_seg)
    splits = first / k
    pairs = [
        (j1, j2)
        for j1 in first
        for j2 in range(j1 + min_seg, k - min_seg + 1)
    ]
    if not pairs:
        raise SegmentTooSmall(
            f"{k} grid failures cannot hold three segments of {min_seg}"
        )
    head = dict(zip(first, segment_loglik(table, np.zeros(first.size), splits, n_jobs)))
    tail = dict(
        zip(first, segment_loglik(table, splits, np.full(first.size, np.inf), n_jobs))
    )
    j1s = np.array([p[0] for p in pairs])
    j2s = np.array([p[1] for p in pairs])
    middle = segment_loglik(table, j1s / k, j2s / k, n_jobs)
    total = np.array([head[a] for a in j1s]) + middle + np.array([tail[b] for b in j2s])
    best = int(np.argmax(total))
    return (j1s[best] / k, j2s[best] / k), float(total[best])


def multi_changepoint(
    data, ts: Optional[TimeScale], k: int = 1, min_seg: int = MIN_SEG, n_jobs: int = 1
) -> List[ChangepointFit]:
    """
    One or two changepoints. With two, every ordered pair of grid splits
    leaving min_seg failures per segment is scanned, and the slopes of the
    three chords give the shape.

    Returns
    -------
    list of ChangepointFit
        One entry per changepoint, sharing beta, fit, r2 and loglik_gain.
        r2_single holds the R2 of the best single changepoint for comparison.
    """
    if k not in (1, 2):
        raise ValueError(f"Only 1 or 2 changepoints are supported, got {k}")
    if k == 1:
        return [find_changepoint(data, ts, min_seg, n_jobs)]
    table, ts = prepare(data, ts)
    if table.k < 3 * min_seg:
        raise SegmentTooSmall(
            f"{table.k} grid failures, need {3 * min_seg} for two changepoints"
        )
    taus, best_loglik = _pair_scan(table, min_seg, n_jobs)
    drift = effect_path(table, ts, 0.0)
    single = find_changepoint(table, ts, min_seg, n_jobs)
    return [
        replace(fit, r2_single=single.r2)
        for fit in _finish(table, ts, drift, taus, best_loglik)
    ]


@dataclass(frozen=True, eq=False)
class LegendreFit:
    order: int
    coefficients: Tuple[float, ...]
    d2max: float
    rss: float
    t: np.ndarray
    fitted: np.ndarray
    shrunk: bool = False
    r2: float = float("nan")

    def curvature(self, points: int = CURVATURE_GRID) -> float:
        """max |second derivative| of the fitted path on [0, 1]"""
        grid = np.linspace(0.0, 1.0, points)
        _, _, d2p = legendre_all(self.order, grid)
        return float(np.max(np.abs(np.asarray(self.coefficients) @ d2p[1:])))

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "coefficients": list(self.coefficients),
            "d2max": self.d2max,
            "shrunk": self.shrunk,
            "rss": self.rss,
            "r2": self.r2,
        }


def fit_legendre(path: EffectPath, order: int = LEGENDRE_ORDER, d2max: float = D2MAX) -> LegendreFit:
    """
    Least-squares fit of sum_k c_k (P_k(t) - P_k(0)), k = 1..order, to the path.

    When the fitted curve bends harder than d2max somewhere on [0, 1], the
    coefficients of order >= 2 are scaled down together until it does not,
    and c_1 is refitted with them held fixed.
    """
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"Legendre order must lie in 1..{MAX_ORDER}, got {order}")
    if order >= path.k:
        raise ValueError(f"Legendre order {order} needs more than {path.k} grid points")
    t, y = path.t, path.values
    p, _, _ = legendre_all(order, t)
    p0, _, _ = legendre_all(order, 0.0)
    design = (p[1:] - p0[1:, None]).T
    norms = np.linalg.norm(design, axis=0)
    coef, *_ = np.linalg.lstsq(design / norms, y, rcond=None)
    coef = coef / norms

    grid = np.linspace(0.0, 1.0, CURVATURE_GRID)
    _, _, d2p = legendre_all(order, grid)
    curvature = float(np.max(np.abs(coef @ d2p[1:])))
    shrunk = curvature > d2max
    if shrunk:
        gamma = d2max / curvature * (1.0 - SHRINK_MARGIN)
        coef[1:] *= gamma
        residual = y - design[:, 1:] @ coef[1:]
        coef[0] = design[:, 0] @ residual / (design[:, 0] @ design[:, 0])
        warnings.warn(
            f"Legendre fit curvature {curvature:.1f} above {d2max}, "
            f"higher orders scaled by {gamma:.3f}"
        )
    fitted = design @ coef
    return LegendreFit(
        order=order,
        coefficients=tuple(float(c) for c in coef),
        d2max=d2max,
        rss=float(np.sum((y - fitted) ** 2)),
        t=t,
        fitted=fitted,
        shrunk=shrunk,
    )


def beta_from_legendre(
    fit: LegendreFit, data, ts: Optional[TimeScale]
) -> Tuple[BetaFunction, PartialLikFit]:
    """
    Log hazard ratio shaped like the derivative of the fitted path.

    The shape b(t) = sum_k c_k dP_k/dt is normalised by max |b| on the
    grid, and its scale refitted by partial likelihood. The returned
    coefficients are the c_k after that rescaling.
    """
    table = risk_table(data, ts)
    shape = BetaFunction.polynomial(fit.coefficients)
    b = shape(table.unit)
    norm = float(np.max(np.abs(b)))
    if norm == 0:
        raise DegenerateShape("Derivative of the fitted path is zero on the grid")
    unit_shape = shape.scaled(1.0 / norm)
    pl_fit = fit_scaled_shape(table, unit_shape)
    return unit_shape.scaled(pl_fit.beta_hat), pl_fit


def legendre_model(
    data, ts: Optional[TimeScale], order: int = LEGENDRE_ORDER, d2max: float = D2MAX
) -> Tuple[LegendreFit, BetaFunction, PartialLikFit]:
    """Legendre fit of the drift process and the beta(t) it implies, with R2"""
    table = risk_table(data, ts)
    drift = effect_path(table, ts, 0.0)
    path_fit = fit_legendre(drift, order, d2max)
    beta, pl_fit = beta_from_legendre(path_fit, table, ts)
    explained = r2(table, ts, beta)
    return replace(path_fit, r2=explained), beta, pl_fit
