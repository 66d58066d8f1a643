from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
import pandas as pd
from scipy.special import expit

from nph2ph.data.survival import (
    StepCurve,
    TrialData,
    event_table,
    kaplan_meier,
    nelson_aalen,
)
from nph2ph.data.timescale import TimeScale, from_unit, to_unit
from nph2ph.exceptions import EmptyStratum, NoInformativeFailures
from nph2ph.model.beta import BetaFunction, beta_values
from nph2ph.model.score import PartialLikFit, expectation, fit_constant, risk_table


def _squared_residuals(table, e):
    """sum over failures of (Z_i - e)^2, grouped by grid point"""
    return np.sum(table.d1 * (1.0 - e) ** 2 + (table.d - table.d1) * e ** 2)


def r2(data, ts: Optional[TimeScale], beta) -> float:
    """
    Explained variation of the group label at the failures.

    1 - sum (Z_i - E_beta(Z | t_i))^2 / sum (Z_i - E_0(Z | t_i))^2 over the
    grid failures. Can be negative for a beta that fits worse than none.
    """
    table = risk_table(data, ts)
    null = _squared_residuals(table, expectation(table, np.zeros(table.k)))
    if not null > 0:
        raise NoInformativeFailures("Null residual sum is zero")
    fitted = _squared_residuals(table, expectation(table, beta_values(beta, table.unit)))
    return float(1.0 - fitted / null)


def kappa_ph(beta: float) -> float:
    """
    P(T_1 > T_0) when group 1 has hazard exp(beta) times that of group 0.

    With a common baseline this is 1 / (1 + exp(beta)): a protective
    treatment (beta < 0) gives kappa > 1/2.
    """
    return float(expit(-beta))


def kappa_piecewise(tau_e: float, beta1: float, beta2: float) -> float:
    """
    P(T_1 > T_0) under a log hazard ratio beta1 before tau_e and beta2 after,
    tau_e measured on the unit-exponential time scale of group 0.

    Split on whether the first of the two failures happens before tau_e:

        (1 - exp(-(1 + a1) tau_e)) / (1 + a1) + exp(-(1 + a1) tau_e) / (1 + a2)

    with a_i = exp(beta_i). Reduces to kappa_ph when beta1 = beta2.
    """
    if not tau_e > 0:
        raise ValueError(f"tau_e must be positive, got {tau_e}")
    a1 = np.exp(beta1)
    survive = np.exp(-(1.0 + a1) * tau_e)
    early = -np.expm1(-(1.0 + a1) * tau_e) * expit(-beta1)
    late = survive * expit(-beta2)
    return float(early + late)


def psi(kappa: float) -> float:
    """Relative risk kappa / (1 - kappa)"""
    if not 0 < kappa < 1:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    return kappa / (1.0 - kappa)


def exponential_changepoint(data: TrialData, ts: TimeScale, tau: float) -> float:
    """Unit-scale tau on the unit-exponential scale: pooled cumulative hazard
    at the corresponding study time"""
    return float(nelson_aalen(data)(from_unit(ts, tau)))


@dataclass(frozen=True)
class PredictSummary:
    r2: float
    kappa: float
    psi: float
    model: BetaFunction
    kappa_mc: Optional[float] = None
    kappa_mc_se: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "r2": self.r2,
            "r2_reported": max(self.r2, 0.0),
            "kappa": self.kappa,
            "psi": self.psi,
            "kappa_mc": self.kappa_mc,
            "kappa_mc_se": self.kappa_mc_se,
            "model": self.model.describe(),
        }


@dataclass(frozen=True, eq=False)
class ConditionalCurves:
    """Model-based cumulative hazards for group 0 and 1 at every failure time"""

    time: np.ndarray
    cumhaz0: np.ndarray
    cumhaz1: np.ndarray

    def cumhaz(self, group: int) -> StepCurve:
        value = self.cumhaz1 if group == 1 else self.cumhaz0
        return StepCurve(self.time, value, kind="hazard")

    def survival(self, group: int) -> StepCurve:
        value = self.cumhaz1 if group == 1 else self.cumhaz0
        return StepCurve(self.time, np.exp(-value), kind="survival")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.time,
                "cumhaz_0": self.cumhaz0,
                "cumhaz_1": self.cumhaz1,
                "surv_0": np.exp(-self.cumhaz0),
                "surv_1": np.exp(-self.cumhaz1),
            }
        )


def conditional_survival(data: TrialData, ts: Optional[TimeScale], beta) -> ConditionalCurves:
    """
    Breslow-type cumulative hazards given the fitted beta(t).

    Lambda(t; G) sums d_i exp(beta_i G) / (n0_i + n1_i exp(beta_i)) over
    failure times up to t, with beta_i = beta(to_unit(X_i)). Every failure
    counts, including the uninformative ones left off the grid.

    Parameters
    ----------
    data : TrialData
    ts : TimeScale, optional
        May be omitted when beta is constant.
    beta : BetaFunction or float
    """
    table = event_table(data)
    if ts is None:
        if isinstance(beta, BetaFunction) and not beta.is_constant:
            raise ValueError("A time-varying beta needs the TimeScale")
        units = np.zeros(table.time.size)
    else:
        units = to_unit(ts, table.time)
    b = beta_values(beta, units)
    w = np.exp(b)
    denom = table.n0 + table.n1 * w
    return ConditionalCurves(
        time=table.time,
        cumhaz0=np.cumsum(table.d / denom),
        cumhaz1=np.cumsum(table.d * w / denom),
    )


def km_distance(curves: ConditionalCurves, data: TrialData) -> float:
    """Largest gap between the model curves and the group Kaplan-Meier curves"""
    gaps = []
    for group in (0, 1):
        try:
            km = kaplan_meier(data, group)
        except EmptyStratum:
            continue
        grid = np.union1d(km.time, curves.time)
        gaps.append(np.max(np.abs(curves.survival(group)(grid) - km(grid))))
    return float(max(gaps)) if gaps else 0.0


@dataclass(frozen=True, eq=False)
class Landmark:
    t0: float
    curves: Dict[int, StepCurve]
    data: TrialData
    fit: Optional[PartialLikFit] = None

    def to_dict(self) -> dict:
        n0, n1 = self.data.n_per_group
        out = {"t0": self.t0, "n": [n0, n1], "d": list(self.data.d_per_group)}
        if self.fit is not None:
            out["beta_hat"] = self.fit.beta_hat
            out["se"] = self.fit.se
            out["hazard_ratio"] = self.fit.hazard_ratio
        return out


def landmark(data: TrialData, t0: float) -> Dict[int, StepCurve]:
    """
    Per-group Kaplan-Meier curves of the subjects still observed after t0,
    with time restarted at t0.
    """
    return landmark_analysis(data, t0, fit=False).curves


def landmark_analysis(data: TrialData, t0: float, fit: bool = True) -> Landmark:
    """landmark, plus the log hazard ratio fitted on the landmarked data"""
    if t0 < 0:
        raise ValueError(f"Landmark time must be non-negative, got {t0}")
    later = data.time > t0
    for group in (0, 1):
        if not np.any(later & (data.group == group)):
            raise EmptyStratum(f"No subject of group {group} observed past {t0}")
    shifted = data.shift(t0)
    curves = {group: kaplan_meier(shifted, group) for group in (0, 1)}
    cox = None
    if fit:
        try:
            cox = fit_constant(shifted)
        except NoInformativeFailures:
            cox = None
    return Landmark(t0=t0, curves=curves, data=shifted, fit=cox)
