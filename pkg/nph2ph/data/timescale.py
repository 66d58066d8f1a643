import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from nph2ph.data.survival import TrialData, event_table
from nph2ph.exceptions import NoInformativeFailures

# Slack for u * k landing a hair above an integer
UNIT_ROUND = 1e-9


@dataclass(frozen=True, eq=False)
class TimeScale:
    """Order-preserving map between study time and the unit interval.

    The j-th grid failure time is sent to j / k. Failures whose risk set
    holds a single group carry no information about the treatment effect
    and are left out of the grid unless `exclude_uninformative` is False.
    """

    times: np.ndarray
    excluded: np.ndarray
    exclude_uninformative: bool = True

    @property
    def k(self) -> int:
        return self.times.size

    @property
    def units(self) -> np.ndarray:
        return np.arange(1, self.k + 1) / self.k

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"original": self.times, "unit": self.units})

    def to_tsv(self) -> str:
        return self.to_frame().to_csv(sep="\t", index=False, float_format="%.10g")


def build(data: TrialData, exclude_uninformative: bool = True) -> TimeScale:
    """
    Builds the transformed time scale of a trial.

    Parameters
    ----------
    data : TrialData
    exclude_uninformative : bool, default True
        Drop failures whose risk set contains a single group. Keeping them
        is only meant for diagnostics: their conditional variance is zero.

    Returns
    -------
    TimeScale
    """
    table = event_table(data)
    if table.time.size == 0:
        raise NoInformativeFailures("No failures observed")
    informative = (table.n0 > 0) & (table.n1 > 0)
    if not informative.any():
        raise NoInformativeFailures(
            "Every failure happens while a single group is at risk"
        )

    dropped = table.time[~informative]
    excluded = np.flatnonzero(data.event & np.isin(data.time, dropped))
    if exclude_uninformative:
        times = table.time[informative]
    else:
        times = table.time
        if dropped.size:
            warnings.warn(
                f"{excluded.size} uninformative failures kept on the time grid"
            )
        excluded = np.array([], dtype=np.int64)
    return TimeScale(times, excluded, exclude_uninformative)


def _like_input(t, out):
    return float(out) if np.ndim(t) == 0 else out


def to_unit(ts: TimeScale, t):
    """Right-continuous step map: largest grid value whose time is <= t, 0 below"""
    idx = np.searchsorted(ts.times, t, side="right")
    return _like_input(t, idx / ts.k)


def from_unit(ts: TimeScale, u):
    """Grid failure time number ceil(u * k); 0 maps to 0"""
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < 0) | (u_arr > 1)):
        raise ValueError(f"Unit time must lie in [0, 1], got {u}")
    j = np.clip(np.ceil(u_arr * ts.k - UNIT_ROUND).astype(int), 1, ts.k)
    out = np.where(u_arr == 0, 0.0, ts.times[j - 1])
    return _like_input(u, out)
