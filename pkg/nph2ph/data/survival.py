import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from nph2ph.exceptions import (
    EmptyFile,
    EmptyStratum,
    InvalidEvent,
    InvalidGroup,
    MalformedRow,
    NonPositiveTime,
)

HEADER = ["time", "event", "group"]

# Below this many events the bridge diagnostics are not worth much
MIN_EVENTS = 10
# Share of events tied with another event that triggers a warning
MAX_TIED_SHARE = 0.2


@dataclass(frozen=True)
class SurvivalRecord:
    time: float
    event: bool
    group: int


@dataclass(frozen=True, eq=False)
class TrialData:
    """Two-arm survival data, sorted by time. At equal times events come
    before censorings and tied records keep their input order.

    Use `TrialData.from_arrays` to build it; the constructor assumes the
    arrays are already validated and sorted.
    """

    time: np.ndarray
    event: np.ndarray
    group: np.ndarray
    rows: np.ndarray

    @classmethod
    def from_arrays(cls, time, event, group, rows=None) -> "TrialData":
        """
        Validates and sorts the records.

        Parameters
        ----------
        time : array-like of float
            Observed times, min(T, C). Must be positive.
        event : array-like of bool or {0, 1}
            True when the subject failed, False when censored.
        group : array-like of {0, 1}
            Treatment indicator.
        rows : array-like of int, optional
            Row numbers in the source file, kept for error reporting.
            Defaults to 1, 2, ..., n in input order.

        Returns
        -------
        TrialData
        """
        time = np.asarray(time, dtype=float).ravel()
        event = np.asarray(event).ravel()
        group = np.asarray(group).ravel()
        n = time.size
        if not (event.size == n and group.size == n):
            raise ValueError(
                "time, event and group must have the same length\n"
                f"Got {n}, {event.size} and {group.size}"
            )
        if n == 0:
            raise EmptyFile("Trial data contains no records")
        if rows is None:
            rows = np.arange(1, n + 1)
        rows = np.asarray(rows, dtype=np.int64).ravel()

        bad = np.flatnonzero(~np.isfinite(time) | (time <= 0))
        if bad.size:
            raise NonPositiveTime(int(rows[bad[0]]), time[bad[0]])
        bad = np.flatnonzero(~np.isin(event, [0, 1]))
        if bad.size:
            raise InvalidEvent(int(rows[bad[0]]), event[bad[0]])
        bad = np.flatnonzero(~np.isin(group, [0, 1]))
        if bad.size:
            raise InvalidGroup(int(rows[bad[0]]), group[bad[0]])

        event = event.astype(bool)
        group = group.astype(np.int8)
        # Primary key time, then events first, then input order
        order = np.lexsort((np.arange(n), ~event, time))
        return cls(
            time=time[order],
            event=event[order],
            group=group[order],
            rows=rows[order],
        )

    def __len__(self):
        return self.time.size

    def __eq__(self, other):
        if not isinstance(other, TrialData):
            return NotImplemented
        return (
            np.array_equal(self.time, other.time)
            and np.array_equal(self.event, other.event)
            and np.array_equal(self.group, other.group)
        )

    @property
    def n(self) -> int:
        return self.time.size

    @property
    def d(self) -> int:
        return int(self.event.sum())

    @property
    def n_per_group(self) -> tuple:
        n1 = int(self.group.sum())
        return self.n - n1, n1

    @property
    def d_per_group(self) -> tuple:
        d1 = int(self.event[self.group == 1].sum())
        return self.d - d1, d1

    def records(self) -> List[SurvivalRecord]:
        return [
            SurvivalRecord(float(t), bool(e), int(g))
            for t, e, g in zip(self.time, self.event, self.group)
        ]

    def subset(self, mask) -> "TrialData":
        mask = np.asarray(mask)
        if not mask.any():
            raise EmptyStratum("Selection leaves no records")
        return TrialData.from_arrays(
            self.time[mask], self.event[mask], self.group[mask], self.rows[mask]
        )

    def stratum(self, group: int) -> "TrialData":
        mask = self.group == group
        if not mask.any():
            raise EmptyStratum(f"Group {group} has no records")
        return self.subset(mask)

    def swap_groups(self) -> "TrialData":
        """Same records with the labels 0 and 1 exchanged"""
        return TrialData.from_arrays(self.time, self.event, 1 - self.group, self.rows)

    def shift(self, t0: float) -> "TrialData":
        """Subjects still under observation after t0, with the clock restarted"""
        return self.subset(self.time > t0)._restart(t0)

    def _restart(self, t0):
        return TrialData.from_arrays(self.time - t0, self.event, self.group, self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "time": self.time,
                "event": self.event.astype(int),
                "group": self.group.astype(int),
            }
        )


def parse_csv(raw: Union[bytes, str]) -> TrialData:
    """
    Reads two-arm survival data from CSV text with header `time,event,group`.

    Parameters
    ----------
    raw : bytes or str
        UTF-8 encoded file content.

    Returns
    -------
    TrialData

    Raises
    ------
    EmptyFile
        No header or no records.
    MalformedRow
        A row that cannot be parsed. Rows are numbered from 1, header excluded.
    NonPositiveTime, InvalidEvent, InvalidGroup
        Values out of their domain.
    """
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as err:
            raise MalformedRow(0, "file is not UTF-8 text") from err
    else:
        text = raw
    if not text.strip():
        raise EmptyFile("Input file is empty")

    try:
        df = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as err:
        raise EmptyFile("Input file is empty") from err
    except pd.errors.ParserError as err:
        # pandas reports file lines; line 1 is the header
        match = re.search(r"line (\d+)", str(err))
        row = int(match.group(1)) - 1 if match else 0
        raise MalformedRow(row, "wrong number of fields") from err

    columns = [str(c).strip().lower() for c in df.columns]
    if columns != HEADER:
        raise MalformedRow(0, f"header must be 'time,event,group', got {columns}")
    df.columns = columns
    if df.empty:
        raise EmptyFile("Input file has a header but no records")

    values = {
        col: pd.to_numeric(df[col].str.strip(), errors="coerce").to_numpy(dtype=float)
        for col in HEADER
    }
    unreadable = np.zeros(len(df), dtype=bool)
    for col in HEADER:
        unreadable |= np.isnan(values[col])
    unreadable |= np.isinf(values["time"])
    if unreadable.any():
        idx = int(np.flatnonzero(unreadable)[0])
        raise MalformedRow(idx + 1, f"cannot read '{','.join(df.iloc[idx])}'")

    return TrialData.from_arrays(
        values["time"],
        values["event"],
        values["group"],
        rows=np.arange(1, len(df) + 1),
    )


def load_csv(path: Union[str, Path]) -> TrialData:
    return parse_csv(Path(path).read_bytes())


def serialize_csv(data: TrialData) -> bytes:
    """CSV text that `parse_csv` reads back to the same TrialData"""
    return data.to_frame().to_csv(index=False, float_format="%.17g").encode("utf-8")


@dataclass
class ValidationReport:
    flags: List[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return len(self.flags) == 0

    def to_dict(self) -> dict:
        return {"flags": list(self.flags)}


def validate(data: TrialData) -> ValidationReport:
    """
    Flags data conditions that make the analysis unreliable. Never raises.

    Flags
    -----
    SingleArm : one of the groups has no subjects
    NoEvents : every subject is censored
    ZeroEventsInGroup : a group with subjects has no events
    NoRiskOverlap : no failure happens while both groups are at risk
    FewEvents : fewer than 10 events
    HeavyTies : more than 20% of the events share their time with another event
    """
    report = ValidationReport()
    n0, n1 = data.n_per_group
    if n0 == 0 or n1 == 0:
        report.flags.append("SingleArm")
    if data.d == 0:
        report.flags.append("NoEvents")
        return report

    d0, d1 = data.d_per_group
    if (n0 > 0 and d0 == 0) or (n1 > 0 and d1 == 0):
        report.flags.append("ZeroEventsInGroup")
    if n0 > 0 and n1 > 0:
        table = event_table(data)
        if not np.any((table.n0 > 0) & (table.n1 > 0)):
            report.flags.append("NoRiskOverlap")
    if data.d < MIN_EVENTS:
        report.flags.append("FewEvents")

    _, counts = np.unique(data.time[data.event], return_counts=True)
    tied = counts[counts > 1].sum()
    if tied / data.d > MAX_TIED_SHARE:
        report.flags.append("HeavyTies")
    return report


def risk_set(data: TrialData, t: float) -> np.ndarray:
    """Indices (in sorted order) of the subjects with X >= t"""
    if not t > 0:
        raise ValueError(f"Risk set time must be positive, got {t}")
    return np.flatnonzero(data.time >= t)


def _at_risk(sorted_times, t):
    return sorted_times.size - np.searchsorted(sorted_times, t, side="left")


@dataclass(frozen=True, eq=False)
class EventTable:
    """Counts at each distinct failure time.

    d : failures, d1 : failures in group 1, n0 / n1 : subjects at risk per group
    """

    time: np.ndarray
    d: np.ndarray
    d1: np.ndarray
    n0: np.ndarray
    n1: np.ndarray

    @property
    def n(self) -> np.ndarray:
        return self.n0 + self.n1


def event_table(data: TrialData, group: Optional[int] = None) -> EventTable:
    """
    Failures and risk-set sizes at every distinct failure time.

    Parameters
    ----------
    data : TrialData
    group : {0, 1}, optional
        Restrict to one stratum. The other group then has no one at risk.

    Returns
    -------
    EventTable
    """
    if group is not None:
        data = data.stratum(group)
    failed = data.event
    time, d = np.unique(data.time[failed], return_counts=True)
    idx = np.searchsorted(time, data.time[failed & (data.group == 1)])
    d1 = np.bincount(idx, minlength=time.size)
    n0 = _at_risk(data.time[data.group == 0], time)
    n1 = _at_risk(data.time[data.group == 1], time)
    return EventTable(
        time=time,
        d=d.astype(float),
        d1=d1.astype(float),
        n0=n0.astype(float),
        n1=n1.astype(float),
    )


@dataclass(frozen=True, eq=False)
class StepCurve:
    """Right-continuous step function with jumps at `time`.

    kind is "survival" (starts at 1, non-increasing) or "hazard"
    (starts at 0, non-decreasing).
    """

    time: np.ndarray
    value: np.ndarray
    kind: str = "survival"

    def __post_init__(self):
        if self.kind not in ("survival", "hazard"):
            raise ValueError(f"Unknown curve kind '{self.kind}'")

    @property
    def start(self) -> float:
        return 1.0 if self.kind == "survival" else 0.0

    def __call__(self, t):
        values = np.concatenate([[self.start], self.value])
        idx = np.searchsorted(self.time, t, side="right")
        out = values[idx]
        return float(out) if np.ndim(out) == 0 else out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.time, "value": self.value})

    def to_tsv(self) -> str:
        return self.to_frame().to_csv(sep="\t", index=False, float_format="%.10g")


def _stratum_table(data, group):
    if group is None:
        if data.n == 0:
            raise EmptyStratum("No records")
        return event_table(data)
    return event_table(data, group)


def kaplan_meier(data: TrialData, group: Optional[int] = None) -> StepCurve:
    """Product-limit survival estimate, pooled or for one group"""
    table = _stratum_table(data, group)
    value = np.cumprod(1.0 - table.d / table.n)
    return StepCurve(table.time, value, kind="survival")


def nelson_aalen(data: TrialData, group: Optional[int] = None) -> StepCurve:
    """Nelson-Aalen cumulative hazard, sum of d / n over failure times"""
    table = _stratum_table(data, group)
    value = np.cumsum(table.d / table.n)
    return StepCurve(table.time, value, kind="hazard")
