"""Reading, cleaning, calendar filtering and normalization of half-hourly meter data.

Two CSV layouts are accepted (UTF-8, header mandatory):

* wide: ``business_id,industry_label,date,p01,...,p48`` (one row per business-day)
* long: ``business_id,industry_label,date,period,kwh`` (one row per reading)

Missing readings are written as an empty field (or ``nan``); they are never
coerced to zero.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import IO, Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

N_PERIODS = 48
WIDE_COLUMNS = [f"p{i:02d}" for i in range(1, N_PERIODS + 1)]
LONG_COLUMNS = ["business_id", "industry_label", "date", "period", "kwh"]
SCHEMA_VERSION = 1


class IngestError(ValueError):
    """Raised for unreadable input or an invalid ingest configuration."""


@dataclass(frozen=True)
class RawReadingRow:
    business_id: str
    industry_label: str
    date: date
    period_index: int
    consumption: float  # nan marks a missing reading; non-finite values are left for cleaning


@dataclass(frozen=True)
class Reject:
    line: int
    reason: str
    text: str = ""


@dataclass
class ParseResult:
    rows: list[RawReadingRow]
    rejects: list[Reject]
    layout: str

    @property
    def n_rows(self) -> int:
        return len(self.rows)


def day_class_of(d: date) -> str:
    return "weekend" if d.weekday() >= 5 else "weekday"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LoadProfile:
    business_id: str
    industry_label: str
    date: date
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (N_PERIODS,):
            raise ValueError(f"profile needs {N_PERIODS} values, got {self.values.shape}")

    @property
    def day_class(self) -> str:
        return day_class_of(self.date)


@dataclass(frozen=True, eq=False)
class NormalizedProfile:
    business_id: str
    date: date
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class ProfileSet:
    business_id: str
    industry_label: str
    profiles: tuple[NormalizedProfile, ...]

    def __post_init__(self):
        if not self.profiles:
            raise ValueError("a profile set needs at least one profile")
        if any(p.business_id != self.business_id for p in self.profiles):
            raise ValueError("all profiles in a set must share business_id")

    @property
    def n_days(self) -> int:
        return len(self.profiles)

    def matrix(self) -> np.ndarray:
        """Days x 48 array of normalized values."""
        return np.vstack([p.values for p in self.profiles])

    @classmethod
    def from_matrix(cls, business_id: str, industry_label: str, days: Sequence[date],
                    values: np.ndarray) -> "ProfileSet":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        profs = tuple(NormalizedProfile(business_id, d, _frozen(v)) for d, v in zip(days, values))
        return cls(business_id, industry_label, profs)


# ---------------------------------------------------------------------------
# parsing


def _parse_float(text: str) -> float:
    text = text.strip()
    if text == "" or text.lower() in ("nan", "na", "null"):
        return math.nan
    return float(text)


def parse_readings(source: IO[str] | IO[bytes] | str) -> ParseResult:
    """Parse a readings CSV (wide or long layout) into raw reading rows.

    Malformed rows are skipped and reported with their 1-based line number.
    ``source`` may be a path or an open text/binary stream.
    """
    if isinstance(source, str):
        try:
            with open(source, "r", encoding="utf-8", newline="") as fh:
                return parse_readings(fh)
        except OSError as exc:
            raise IngestError(f"cannot read {source}: {exc}") from exc
    try:
        text = source.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"unreadable stream: {exc}") from exc
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise IngestError(f"input is not UTF-8: {exc}") from exc
    text = text.lstrip("﻿")

    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise IngestError("empty input: header row is mandatory")

    if header[:3] == ["business_id", "industry_label", "date"] and header[3:] == WIDE_COLUMNS:
        layout = "wide"
    elif header == LONG_COLUMNS:
        layout = "long"
    else:
        raise IngestError(f"unrecognised header: {','.join(header)}")

    rows: list[RawReadingRow] = []
    rejects: list[Reject] = []
    for fields in reader:
        line = reader.line_num
        if not fields or all(not f.strip() for f in fields):
            continue
        try:
            rows.extend(_parse_fields(fields, layout, len(header)))
        except (ValueError, IndexError) as exc:
            rejects.append(Reject(line, str(exc), ",".join(fields)))
    log.info("parsed %d readings (%s layout), %d rejected rows", len(rows), layout, len(rejects))
    return ParseResult(rows, rejects, layout)


def _parse_fields(fields: list[str], layout: str, width: int) -> list[RawReadingRow]:
    if len(fields) != width:
        raise ValueError(f"expected {width} fields, got {len(fields)}")
    bid, label, day = fields[0].strip(), fields[1].strip(), fields[2].strip()
    if not bid:
        raise ValueError("empty business_id")
    d = date.fromisoformat(day)
    if layout == "wide":
        vals = [_parse_float(f) for f in fields[3:]]
        return [RawReadingRow(bid, label, d, i + 1, v) for i, v in enumerate(vals)]

    period = int(fields[3])
    if not 1 <= period <= N_PERIODS:
        raise ValueError(f"period_index {period} outside 1..{N_PERIODS}")
    return [RawReadingRow(bid, label, d, period, _parse_float(fields[4]))]


# ---------------------------------------------------------------------------
# cleaning


@dataclass
class CleaningReport:
    days_seen: int = 0
    days_kept: int = 0
    dropped: list[dict] = field(default_factory=list)

    @property
    def retention(self) -> float:
        return self.days_kept / self.days_seen if self.days_seen else 0.0

    def to_dict(self) -> dict:
        return {
            "days_seen": self.days_seen,
            "days_kept": self.days_kept,
            "days_dropped": len(self.dropped),
            "retention": self.retention,
            "dropped": self.dropped,
        }


def clean_profiles(rows: Iterable[RawReadingRow]) -> tuple[list[LoadProfile], CleaningReport]:
    """Assemble business-days from readings, dropping any day that is not whole and valid.

    A day is kept only if it has every one of the 48 periods exactly once, all
    finite and non-negative. Nothing else is trimmed; kept values are copied
    through untouched.
    """
    days: dict[tuple[str, date], dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    labels: dict[str, str] = {}
    for r in rows:
        days[(r.business_id, r.date)][r.period_index].append(r.consumption)
        labels.setdefault(r.business_id, r.industry_label)

    report = CleaningReport()
    kept: list[LoadProfile] = []
    for (bid, d) in sorted(days):
        periods = days[(bid, d)]
        report.days_seen += 1
        reason = None
        if len(periods) != N_PERIODS or any(len(v) != 1 for v in periods.values()):
            reason = "incomplete day" if len(periods) < N_PERIODS else "duplicate periods"
        else:
            vals = [periods[i][0] for i in range(1, N_PERIODS + 1)]
            if any(not math.isfinite(v) for v in vals):
                reason = "missing or non-finite reading"
            elif any(v < 0 for v in vals):
                reason = "negative consumption"
        if reason:
            report.dropped.append({"business_id": bid, "date": d.isoformat(), "reason": reason})
            continue
        kept.append(LoadProfile(bid, labels[bid], d, _frozen(vals)))
        report.days_kept += 1
    return kept, report


# ---------------------------------------------------------------------------
# calendar filter and normalization


def filter_calendar(profiles: Iterable[LoadProfile], start: date | None = None,
                    end: date | None = None, day_class: str = "all") -> list[LoadProfile]:
    """Keep profiles dated within ``[start, end]`` whose day class matches."""
    if day_class not in ("weekday", "weekend", "all"):
        raise IngestError(f"day_class must be weekday, weekend or all, not {day_class!r}")
    if start is not None and end is not None and start > end:
        raise IngestError(f"inverted season range {start} > {end}")
    out = []
    for p in profiles:
        if start is not None and p.date < start:
            continue
        if end is not None and p.date > end:
            continue
        if day_class != "all" and p.day_class != day_class:
            continue
        out.append(p)
    return out


def normalize_values(x) -> np.ndarray:
    """Max-min scale a vector onto [0, 1]; a constant vector maps to zeros."""
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    z = (x - lo) / (hi - lo)
    return np.clip(z, 0.0, 1.0)


def normalize(profile: LoadProfile) -> NormalizedProfile:
    return NormalizedProfile(profile.business_id, profile.date, _frozen(normalize_values(profile.values)))


def group_profile_sets(profiles: Iterable[LoadProfile]) -> list[ProfileSet]:
    """Normalize each day and bundle the days of each business, ordered by id then date."""
    by_business: dict[str, list[LoadProfile]] = defaultdict(list)
    for p in profiles:
        by_business[p.business_id].append(p)
    sets = []
    for bid in sorted(by_business):
        days = sorted(by_business[bid], key=lambda p: p.date)
        sets.append(ProfileSet(bid, days[0].industry_label, tuple(normalize(p) for p in days)))
    return sets


def write_wide_csv(fh: IO[str], records: Iterable[tuple[str, str, date, Sequence[float]]]) -> None:
    """Write business-day records in the wide ingest layout."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["business_id", "industry_label", "date", *WIDE_COLUMNS])
    for bid, label, d, values in records:
        w.writerow([bid, label, d.isoformat(), *(repr(float(v)) for v in values)])
