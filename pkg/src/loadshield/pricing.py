"""Regional spot-price averaging and flat-price-relative incentive weights."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import date
from typing import IO

import numpy as np

from .ingest import N_PERIODS, WIDE_COLUMNS

log = logging.getLogger(__name__)


class PriceError(ValueError):
    pass


@dataclass
class RegionalPriceTable:
    """48 half-hourly prices per (region, date)."""

    prices: dict[tuple[str, date], np.ndarray] = field(default_factory=dict)
    skipped: list[dict] = field(default_factory=list)

    @property
    def regions(self) -> list[str]:
        return sorted({r for r, _ in self.prices})

    def add(self, region: str, day: date, values) -> None:
        v = np.asarray(values, dtype=float)
        if v.shape != (N_PERIODS,) or not np.all(np.isfinite(v)):
            raise PriceError(f"{region} {day}: need {N_PERIODS} finite prices")
        self.prices[(region, day)] = v


def read_price_csv(source: IO[str] | str) -> RegionalPriceTable:
    """Read ``region,date,p01..p48``. Incomplete region-days are skipped with a warning."""
    if isinstance(source, str):
        try:
            with open(source, "r", encoding="utf-8", newline="") as fh:
                return read_price_csv(fh)
        except OSError as exc:
            raise PriceError(f"cannot read {source}: {exc}") from exc
    reader = csv.reader(io.StringIO(source.read().lstrip("﻿")))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise PriceError("empty price file")
    if header != ["region", "date", *WIDE_COLUMNS]:
        raise PriceError(f"unrecognised price header: {','.join(header)}")
    table = RegionalPriceTable()
    for row in reader:
        if not row:
            continue
        line = reader.line_num
        try:
            region, day = row[0].strip(), date.fromisoformat(row[1].strip())
            vals = [float(v) if v.strip() else math.nan for v in row[2:]]
            table.add(region, day, vals)
        except (ValueError, IndexError) as exc:
            log.warning("price line %d skipped: %s", line, exc)
            table.skipped.append({"line": line, "reason": str(exc)})
    return table


@dataclass
class SpotPriceCurve:
    csp: np.ndarray
    regions: list[str]
    start: date | None = None
    end: date | None = None
    n_region_days: int = 0


def average_regions(table: RegionalPriceTable, start: date | None = None,
                    end: date | None = None) -> SpotPriceCurve:
    """Per-period mean over every (region, day) in range."""
    keys = sorted(k for k in table.prices
                  if (start is None or k[1] >= start) and (end is None or k[1] <= end))
    if not keys:
        raise PriceError("no region-days in the selected date range")
    stacked = np.vstack([table.prices[k] for k in keys])
    days = [k[1] for k in keys]
    return SpotPriceCurve(stacked.mean(axis=0), sorted({k[0] for k in keys}),
                          min(days), max(days), len(keys))


@dataclass
class IncentiveWeights:
    wsp: np.ndarray
    flat_price: float
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"wsp": [float(v) for v in self.wsp], "flat_price": self.flat_price,
                "provenance": self.provenance}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, obj: dict) -> "IncentiveWeights":
        return cls(np.asarray(obj["wsp"], dtype=float), float(obj["flat_price"]),
                   dict(obj.get("provenance", {})))


def incentive_weights(curve: SpotPriceCurve | np.ndarray, flat_price: float | str = "auto") -> IncentiveWeights:
    """Relative premium of each period over the flat price: (csp - fp) / fp.

    ``flat_price="auto"`` uses the mean of the curve.
    """
    csp = curve.csp if isinstance(curve, SpotPriceCurve) else np.asarray(curve, dtype=float)
    if csp.shape != (N_PERIODS,) or not np.all(np.isfinite(csp)):
        raise PriceError(f"spot curve needs {N_PERIODS} finite values")
    if flat_price == "auto":
        fp = float(csp.mean())
    else:
        fp = float(flat_price)
    if not fp > 0:
        raise PriceError(f"flat price must be positive, got {fp}")
    prov = {"flat_price_mode": "auto" if flat_price == "auto" else "fixed"}
    if isinstance(curve, SpotPriceCurve):
        prov.update(regions=curve.regions, n_region_days=curve.n_region_days,
                    start=curve.start.isoformat() if curve.start else None,
                    end=curve.end.isoformat() if curve.end else None,
                    csp=[float(v) for v in csp])
    return IncentiveWeights((csp - fp) / fp, fp, prov)
