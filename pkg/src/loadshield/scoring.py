"""Violation, incentive and incentive-weighted violation scores for inbound profile sets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cluster import ClusterModel
from .features import profile_representative
from .ingest import N_PERIODS, ProfileSet
from .pricing import IncentiveWeights

FLAG_LEVELS = ("none", "anomalous", "incentive-flagged")
REPORT_COLUMNS = ("business_id", "industry", "cluster_id", "n_days", "vsp", "isc", "wivs", "flag")


@dataclass(frozen=True)
class Thresholds:
    vsp_anomalous: float = 0.5
    wivs_incentive: float = float("inf")


@dataclass
class ViolationMask:
    vsd: np.ndarray  # days x 48 signed slack
    vsc: np.ndarray  # days x 48 0/1


@dataclass
class ScoreReport:
    business_id: str
    industry_label: str
    cluster_id: int
    n_days: int
    vsp: float
    isc: float
    wivs: float
    mask: ViolationMask
    daily_gain: np.ndarray
    flags: list[str] = field(default_factory=list)

    @property
    def flag(self) -> str:
        return self.flags[-1] if self.flags else "none"

    def row(self) -> dict:
        return {"business_id": self.business_id, "industry": self.industry_label,
                "cluster_id": self.cluster_id, "n_days": self.n_days,
                "vsp": self.vsp, "isc": self.isc, "wivs": self.wivs, "flag": self.flag}

    def to_dict(self, with_mask: bool = False) -> dict:
        out = self.row()
        out["flags"] = list(self.flags)
        out["daily_gain"] = [float(g) for g in self.daily_gain]
        if with_mask:
            out["vsc"] = self.mask.vsc.astype(int).tolist()
        return out

    def to_json(self, with_mask: bool = False) -> str:
        return json.dumps(self.to_dict(with_mask), indent=2, sort_keys=True) + "\n"


def _days(pset: ProfileSet | np.ndarray) -> np.ndarray:
    z = pset.matrix() if isinstance(pset, ProfileSet) else np.atleast_2d(np.asarray(pset, dtype=float))
    if z.ndim != 2 or z.shape[1] != N_PERIODS or z.shape[0] < 1:
        raise ValueError(f"need at least one {N_PERIODS}-period day")
    return z


def assign_cluster(pset: ProfileSet, models: Sequence[ClusterModel]) -> ClusterModel:
    """Nearest model by Euclidean distance between the set's mean day and ``ac``."""
    if not models:
        raise ValueError("no models to assign against")
    if any(m.industry_label != pset.industry_label for m in models):
        raise ValueError(f"industry mismatch: {pset.business_id} is {pset.industry_label!r}")
    rep = profile_representative(pset)
    ordered = sorted(models, key=lambda m: m.cluster_id)
    dist = [float(np.linalg.norm(rep - m.ac)) for m in ordered]
    return ordered[int(np.argmin(dist))]


def violation_score(pset, model: ClusterModel, confidence: float = 2.0,
                    asd_floor: float = 1e-6) -> tuple[ViolationMask, float]:
    """Fraction of (day, period) cells outside the ``confidence`` * asd band around ``ac``.

    A cell sitting exactly on the band edge is not a violation. Periods with
    asd below ``asd_floor`` use the floor instead.
    """
    z = _days(pset)
    if not (np.all(np.isfinite(model.asd)) and np.all(np.isfinite(model.ac))):
        raise ValueError("model asd/ac must be finite")
    asd = np.maximum(model.asd, asd_floor)
    vsd = confidence * asd - np.abs(z - model.ac)
    vsc = (vsd < 0).astype(np.int8)
    vsp = float(vsc.sum()) / vsc.size
    return ViolationMask(vsd, vsc), vsp


def daily_gains(pset, model: ClusterModel, weights: IncentiveWeights) -> np.ndarray:
    """Price-weighted shortfall of each day against the baseline, sum_t (ac - z) * wsp."""
    z = _days(pset)
    if weights.wsp.shape != (N_PERIODS,):
        raise ValueError(f"wsp must have {N_PERIODS} values")
    return (model.ac - z) @ weights.wsp


def incentive_score(pset, model: ClusterModel, weights: IncentiveWeights) -> float:
    """Absolute mean daily gain; positive gains mean load moved out of dear periods."""
    return float(abs(daily_gains(pset, model, weights).mean()))


def wivs(vsp: float, isc: float) -> float:
    return vsp * isc


def score_business(pset: ProfileSet, models: Sequence[ClusterModel], weights: IncentiveWeights,
                   thresholds: Thresholds = Thresholds(), confidence: float = 2.0,
                   asd_floor: float = 1e-6) -> ScoreReport:
    model = assign_cluster(pset, models)
    mask, vsp = violation_score(pset, model, confidence, asd_floor)
    gains = daily_gains(pset, model, weights)
    isc = float(abs(gains.mean()))
    score = wivs(vsp, isc)
    flags = []
    if vsp > thresholds.vsp_anomalous:
        flags.append("anomalous")
    if score > thresholds.wivs_incentive:
        flags.append("incentive-flagged")
    return ScoreReport(pset.business_id, pset.industry_label, model.cluster_id, pset.n_days,
                       vsp, isc, score, mask, gains, flags)


def percentile_threshold(reports: Sequence[ScoreReport], q: float = 95.0) -> float:
    """The q-th percentile of a population's wivs, the default incentive cut-off."""
    if not reports:
        return float("inf")
    return float(np.percentile([r.wivs for r in reports], q))
