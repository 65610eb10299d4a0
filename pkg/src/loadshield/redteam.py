"""Attack fixtures (meter bypass, reduced-cost spot attack) and synthetic business populations."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Mapping, Sequence

import numpy as np

from .cluster import ClusterModel
from .ingest import N_PERIODS, ProfileSet, day_class_of, normalize_values
from .pricing import IncentiveWeights

log = logging.getLogger(__name__)

_T = np.arange(N_PERIODS) + 0.5  # period midpoints, in half-hours since midnight


class AttackError(ValueError):
    pass


def _bump(center_hour: float, width_hours: float, wrap: bool = False) -> np.ndarray:
    dist = _T / 2.0 - center_hour
    if wrap:
        dist = (dist + 12.0) % 24.0 - 12.0
    return np.exp(-0.5 * (dist / width_hours) ** 2)


def _scaled(x: np.ndarray) -> np.ndarray:
    return (x - x.min()) / (x.max() - x.min())


ARCHETYPES: dict[str, np.ndarray] = {
    "midday-peak": _scaled(0.05 + _bump(12.5, 2.5)),
    "evening-peak": _scaled(0.05 + _bump(20.0, 2.0)),
    "nocturnal": _scaled(0.05 + _bump(1.0, 2.5, wrap=True)),
    "breakfast-dinner": _scaled(0.05 + _bump(6.5, 1.2) + 0.6 * _bump(16.5, 1.5)),
    "broad-day": _scaled(0.05 + _bump(14.0, 5.0)),
}


def template_separation(templates: Sequence[np.ndarray]) -> float:
    """Smallest pairwise RMS per-period difference between templates."""
    best = np.inf
    for i in range(len(templates)):
        for j in range(i + 1, len(templates)):
            best = min(best, float(np.sqrt(np.mean((templates[i] - templates[j]) ** 2))))
    return best


def two_hump_price_curve(base: float = 0.15, morning: float = 0.05, evening: float = 0.14,
                         overnight_dip: float = 0.05) -> np.ndarray:
    """Typical intraday spot shape (currency/kWh): cheap overnight, 08:00 and 17:30 peaks."""
    return (base + morning * _bump(8.0, 1.5) + evening * _bump(17.5, 1.5)
            - overnight_dip * _bump(3.5, 2.5))


# ---------------------------------------------------------------------------
# attacks


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    target_business: str
    n_days: int = 1
    energy_preservation: bool = True
    beta: float = 3.0

    def __post_init__(self):
        if self.kind not in ("bypass", "rcsa"):
            raise AttackError(f"attack kind must be bypass or rcsa, not {self.kind!r}")
        if self.n_days < 1:
            raise AttackError("n_days must be >= 1")
        if self.kind == "rcsa" and not self.beta > 0:
            raise AttackError("rcsa concentration beta must be > 0")

    @property
    def business_id(self) -> str:
        return f"attack-{self.kind}-{self.target_business}"


def bypass_vector() -> np.ndarray:
    return np.zeros(N_PERIODS)


def bypass_profile(n_days: int, business_id: str = "attack-bypass",
                   industry_label: str = "", dates: Sequence[date] | None = None) -> ProfileSet:
    if n_days < 1:
        raise AttackError("n_days must be >= 1")
    dates = list(dates) if dates is not None else _default_dates(n_days)
    return ProfileSet.from_matrix(business_id, industry_label, dates, np.zeros((n_days, N_PERIODS)))


def priced_cost(profile, csp) -> float:
    return float(np.dot(profile, csp))


def _tilted(wsp: np.ndarray, beta: float) -> np.ndarray:
    e = -beta * wsp
    p = np.exp(e - e.max())
    return p / p.sum()


def rcsa_vector(weights: IncentiveWeights, baseline: ClusterModel, beta: float = 3.0,
                energy_preservation: bool = True) -> tuple[np.ndarray, float]:
    """Exponentially tilt load away from expensive periods.

    Returns ``(profile, beta_used)``. With energy preservation the profile's
    total equals the baseline total, and the tilt is sharpened (beta doubled)
    until its priced cost is strictly below the baseline's.
    """
    wsp = np.asarray(weights.wsp, dtype=float)
    if wsp.shape != (N_PERIODS,):
        raise AttackError(f"wsp must have {N_PERIODS} values")
    if np.ptp(wsp) == 0:
        warnings.warn("constant incentive weights: RCSA degenerates to a uniform profile")
        shape = np.full(N_PERIODS, 1.0 / N_PERIODS)
        if not energy_preservation:
            return np.ones(N_PERIODS), beta
        return shape * baseline.ac.sum(), beta
    if not energy_preservation:
        q = _tilted(wsp, beta)
        return q / q.max(), beta

    total = float(baseline.ac.sum())
    if total <= 0:
        raise AttackError("baseline has no energy to preserve")
    base_cost = float(np.dot(baseline.ac, wsp))
    b = beta
    for _ in range(60):
        p = _tilted(wsp, b) * total
        if float(np.dot(p, wsp)) < base_cost:
            if b != beta:
                log.info("rcsa beta raised from %g to %g to undercut baseline cost", beta, b)
            return p, b
        b *= 2.0
    raise AttackError("baseline already sits in the cheapest periods; no cheaper profile exists")


def rcsa_profile(weights: IncentiveWeights, baseline: ClusterModel, spec: AttackSpec,
                 dates: Sequence[date] | None = None) -> ProfileSet:
    """The attack as the scorer sees it: the tilted profile, max-min normalized, for each day."""
    p, _ = rcsa_vector(weights, baseline, spec.beta, spec.energy_preservation)
    dates = list(dates) if dates is not None else _default_dates(spec.n_days)
    z = np.tile(normalize_values(p), (spec.n_days, 1))
    return ProfileSet.from_matrix(spec.business_id, baseline.industry_label, dates, z)


def attack_records(spec: AttackSpec, weights: IncentiveWeights | None, baseline: ClusterModel,
                   dates: Sequence[date]) -> list[tuple[str, str, date, np.ndarray]]:
    """Raw rows for the ingest CSV, one per attacked day."""
    if len(dates) != spec.n_days:
        raise AttackError("one date per attacked day required")
    if spec.kind == "bypass":
        vec = bypass_vector()
    else:
        if weights is None:
            raise AttackError("rcsa needs incentive weights")
        vec, _ = rcsa_vector(weights, baseline, spec.beta, spec.energy_preservation)
    return [(spec.business_id, baseline.industry_label, d, vec) for d in dates]


# ---------------------------------------------------------------------------
# synthetic populations


@dataclass
class SyntheticPopulationSpec:
    archetypes: Mapping[str, np.ndarray] = field(default_factory=lambda: {
        k: ARCHETYPES[k] for k in ("midday-peak", "evening-peak")})
    n_businesses: int | Mapping[str, int] = 10
    noise_std: float = 0.05
    n_days: int = 8
    seed: int = 0
    industry_label: str = "synthetic"
    start: date = date(2009, 6, 1)
    day_class: str = "weekend"
    id_prefix: str = "b"

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        for name, t in self.archetypes.items():
            t = np.asarray(t, dtype=float)
            if t.shape != (N_PERIODS,) or t.min() < 0 or t.max() > 1:
                raise ValueError(f"template {name!r} must be 48 values in [0, 1]")

    def count(self, name: str) -> int:
        if isinstance(self.n_businesses, Mapping):
            return int(self.n_businesses[name])
        return int(self.n_businesses)


@dataclass
class SyntheticPopulation:
    sets: list[ProfileSet]
    truth: list[str]
    raw: list[tuple[str, str, date, np.ndarray]]


def calendar_days(start: date, n_days: int, day_class: str = "all") -> list[date]:
    out, d = [], start
    while len(out) < n_days:
        if day_class == "all" or day_class_of(d) == day_class:
            out.append(d)
        d += timedelta(days=1)
    return out


def _default_dates(n_days: int) -> list[date]:
    return calendar_days(date(2010, 6, 5), n_days, "weekend")


def synthesize_population(spec: SyntheticPopulationSpec) -> SyntheticPopulation:
    """Template + Gaussian noise per period, clipped at 0, then normalized per day.

    Each business also draws a random magnitude for its raw readings, which
    normalization removes. Output is fully determined by ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    dates = calendar_days(spec.start, spec.n_days, spec.day_class)
    sets, truth, raw = [], [], []
    idx = 0
    for name, template in spec.archetypes.items():
        template = np.asarray(template, dtype=float)
        for _ in range(spec.count(name)):
            bid = f"{spec.id_prefix}{idx:04d}"
            idx += 1
            magnitude = float(rng.uniform(5.0, 50.0))
            noisy = template + rng.normal(0.0, spec.noise_std, size=(spec.n_days, N_PERIODS))
            noisy = np.clip(noisy, 0.0, None)
            raw_days = np.round(noisy * magnitude, 6) if spec.noise_std > 0 else noisy * magnitude
            z = np.vstack([normalize_values(v) for v in raw_days])
            sets.append(ProfileSet.from_matrix(bid, spec.industry_label, dates, z))
            truth.append(name)
            raw.extend((bid, spec.industry_label, d, v) for d, v in zip(dates, raw_days))
    return SyntheticPopulation(sets, truth, raw)


def synthesize_prices(curve: np.ndarray | None = None, regions: int = 14, start: date = date(2009, 6, 1),
                      n_days: int = 30, regional_std: float = 0.005, daily_std: float = 0.01,
                      seed: int = 0) -> list[tuple[str, date, np.ndarray]]:
    """Regional half-hourly price rows scattered around a common curve."""
    rng = np.random.default_rng(seed)
    curve = two_hump_price_curve() if curve is None else np.asarray(curve, dtype=float)
    offsets = rng.normal(0.0, regional_std, size=regions)
    rows = []
    for r in range(regions):
        for d in calendar_days(start, n_days):
            vals = curve + offsets[r] + rng.normal(0.0, daily_std, size=N_PERIODS)
            rows.append((f"R{r + 1:02d}", d, np.round(vals, 6)))
    return rows
