"""Run configuration: one TOML (or JSON) file, every default materialized."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields
from datetime import date
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cluster import LINKAGES
from .redteam import ARCHETYPES, AttackError, AttackSpec


class ConfigError(ValueError):
    pass


DateRange = tuple[date | None, date | None]


def _range(value, name: str) -> DateRange:
    if value is None:
        return (None, None)
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{name} must be a [start, end] pair")
    out = []
    for v in value:
        if v is None or v == "":
            out.append(None)
        elif isinstance(v, date):
            out.append(v)
        else:
            try:
                out.append(date.fromisoformat(str(v)))
            except ValueError as exc:
                raise ConfigError(f"{name}: {exc}") from exc
    if out[0] and out[1] and out[0] > out[1]:
        raise ConfigError(f"{name} is inverted: {out[0]} > {out[1]}")
    return tuple(out)


@dataclass
class SynthIndustry:
    label: str
    archetypes: list[str]
    n_businesses: int = 10


@dataclass
class SynthConfig:
    industries: list[SynthIndustry] = field(default_factory=lambda: [
        SynthIndustry("synthetic", ["midday-peak", "evening-peak"])])
    noise_std: float = 0.05
    n_days: int = 8
    price_regions: int = 14
    price_days: int = 30


@dataclass
class PipelineConfig:
    readings: str | None = None
    prices: str | None = None
    score_readings: str | None = None
    season: DateRange = (None, None)
    score_season: DateRange = (None, None)
    price_season: DateRange = (None, None)
    day_class: str = "all"
    industries: list[str] = field(default_factory=list)
    linkage: str = "average"
    k_max: int = 5
    confidence: float = 2.0
    flat_price: float | str = "auto"
    asd_floor: float = 1e-6
    vsp_anomalous: float = 0.5
    wivs_percentile: float = 95.0
    wivs_incentive: float | str = "auto"
    attacks: list[AttackSpec] = field(default_factory=list)
    out_dir: str = "out"
    models_dir: str | None = None
    plots: bool = True
    export_masks: bool = False
    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)
    base_dir: str = "."

    def __post_init__(self):
        if self.linkage not in LINKAGES:
            raise ConfigError(f"linkage must be one of {LINKAGES}")
        if self.day_class not in ("weekday", "weekend", "all"):
            raise ConfigError("day_class must be weekday, weekend or all")
        if self.k_max < 2:
            raise ConfigError("k_max must be >= 2")
        if self.confidence <= 0:
            raise ConfigError("confidence multiplier must be positive")
        if self.flat_price != "auto" and not float(self.flat_price) > 0:
            raise ConfigError("flat_price must be 'auto' or a positive number")
        for ind in self.synth.industries:
            unknown = [a for a in ind.archetypes if a not in ARCHETYPES]
            if unknown:
                raise ConfigError(f"unknown archetypes {unknown}; known: {sorted(ARCHETYPES)}")

    def path(self, p: str | None) -> Path | None:
        if p is None:
            return None
        q = Path(p)
        return q if q.is_absolute() else Path(self.base_dir) / q

    @property
    def out(self) -> Path:
        return self.path(self.out_dir)

    @property
    def models(self) -> Path:
        return self.path(self.models_dir) if self.models_dir else self.out / "models"

    def effective_score_season(self) -> DateRange:
        return self.score_season if any(self.score_season) else self.season

    def effective_price_season(self) -> DateRange:
        return self.price_season if any(self.price_season) else self.season

    def snapshot(self) -> dict[str, Any]:
        """JSON-ready copy of every setting (paths as given, dates ISO)."""
        def conv(v):
            if isinstance(v, date):
                return v.isoformat()
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            return v
        d = asdict(self)
        d.pop("base_dir")
        return conv(d)


_SECTIONS = {
    "input": {"readings", "prices", "score_readings"},
    "calendar": {"season", "score_season", "price_season", "day_class"},
    "model": {"industries", "linkage", "k_max"},
    "scoring": {"confidence", "flat_price", "asd_floor", "vsp_anomalous",
                "wivs_percentile", "wivs_incentive", "export_masks"},
    "output": {"out_dir", "models_dir", "plots"},
}


def config_from_dict(raw: dict, base_dir: str = ".") -> PipelineConfig:
    flat: dict[str, Any] = {}
    known = {f.name for f in fields(PipelineConfig)}
    for key, value in raw.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"[{key}] must be a table")
            for k, v in value.items():
                if k not in _SECTIONS[key]:
                    raise ConfigError(f"unknown key {key}.{k}")
                flat[k] = v
        elif key in ("attacks", "synth", "seed"):
            flat[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    for k in ("season", "score_season", "price_season"):
        if k in flat:
            flat[k] = _range(flat[k], k)
    try:
        flat["attacks"] = [AttackSpec(**a) for a in flat.get("attacks", [])]
    except (TypeError, AttackError) as exc:
        raise ConfigError(f"invalid attack spec: {exc}") from exc
    if "synth" in flat:
        s = dict(flat["synth"])
        try:
            s["industries"] = [SynthIndustry(**i) for i in s.get("industries", [])] or SynthConfig().industries
            flat["synth"] = SynthConfig(**s)
        except TypeError as exc:
            raise ConfigError(f"invalid [synth] table: {exc}") from exc
    unknown = set(flat) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return PipelineConfig(base_dir=base_dir, **flat)


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text) if path.suffix == ".json" else tomllib.loads(text.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(raw, base_dir=str(path.parent))
