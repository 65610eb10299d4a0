"""End-to-end runs: synth -> build-models -> redteam -> score, writing every artifact to disk."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import re
import time
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .cluster import ClusterModel, build_cluster_models, proximity, select_k
from .config import PipelineConfig
from .features import FeatureMatrix, standardize
from .ingest import (CleaningReport, IngestError, ProfileSet, clean_profiles, filter_calendar,
                     group_profile_sets, parse_readings, write_wide_csv)
from .pricing import (IncentiveWeights, PriceError, average_regions, incentive_weights,
                      read_price_csv)
from .redteam import (ARCHETYPES, AttackError, AttackSpec, SyntheticPopulationSpec, attack_records,
                      calendar_days, priced_cost, rcsa_vector, synthesize_population,
                      synthesize_prices)
from .scoring import REPORT_COLUMNS, ScoreReport, Thresholds, percentile_threshold, score_business

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


class PipelineError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_CONFIG):
        super().__init__(message)
        self.exit_code = exit_code


# ---------------------------------------------------------------------------
# file helpers


def write_atomic(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path


def write_json(path: Path, obj) -> Path:
    return write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return write_atomic(path, buf.getvalue())


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text) or "_"


def model_filename(m: ClusterModel) -> str:
    return f"{slug(m.industry_label)}__c{m.cluster_id}.json"


class _Manifest:
    def __init__(self, command: str, config: PipelineConfig):
        self.t0 = time.perf_counter()
        self.data = {
            "command": command,
            "tool_version": __version__,
            "config": config.snapshot(),
            "inputs": {},
            "counts": {},
            "timing": {"started_utc": datetime.now(timezone.utc).isoformat(timespec="seconds")},
        }

    def add_input(self, label: str, path: Path | None):
        if path is not None and Path(path).exists():
            self.data["inputs"][label] = {"path": str(path), "sha256": sha256(path)}

    def write(self, path: Path) -> dict:
        self.data["timing"]["elapsed_s"] = round(time.perf_counter() - self.t0, 3)
        write_json(path, self.data)
        return self.data


def _require(path: Path | None, what: str) -> Path:
    if path is None:
        raise PipelineError(f"no {what} path configured", EXIT_CONFIG)
    if not path.exists():
        raise PipelineError(f"{what} not found: {path}", EXIT_CONFIG)
    return path


# ---------------------------------------------------------------------------
# loading


def load_profile_sets(rows, season, day_class: str,
                      industries: Sequence[str] = ()) -> tuple[list[ProfileSet], CleaningReport]:
    profiles, report = clean_profiles(rows)
    try:
        profiles = filter_calendar(profiles, season[0], season[1], day_class)
    except IngestError as exc:
        raise PipelineError(str(exc), EXIT_CONFIG)
    if industries:
        profiles = [p for p in profiles if p.industry_label in industries]
    return group_profile_sets(profiles), report


def _read_rows(path: Path):
    try:
        parsed = parse_readings(str(path))
    except IngestError as exc:
        raise PipelineError(str(exc), EXIT_CONFIG)
    return parsed


def load_weights(config: PipelineConfig) -> IncentiveWeights | None:
    path = config.path(config.prices)
    if path is None:
        return None
    _require(path, "prices file")
    start, end = config.effective_price_season()
    try:
        curve = average_regions(read_price_csv(str(path)), start, end)
        return incentive_weights(curve, config.flat_price)
    except PriceError as exc:
        raise PipelineError(f"prices: {exc}", EXIT_DATA)


def load_models(models_dir: Path) -> list[ClusterModel]:
    if not models_dir.is_dir():
        raise PipelineError(f"models directory not found: {models_dir}", EXIT_CONFIG)
    models = []
    for p in sorted(models_dir.glob("*__c*.json")):
        with open(p, encoding="utf-8") as fh:
            models.append(ClusterModel.from_dict(json.load(fh)))
    if not models:
        raise PipelineError(f"no cluster models in {models_dir}", EXIT_CONFIG)
    return models


def _by_industry(items, key):
    out = defaultdict(list)
    for it in items:
        out[key(it)].append(it)
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# build-models


def fit_industry(sets: Sequence[ProfileSet], industry: str, k_max: int = 5, linkage: str = "average",
                 provenance: dict | None = None):
    """Cluster one industry's businesses and return (models, extras).

    Fewer than three businesses cannot be silhouette-validated; they form a
    single cluster.
    """
    prov = dict(provenance or {})
    prov.update(linkage=linkage, k_max=k_max, n_businesses=len(sets))
    features = FeatureMatrix.from_sets(sets)
    extras = {"features": features, "assignment": None, "diagnostics": None}
    if len(sets) >= 3:
        std = standardize(features)
        assignment, diag = select_k(proximity(std), k_max, linkage)
        extras.update(assignment=assignment, diagnostics=diag, standardized=std)
        labels = assignment.labels
        prov.update(selected_k=assignment.k, silhouette_mean=diag.mean,
                    silhouette_by_k={str(k): v for k, v in diag.mean_by_k.items()})
    else:
        labels = np.zeros(len(sets), dtype=int)
        prov.update(selected_k=1, silhouette_mean=None, silhouette_by_k={})
    return build_cluster_models(sets, labels, industry, prov), extras


@dataclass
class BuildResult:
    models: list[ClusterModel]
    manifest: dict
    weights: IncentiveWeights | None = None
    thresholds: dict = field(default_factory=dict)


def cmd_build_models(config: PipelineConfig) -> BuildResult:
    man = _Manifest("build-models", config)
    readings = _require(config.path(config.readings), "readings file")
    man.add_input("readings", readings)
    man.add_input("prices", config.path(config.prices))
    parsed = _read_rows(readings)
    sets, report = load_profile_sets(parsed.rows, config.season, config.day_class, config.industries)
    out, models_dir = config.out / "build", config.models
    report_doc = report.to_dict() | {"rejected_rows": [r.__dict__ for r in parsed.rejects]}
    write_json(out / "cleaning_report.json", report_doc)
    man.data["counts"].update(rows=parsed.n_rows, rejected_rows=len(parsed.rejects),
                              days_kept=report.days_kept, days_dropped=len(report.dropped),
                              businesses=len(sets))
    if not sets:
        man.write(out / "manifest.json")
        raise PipelineError("no usable profiles after cleaning and calendar filtering", EXIT_DATA)

    weights = load_weights(config)
    season = [d.isoformat() if d else None for d in config.season]
    models: list[ClusterModel] = []
    per_industry = {}
    for industry, group in _by_industry(sets, lambda s: s.industry_label).items():
        ms, extras = fit_industry(group, industry, config.k_max, config.linkage,
                                  {"season": season, "day_class": config.day_class,
                                   "confidence": config.confidence})
        models.extend(ms)
        per_industry[industry] = {"businesses": len(group), "clusters": len(ms),
                                  "selected_k": ms[0].provenance["selected_k"]}
        _write_build_extras(out, industry, group, ms, extras, config.plots)

    models_dir.mkdir(parents=True, exist_ok=True)
    for stale in models_dir.glob("*__c*.json"):
        stale.unlink()
    for m in models:
        write_atomic(models_dir / model_filename(m), m.to_json())

    thresholds = {"vsp_anomalous": config.vsp_anomalous, "wivs_percentile": config.wivs_percentile,
                  "wivs_incentive": None}
    if weights is not None:
        write_atomic(models_dir / "weights.json", weights.to_json())
        by_ind = _by_industry(models, lambda m: m.industry_label)
        train = [score_business(s, by_ind[s.industry_label], weights, Thresholds(),
                                config.confidence, config.asd_floor) for s in sets]
        thresholds["wivs_incentive"] = percentile_threshold(train, config.wivs_percentile)
        if config.plots:
            from .plotting import plot_price_weights
            plot_price_weights(np.asarray(weights.provenance["csp"]), weights.wsp,
                               out / "figures" / "price_weights.png")
    write_json(models_dir / "thresholds.json", thresholds)
    man.data["counts"]["industries"] = per_industry
    man.data["counts"]["models"] = len(models)
    manifest = man.write(out / "manifest.json")
    log.info("built %d models for %d industries", len(models), len(per_industry))
    return BuildResult(models, manifest, weights, thresholds)


def _write_build_extras(out: Path, industry: str, sets, models, extras, plots: bool):
    name = slug(industry)
    fm: FeatureMatrix = extras["features"]
    buf = io.StringIO()
    fm.write_csv(buf)
    write_atomic(out / f"features_{name}.csv", buf.getvalue())
    assignment = extras["assignment"]
    if assignment is not None:
        from .cluster import linkage_trace
        full = linkage_trace(proximity(extras["standardized"]), assignment.linkage)
        write_csv(out / f"merges_{name}.csv", ["step", "cluster_a", "cluster_b", "distance", "size"],
                  [(i, m.cluster_a, m.cluster_b, m.distance, m.size) for i, m in enumerate(full)])
        diag = extras["diagnostics"]
        write_csv(out / f"silhouette_{name}.csv", ["k", "mean_silhouette", "selected"],
                  [(k, v, int(k == diag.selected_k)) for k, v in diag.mean_by_k.items()])
    write_csv(out / f"labels_{name}.csv", ["business_id", "cluster_id"],
              [(bid, m.cluster_id) for m in models for bid in m.member_ids])
    if plots:
        from .plotting import plot_cluster_models
        plot_cluster_models(sets, models, out / "figures" / f"clusters_{name}.png", title=industry)


# ---------------------------------------------------------------------------
# redteam


def _attack_dates(config: PipelineConfig, n_days: int, fallback: date | None = None) -> list[date]:
    start = config.effective_score_season()[0] or fallback
    if start is None:
        raise PipelineError("attack dates need a score_season start", EXIT_CONFIG)
    return calendar_days(start, n_days, config.day_class)


def _target_model(spec: AttackSpec, models: Sequence[ClusterModel]) -> ClusterModel:
    for m in models:
        if spec.target_business in m.member_ids:
            return m
    raise PipelineError(f"attack target {spec.target_business!r} is not a member of any model",
                        EXIT_CONFIG)


def attack_fixture_rows(config: PipelineConfig, models: Sequence[ClusterModel],
                        weights: IncentiveWeights | None, fallback_start: date | None = None):
    """Ingest-schema rows for every configured attack, with the cost check on each RCSA."""
    rows, checks = [], []
    for spec in config.attacks:
        baseline = _target_model(spec, models)
        try:
            recs = attack_records(spec, weights, baseline,
                                  _attack_dates(config, spec.n_days, fallback_start))
        except AttackError as exc:
            raise PipelineError(f"attack {spec.business_id}: {exc}", EXIT_CONFIG)
        if spec.kind == "rcsa" and spec.energy_preservation:
            csp = np.asarray(weights.provenance.get("csp", weights.flat_price * (1 + weights.wsp)))
            cost, base = priced_cost(recs[0][3], csp), priced_cost(baseline.ac, csp)
            if not cost < base:
                raise PipelineError(f"{spec.business_id}: attack is not cheaper than its baseline",
                                    EXIT_DATA)
            checks.append({"business_id": spec.business_id, "attack_cost": cost, "baseline_cost": base})
        rows.extend(recs)
    return rows, checks


def cmd_redteam(config: PipelineConfig, models_dir: Path | None = None) -> dict:
    man = _Manifest("redteam", config)
    if not config.attacks:
        raise PipelineError("no [[attacks]] configured", EXIT_CONFIG)
    models = load_models(models_dir or config.models)
    weights = load_weights(config) or _stored_weights(models_dir or config.models)
    rows, checks = attack_fixture_rows(config, models, weights)
    out = config.out / "fixtures"
    buf = io.StringIO()
    write_wide_csv(buf, rows)
    write_atomic(out / "attacks.csv", buf.getvalue())
    man.data["counts"].update(attacks=len(config.attacks), rows=len(rows), cost_checks=checks)
    if config.plots and weights is not None:
        from .plotting import plot_attack_profiles
        for spec in config.attacks:
            if spec.kind == "rcsa":
                base = _target_model(spec, models)
                vec, _ = rcsa_vector(weights, base, spec.beta, spec.energy_preservation)
                plot_attack_profiles(base, {"rcsa": vec}, out / "figures" / f"{slug(spec.business_id)}.png")
    return man.write(out / "manifest.json")


def _stored_weights(models_dir: Path) -> IncentiveWeights | None:
    p = models_dir / "weights.json"
    if not p.exists():
        return None
    with open(p, encoding="utf-8") as fh:
        return IncentiveWeights.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# score


@dataclass
class ScoreResult:
    reports: list[ScoreReport]
    errors: list[dict]
    manifest: dict
    exit_code: int = EXIT_OK


def cmd_score(config: PipelineConfig, models_dir: Path | None = None) -> ScoreResult:
    man = _Manifest("score", config)
    models_dir = models_dir or config.models
    models = load_models(models_dir)
    weights = load_weights(config) or _stored_weights(models_dir)
    if weights is None:
        raise PipelineError("no prices configured and no weights.json next to the models", EXIT_CONFIG)
    inbound = _require(config.path(config.score_readings or config.readings), "score readings file")
    man.add_input("score_readings", inbound)
    man.add_input("prices", config.path(config.prices))
    out = config.out / "report"
    parsed = _read_rows(inbound)

    attack_ids: list[str] = []
    rows = list(parsed.rows)
    if config.attacks:
        first = min((r.date for r in parsed.rows), default=None)
        att_rows, checks = attack_fixture_rows(config, models, weights, first)
        buf = io.StringIO()
        write_wide_csv(buf, att_rows)
        write_atomic(out / "attacks.csv", buf.getvalue())
        # attacks re-enter through the same parser as real readings
        rows.extend(_read_rows(out / "attacks.csv").rows)
        attack_ids = [s.business_id for s in config.attacks]
        man.data["counts"]["cost_checks"] = checks

    sets, report = load_profile_sets(rows, config.effective_score_season(), config.day_class,
                                     config.industries)
    write_json(out / "cleaning_report.json", report.to_dict())
    order = {bid: i for i, bid in enumerate(attack_ids)}
    sets.sort(key=lambda s: (s.business_id in order, order.get(s.business_id, 0), s.business_id))

    thr = _thresholds(config, models_dir)
    by_ind = _by_industry(models, lambda m: m.industry_label)
    reports, errors = [], []
    for s in sets:
        if s.industry_label not in by_ind:
            errors.append({"business_id": s.business_id, "industry": s.industry_label,
                           "error": "no model for industry"})
            continue
        reports.append(score_business(s, by_ind[s.industry_label], weights, thr,
                                      config.confidence, config.asd_floor))

    _write_score_outputs(out, reports, errors, attack_ids, config)
    man.data["counts"].update(businesses=len(sets), scored=len(reports), errors=len(errors),
                              days_kept=report.days_kept, days_dropped=len(report.dropped),
                              thresholds={"vsp_anomalous": thr.vsp_anomalous,
                                          "wivs_incentive": thr.wivs_incentive},
                              flags={lvl: sum(r.flag == lvl for r in reports)
                                     for lvl in ("none", "anomalous", "incentive-flagged")})
    if not sets:
        log.warning("no inbound businesses to score")
    code = EXIT_DATA if errors and not reports else EXIT_OK
    return ScoreResult(reports, errors, man.write(out / "manifest.json"), code)


def _thresholds(config: PipelineConfig, models_dir: Path) -> Thresholds:
    if config.wivs_incentive != "auto":
        return Thresholds(config.vsp_anomalous, float(config.wivs_incentive))
    p = models_dir / "thresholds.json"
    wivs_cut = None
    if p.exists():
        with open(p, encoding="utf-8") as fh:
            wivs_cut = json.load(fh).get("wivs_incentive")
    return Thresholds(config.vsp_anomalous, float("inf") if wivs_cut is None else float(wivs_cut))


def _write_score_outputs(out: Path, reports, errors, attack_ids, config: PipelineConfig):
    header = [*REPORT_COLUMNS, "error"]
    table = [[*(r.row()[c] for c in REPORT_COLUMNS), ""] for r in reports]
    table += [[e["business_id"], e["industry"], "", "", "", "", "", "error", e["error"]] for e in errors]
    write_csv(out / "scores.csv", header, table)
    write_json(out / "scores.json", {"reports": [r.to_dict() for r in reports], "errors": errors})
    if config.export_masks:
        for r in reports:
            write_csv(out / "masks" / f"{slug(r.business_id)}.csv", ["day", *range(1, 49)],
                      [(i, *row) for i, row in enumerate(r.mask.vsc.astype(int).tolist())])
    groups = _by_industry(reports, lambda r: (r.industry_label, r.cluster_id))
    for (industry, cid), rs in groups.items():
        stem = f"series_{slug(industry)}_c{cid}"
        write_csv(out / f"{stem}.csv", ["business_id", "vsp", "isc", "wivs", "is_attack"],
                  [(r.business_id, r.vsp, r.isc, r.wivs, int(r.business_id in attack_ids)) for r in rs])
        if config.plots:
            from .plotting import plot_score_triptych
            plot_score_triptych(rs, out / "figures" / f"{stem}.png",
                                f"{industry} cluster {cid + 1}", highlight=attack_ids)


# ---------------------------------------------------------------------------
# synth


def cmd_synth(config: PipelineConfig) -> dict:
    """Write synthetic readings (training and scoring seasons) and regional prices."""
    man = _Manifest("synth", config)
    sc = config.synth
    train_path = config.path(config.readings)
    if train_path is None:
        raise PipelineError("synth needs input.readings as its output path", EXIT_CONFIG)
    train_start = config.season[0] or date(2009, 6, 1)
    score_start = config.effective_score_season()[0] or date(2010, 6, 1)

    def population(start, seed_offset):
        records, truth = [], []
        for i, ind in enumerate(sc.industries):
            spec = SyntheticPopulationSpec(
                archetypes={a: ARCHETYPES[a] for a in ind.archetypes}, n_businesses=ind.n_businesses,
                noise_std=sc.noise_std, n_days=sc.n_days, seed=config.seed * 1000 + seed_offset + i,
                industry_label=ind.label, start=start,
                day_class=config.day_class,
                id_prefix=f"{slug(ind.label)}-")
            pop = synthesize_population(spec)
            records.extend(pop.raw)
            truth.extend((s.business_id, ind.label, t) for s, t in zip(pop.sets, pop.truth))
        return records, truth

    written = {}
    recs, truth = population(train_start, 0)
    buf = io.StringIO()
    write_wide_csv(buf, recs)
    written["readings"] = write_atomic(train_path, buf.getvalue())
    write_csv(train_path.with_name(train_path.stem + "_truth.csv"),
              ["business_id", "industry_label", "archetype"], truth)
    score_path = config.path(config.score_readings)
    if score_path is not None and score_path != train_path:
        recs, truth = population(score_start, 500)
        buf = io.StringIO()
        write_wide_csv(buf, recs)
        written["score_readings"] = write_atomic(score_path, buf.getvalue())
    price_path = config.path(config.prices)
    if price_path is not None:
        ps, pe = config.effective_price_season()
        rows = synthesize_prices(regions=sc.price_regions, start=ps or train_start,
                                 n_days=sc.price_days, seed=config.seed)
        written["prices"] = write_csv(price_path, ["region", "date", *[f"p{i:02d}" for i in range(1, 49)]],
                                      [(r, d.isoformat(), *map(float, v)) for r, d, v in rows])
    man.data["outputs"] = {k: {"path": str(p), "sha256": sha256(p)} for k, p in written.items()}
    return man.write(config.out / "synth_manifest.json")
