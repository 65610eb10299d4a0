"""Agglomerative (bottom-up) clustering with silhouette-driven choice of k.

Clusters are merged one pair at a time from singletons. Between-cluster
distances are kept current with the Lance-Williams recurrences, so every
merge sees the proximity matrix as it would be recomputed from scratch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import FeatureMatrix
from .ingest import N_PERIODS, ProfileSet

LINKAGES = ("single", "complete", "average", "ward")
TIE_TOL = 1e-12


@dataclass(frozen=True)
class ProximityMatrix:
    distances: np.ndarray
    row_ids: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.distances.shape[0]


@dataclass(frozen=True)
class Merge:
    cluster_a: int
    cluster_b: int
    distance: float
    size: int


@dataclass
class ClusterAssignment:
    k: int
    labels: np.ndarray
    linkage: str
    merge_trace: list[Merge]

    @property
    def n(self) -> int:
        return len(self.labels)

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


@dataclass
class SilhouetteDiagnostics:
    per_point: np.ndarray
    mean_by_k: dict[int, float] = field(default_factory=dict)
    selected_k: int | None = None

    @property
    def mean(self) -> float:
        return float(self.per_point.mean())


def proximity(matrix: FeatureMatrix | np.ndarray) -> ProximityMatrix:
    """Exact pairwise Euclidean distances between feature rows."""
    if isinstance(matrix, FeatureMatrix):
        x, ids = np.asarray(matrix.rows, dtype=float), tuple(matrix.row_ids)
    else:
        x, ids = np.asarray(matrix, dtype=float), ()
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("proximity needs at least 2 rows")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature value")
    diff = x[:, None, :] - x[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    d.setflags(write=False)
    return ProximityMatrix(d, ids)


def _lance_williams(linkage, d_ai, d_bi, d_ab, na, nb, ni):
    if linkage == "single":
        return np.minimum(d_ai, d_bi)
    if linkage == "complete":
        return np.maximum(d_ai, d_bi)
    if linkage == "average":
        return (na * d_ai + nb * d_bi) / (na + nb)
    # ward, on unsquared distances
    sq = ((na + ni) * d_ai**2 + (nb + ni) * d_bi**2 - ni * d_ab**2) / (na + nb + ni)
    return np.sqrt(np.maximum(sq, 0.0))


def linkage_trace(prox: ProximityMatrix, linkage: str = "average") -> list[Merge]:
    """Run the merge loop to a single cluster and return all n - 1 merges.

    Original points carry ids 0..n-1; the cluster formed by merge j gets id
    n + j. Equal distances are resolved toward the lowest (a, b) id pair.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}; choose from {LINKAGES}")
    n = prox.n
    d = np.array(prox.distances, dtype=float)
    np.fill_diagonal(d, np.inf)
    ids = np.arange(n)
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    trace: list[Merge] = []
    for step in range(n - 1):
        sub = np.where(active[:, None] & active[None, :], d, np.inf)
        best = sub.min()
        ii, jj = np.nonzero(sub == best)
        pairs = sorted((min(ids[i], ids[j]), max(ids[i], ids[j]), i, j) for i, j in zip(ii, jj) if i != j)
        a_id, b_id, si, sj = pairs[0]
        na, nb = sizes[si], sizes[sj]
        new = _lance_williams(linkage, d[si], d[sj], best, na, nb, sizes)
        keep, drop = min(si, sj), max(si, sj)
        d[keep, :] = new
        d[:, keep] = new
        d[keep, keep] = np.inf
        d[drop, :] = np.inf
        d[:, drop] = np.inf
        active[drop] = False
        sizes[keep] = na + nb
        ids[keep] = n + step
        trace.append(Merge(int(a_id), int(b_id), float(best), int(na + nb)))
    return trace


def cut_trace(trace: Sequence[Merge], n: int, k: int) -> np.ndarray:
    """Labels after applying the first n - k merges.

    Labels are numbered 0..k-1 in order of each cluster's smallest member.
    """
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    parent = list(range(2 * n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for j, m in enumerate(trace[: n - k]):
        parent[find(m.cluster_a)] = n + j
        parent[find(m.cluster_b)] = n + j
    roots = [find(i) for i in range(n)]
    order: dict[int, int] = {}
    for r in roots:
        order.setdefault(r, len(order))
    return np.array([order[r] for r in roots], dtype=int)


def agglomerate(prox: ProximityMatrix, k: int, linkage: str = "average") -> ClusterAssignment:
    n = prox.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    trace = linkage_trace(prox, linkage)[: n - k]
    return ClusterAssignment(k, cut_trace(trace, n, k), linkage, trace)


def silhouette(prox: ProximityMatrix, labels: ClusterAssignment | np.ndarray) -> SilhouetteDiagnostics:
    """Per-point silhouette values; a point alone in its cluster scores 0."""
    lab = labels.labels if isinstance(labels, ClusterAssignment) else np.asarray(labels)
    uniq = np.unique(lab)
    if len(uniq) < 2:
        raise ValueError("silhouette undefined for a single cluster")
    d = prox.distances
    n = len(lab)
    # mean distance from each point to each cluster
    onehot = (lab[:, None] == uniq[None, :]).astype(float)
    counts = onehot.sum(axis=0)
    sums = d @ onehot
    own = np.searchsorted(uniq, lab)
    own_count = counts[own]
    s = np.zeros(n)
    for i in range(n):
        if own_count[i] <= 1:
            continue
        a = sums[i, own[i]] / (own_count[i] - 1)
        others = np.delete(np.arange(len(uniq)), own[i])
        b = np.min(sums[i, others] / counts[others])
        top = max(a, b)
        s[i] = 0.0 if top == 0 else (b - a) / top
    return SilhouetteDiagnostics(s)


def select_k(prox: ProximityMatrix, k_max: int = 5, linkage: str = "average"):
    """Pick the cut of the dendrogram with the largest mean silhouette.

    Candidates are k = 2..min(k_max, n - 1); on a tie (within 1e-12) the
    smaller k wins. Returns ``(assignment, diagnostics)``.
    """
    n = prox.n
    if n < 3:
        raise ValueError("select_k needs at least 3 points")
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    trace = linkage_trace(prox, linkage)
    best_k, best_mean, best_diag = None, -np.inf, None
    means: dict[int, float] = {}
    for k in range(2, min(k_max, n - 1) + 1):
        diag = silhouette(prox, cut_trace(trace, n, k))
        means[k] = diag.mean
        if diag.mean > best_mean + TIE_TOL:
            best_k, best_mean, best_diag = k, diag.mean, diag
    best_diag.mean_by_k = means
    best_diag.selected_k = best_k
    assignment = ClusterAssignment(best_k, cut_trace(trace, n, best_k), linkage, trace[: n - best_k])
    return assignment, best_diag


# ---------------------------------------------------------------------------
# cluster baseline models


@dataclass
class ClusterModel:
    industry_label: str
    cluster_id: int
    ac: np.ndarray
    asd: np.ndarray
    member_ids: list[str]
    provenance: dict = field(default_factory=dict)

    @property
    def n_members(self) -> int:
        return len(self.member_ids)

    def to_dict(self) -> dict:
        return {
            "industry": self.industry_label,
            "cluster_id": self.cluster_id,
            "ac": [float(v) for v in self.ac],
            "asd": [float(v) for v in self.asd],
            "members": list(self.member_ids),
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, obj: dict) -> "ClusterModel":
        ac, asd = np.asarray(obj["ac"], dtype=float), np.asarray(obj["asd"], dtype=float)
        if ac.shape != (N_PERIODS,) or asd.shape != (N_PERIODS,):
            raise ValueError("cluster model needs 48-value ac and asd")
        return cls(obj["industry"], int(obj["cluster_id"]), ac, asd,
                   list(obj["members"]), dict(obj.get("provenance", {})))


def build_cluster_models(sets: Sequence[ProfileSet], labels: ClusterAssignment | np.ndarray,
                         industry_label: str | None = None,
                         provenance: dict | None = None) -> list[ClusterModel]:
    """Average profile and per-period population std for each cluster.

    Statistics pool every business-day of the cluster's members, not the
    per-business representatives.
    """
    lab = labels.labels if isinstance(labels, ClusterAssignment) else np.asarray(labels)
    if len(lab) != len(sets):
        raise ValueError("one label per profile set required")
    models = []
    for cid in np.unique(lab):
        members = [s for s, l in zip(sets, lab) if l == cid]
        pool = np.vstack([s.matrix() for s in members])
        label = industry_label if industry_label is not None else members[0].industry_label
        models.append(ClusterModel(label, int(cid), pool.mean(axis=0), pool.std(axis=0),
                                   [s.business_id for s in members], dict(provenance or {})))
    return models
