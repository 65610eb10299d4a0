"""The 20-element load-profile descriptor and feature-matrix standardization."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .ingest import N_PERIODS, ProfileSet

FEATURE_NAMES = (
    "g1_mean", "g2_std", "g3_max", "g4_min", "g5_range", "g6_sum", "g7_skew", "g8_kurtosis",
    "q9_sum", "q10_sum", "q11_sum", "q12_sum",
    "q13_std", "q14_std", "q15_std", "q16_std",
    "i17_max_period", "i18_min_period", "i19_count_above_mean", "i20_count_below_mean",
)
N_FEATURES = len(FEATURE_NAMES)
QUARTER = N_PERIODS // 4


def profile_representative(pset: ProfileSet) -> np.ndarray:
    """Per-period mean of a business's normalized days."""
    if pset.n_days < 1:
        raise ValueError("no profiles")
    return pset.matrix().mean(axis=0)


def extract_features(vec) -> np.ndarray:
    """Compute the 20 features of a 48-period vector, in canonical order.

    Skew and kurtosis are population standardized moments (kurtosis as excess);
    both are 0 for a constant vector. Period indices are 1-based with ties
    resolved to the lowest index, and I19/I20 count periods strictly
    above/below the mean.
    """
    x = np.asarray(vec, dtype=float)
    if x.shape != (N_PERIODS,):
        raise ValueError(f"expected {N_PERIODS} values, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")

    mean = x.mean()
    dev = x - mean
    var = np.mean(dev**2)
    std = np.sqrt(var)
    if var > 0:
        skew = np.mean(dev**3) / var**1.5
        kurt = np.mean(dev**4) / var**2 - 3.0
    else:
        skew = kurt = 0.0
    blocks = x.reshape(4, QUARTER)

    out = np.empty(N_FEATURES)
    out[0:8] = mean, std, x.max(), x.min(), x.max() - x.min(), x.sum(), skew, kurt
    out[8:12] = blocks.sum(axis=1)
    out[12:16] = blocks.std(axis=1)
    out[16] = np.argmax(x) + 1
    out[17] = np.argmin(x) + 1
    out[18] = np.count_nonzero(x > mean)
    out[19] = np.count_nonzero(x < mean)
    return out


@dataclass
class FeatureMatrix:
    rows: np.ndarray
    row_ids: list[str]
    center: np.ndarray | None = None
    scale: np.ndarray | None = None

    @classmethod
    def from_sets(cls, sets: Sequence[ProfileSet]) -> "FeatureMatrix":
        rows = np.vstack([extract_features(profile_representative(s)) for s in sets])
        return cls(rows, [s.business_id for s in sets])

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["business_id", *FEATURE_NAMES])
        for bid, row in zip(self.row_ids, self.rows):
            w.writerow([bid, *(repr(float(v)) for v in row)])


def standardize(matrix: FeatureMatrix) -> FeatureMatrix:
    """Z-score every column (population std); constant columns become zeros."""
    x = np.asarray(matrix.rows, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("insufficient businesses")
    center = x.mean(axis=0)
    scale = x.std(axis=0)
    # relative guard: columns that are constant up to rounding stay at 0
    const = scale <= 1e-12 * np.maximum(1.0, np.abs(center))
    safe = np.where(const, 1.0, scale)
    z = (x - center) / safe
    z[:, const] = 0.0
    return FeatureMatrix(z, list(matrix.row_ids), center, np.where(const, 0.0, scale))
