"""Statistical evaluation of reconstruction and saliency results.

Percentile good/bad grouping, the KNN/RBN dominance split on percentage
error difference, the sparse single-neighbor RBN report, plain histograms,
and Lin's concordance plus Pearson correlation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, DegenerateInputError

GOOD, BAD, MIDDLE = "good", "bad", "middle"
SIMILAR, KNN_DOMINANT, RBN_DOMINANT = "similar", "knn-dominant", "rbn-dominant"


def percentile_groups(errors: np.ndarray, low_pct: float = 10,
                      high_pct: float = 90) -> np.ndarray:
    """Label each record good/bad/middle by its reconstruction error rank.

    The lowest floor(low_pct% * M) errors are good, the highest
    floor((100-high_pct)% * M) are bad, ties broken by record order, so
    |good| == |bad| for symmetric percentiles.
    """
    errors = np.asarray(errors, dtype=np.float64)
    m = len(errors)
    if m < 10:
        raise ValueError(f"need at least 10 records, got {m}")
    n_good = int(math.floor(low_pct / 100.0 * m))
    n_bad = int(math.floor((100.0 - high_pct) / 100.0 * m))
    order = np.argsort(errors, kind="stable")
    labels = np.full(m, MIDDLE, dtype=object)
    labels[order[:n_good]] = GOOD
    if n_bad:
        labels[order[-n_bad:]] = BAD
    return labels


def dominance_groups(knn_errors: np.ndarray, rbn_errors: np.ndarray,
                     threshold_pct: float = 80,
                     eps: float = 1e-300) -> np.ndarray:
    """Label grid points similar / knn-dominant / rbn-dominant.

    Uses the absolute percentage difference |eK - eR| / min(eK, eR) * 100
    (zero when both errors agree, min guarded by eps); points at or below
    the nearest-rank threshold_pct percentile are similar, the rest go to
    whichever method won.
    """
    ek = np.asarray(knn_errors, dtype=np.float64)
    er = np.asarray(rbn_errors, dtype=np.float64)
    if ek.shape != er.shape:
        raise AlignmentError(f"error fields differ in shape: "
                             f"{ek.shape} vs {er.shape}")
    diff = np.abs(ek - er)
    lo = np.minimum(ek, er)
    pct = np.where(diff == 0, 0.0, diff / np.maximum(lo, eps) * 100.0)
    thr = nearest_rank_percentile(pct, threshold_pct)
    labels = np.full(len(pct), SIMILAR, dtype=object)
    dominant = pct > thr
    labels[dominant & (ek < er)] = KNN_DOMINANT
    labels[dominant & (ek >= er)] = RBN_DOMINANT
    return labels


def nearest_rank_percentile(values: np.ndarray, pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct% * M)-th smallest value."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    m = len(values)
    if m == 0:
        raise ValueError("empty input")
    rank = max(1, int(math.ceil(pct / 100.0 * m)))
    return float(values[min(rank, m) - 1])


@dataclass(frozen=True)
class SparseRbnSummary:
    sparse_fraction: float
    n_sparse: int
    mean_knn_error_sparse: float
    mean_rbn_error_sparse: float
    mean_knn_error_rest: float
    mean_rbn_error_rest: float


def sparse_rbn_report(rbn_errors, rbn_counts, knn_errors) -> SparseRbnSummary:
    """Compare KNN and RBN errors on points where RBN found one neighbor
    (the sparse fallback regions) and on the complement."""
    rbn_errors = np.asarray(rbn_errors, dtype=np.float64)
    knn_errors = np.asarray(knn_errors, dtype=np.float64)
    counts = np.asarray(rbn_counts)
    if not (len(rbn_errors) == len(knn_errors) == len(counts)):
        raise AlignmentError("record sets must cover identical grid points")
    sparse = counts == 1
    rest = ~sparse

    def _mean(x, m):
        return float(np.mean(x[m])) if m.any() else float("nan")

    return SparseRbnSummary(
        sparse_fraction=float(sparse.mean()) if len(counts) else 0.0,
        n_sparse=int(sparse.sum()),
        mean_knn_error_sparse=_mean(knn_errors, sparse),
        mean_rbn_error_sparse=_mean(rbn_errors, sparse),
        mean_knn_error_rest=_mean(knn_errors, rest),
        mean_rbn_error_rest=_mean(rbn_errors, rest),
    )


def ccc(x, y) -> float:
    """Lin's concordance correlation: 2 cov / (var x + var y + bias^2).

    Population (1/n) moments; penalizes scale and location bias, unlike
    Pearson. Inputs of length < 3 or with zero variance raise.
    """
    x, y, vx, vy, cov, mx, my = _moments(x, y)
    return float(2.0 * cov / (vx + vy + (mx - my) ** 2))


def pcc(x, y) -> tuple[float, float]:
    """Pearson correlation and its two-sided p-value.

    The p-value uses the normal approximation of the t statistic
    (fine at the sample sizes seen here, thousands of points).
    """
    x, y, vx, vy, cov, _, _ = _moments(x, y)
    r = float(cov / math.sqrt(vx * vy))
    r = max(-1.0, min(1.0, r))
    n = len(x)
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = math.erfc(abs(t) / math.sqrt(2.0))
    return r, p


def _moments(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1D of equal length")
    if len(x) < 3:
        raise ValueError("need at least 3 samples")
    mx = float(np.mean(x))
    my = float(np.mean(y))
    dx = x - mx
    dy = y - my
    vx = float(np.mean(dx * dx))
    vy = float(np.mean(dy * dy))
    if vx <= 0.0 or vy <= 0.0:
        raise DegenerateInputError("zero variance input")
    cov = float(np.mean(dx * dy))
    return x, y, vx, vy, cov, mx, my


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    total: int
    overflow: int


def histogram(values, n_bins: int, value_range) -> Histogram:
    """Left-closed right-open bins (last bin closed); out-of-range values
    land in the overflow counter, not the counts."""
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    values = np.asarray(values, dtype=np.float64)
    counts, edges = np.histogram(values, bins=n_bins, range=value_range)
    total = int(counts.sum())
    return Histogram(edges, counts.astype(np.int64), total,
                     overflow=int(len(values) - total))
