"""Point-centered neighbor search over streamline segments.

Three point-segment distance metrics (shortest, longest, average), a
median-split KD-tree over segment midpoints with merged segment bounding
boxes per node, and the two modified queries:

* KNN with corner exclusion — neighbors farther than the query's distance
  to the nearest domain corner are dropped; if that empties the result,
  only the single nearest neighbor is retained.
* RBN with nearest fallback — all segments strictly within r; when none
  qualify, the single nearest segment is returned instead.

Ties are broken by ascending segment global id everywhere, so results are
independent of the tree layout and match a linear scan.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EmptyIndexError, OutOfDomainError
from .field import DomainBounds
from .tracer import Segment, SegmentSet

DEFAULT_LEAF_SIZE = 16


class DistanceMetric(enum.Enum):
    SHORTEST = "shortest"
    LONGEST = "longest"
    AVERAGE = "average"

    @property
    def code(self) -> int:
        return {"shortest": 0, "longest": 1, "average": 2}[self.value]


@dataclass(frozen=True)
class SearchConfig:
    """Method ("knn" with k, or "rbn" with r), metric, and modifications."""

    method: str
    metric: DistanceMetric
    k: int | None = None
    r: float | None = None
    corner_exclusion: bool = True
    nearest_fallback: bool = True

    def __post_init__(self):
        if self.method not in ("knn", "rbn"):
            raise ValueError(f"method must be 'knn' or 'rbn', got {self.method!r}")
        if self.method == "knn":
            if self.k is None or self.k < 1:
                raise ValueError("knn needs k >= 1")
        else:
            if self.r is None or self.r <= 0:
                raise ValueError("rbn needs r > 0")

    @property
    def parameter(self) -> float:
        return float(self.k if self.method == "knn" else self.r)


def knn_config(k: int, metric=DistanceMetric.SHORTEST, *,
               corner_exclusion: bool = True) -> SearchConfig:
    return SearchConfig("knn", metric, k=int(k),
                        corner_exclusion=corner_exclusion)


def rbn_config(r: float, metric=DistanceMetric.SHORTEST, *,
               nearest_fallback: bool = True) -> SearchConfig:
    return SearchConfig("rbn", metric, r=float(r),
                        nearest_fallback=nearest_fallback)


def point_segment_distance(p, s: Segment, m: DistanceMetric) -> float:
    """Distance from a point to one segment under a metric.

    shortest: exact point-to-segment distance (clamped projection);
    longest: the larger endpoint distance; average: their mean.
    """
    p = np.asarray(p, dtype=np.float64)
    return float(_kernels._segment_distance(
        p[0], p[1], p[2], s.a[0], s.a[1], s.a[2],
        s.b[0], s.b[1], s.b[2], m.code))


def point_segment_distance_many(pts: np.ndarray, segs: SegmentSet,
                                m: DistanceMetric) -> np.ndarray:
    """Pairwise (len(pts), len(segs)) distance matrix, vectorized."""
    pts = np.asarray(pts, dtype=np.float64)
    a, b = segs.a, segs.b
    pa = pts[:, None, :] - a[None, :, :]
    pb = pts[:, None, :] - b[None, :, :]
    da = np.linalg.norm(pa, axis=2)
    db = np.linalg.norm(pb, axis=2)
    dmax = np.maximum(da, db)
    if m is DistanceMetric.LONGEST:
        return dmax
    u = b - a
    l2 = np.sum(u * u, axis=1)
    t = np.einsum("qnc,nc->qn", pa, u) / np.where(l2 > 0, l2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * u[None, :, :]
    dmin = np.linalg.norm(closest - pts[:, None, :], axis=2)
    if m is DistanceMetric.SHORTEST:
        return dmin
    return 0.5 * (dmin + dmax)


@dataclass(frozen=True)
class Neighborhood:
    """Segments found for one query point, ascending by (distance, id)."""

    query: np.ndarray
    seg_ids: np.ndarray
    distances: np.ndarray
    metric: DistanceMetric
    segments: SegmentSet

    def __len__(self) -> int:
        return len(self.seg_ids)

    @property
    def entries(self) -> list[tuple[Segment, float]]:
        return [(self.segments[int(g)], float(d))
                for g, d in zip(self.seg_ids, self.distances)]


class NeighborhoodBatch:
    """CSR-packed neighborhoods for many query points."""

    def __init__(self, queries, indptr, gids, dists, metric, segments):
        self.queries = queries
        self.indptr = indptr
        self.gids = gids
        self.dists = dists
        self.metric = metric
        self.segments = segments

    def __len__(self) -> int:
        return len(self.queries)

    def counts(self) -> np.ndarray:
        return np.diff(self.indptr)

    def __getitem__(self, i: int) -> Neighborhood:
        s, e = self.indptr[i], self.indptr[i + 1]
        return Neighborhood(self.queries[i], self.gids[s:e].copy(),
                            self.dists[s:e].copy(), self.metric,
                            self.segments)


class SegmentIndex:
    """KD-tree over segments; immutable and safe for concurrent queries."""

    def __init__(self, segments: SegmentSet, bounds: DomainBounds,
                 leaf_size: int = DEFAULT_LEAF_SIZE):
        if len(segments) == 0:
            raise EmptyIndexError("cannot index zero segments")
        self.segments = segments
        self.bounds = bounds
        self.leaf_size = int(leaf_size)
        self._build()

    def _build(self):
        segs = self.segments
        n = len(segs)
        mid = 0.5 * (segs.a + segs.b)
        perm = np.arange(n, dtype=np.int64)
        seg_lo = np.minimum(segs.a, segs.b)
        seg_hi = np.maximum(segs.a, segs.b)
        left, right, start, end, lo_l, hi_l = [], [], [], [], [], []

        def rec(s: int, e: int) -> int:
            idx = len(left)
            left.append(-1)
            right.append(-1)
            start.append(s)
            end.append(e)
            p = perm[s:e]
            lo_l.append(seg_lo[p].min(axis=0))
            hi_l.append(seg_hi[p].max(axis=0))
            if e - s <= self.leaf_size:
                return idx
            m = mid[p]
            axis = int(np.argmax(m.max(axis=0) - m.min(axis=0)))
            half = (e - s) // 2
            order = np.argpartition(m[:, axis], half)
            perm[s:e] = p[order]
            left[idx] = rec(s, s + half)
            right[idx] = rec(s + half, e)
            return idx

        rec(0, n)
        self._left = np.array(left, dtype=np.int32)
        self._right = np.array(right, dtype=np.int32)
        self._start = np.array(start, dtype=np.int32)
        self._end = np.array(end, dtype=np.int32)
        self._lo = np.array(lo_l)
        self._hi = np.array(hi_l)
        self._perm = perm
        self._a = np.ascontiguousarray(segs.a[perm])
        self._b = np.ascontiguousarray(segs.b[perm])

    def __len__(self) -> int:
        return len(self.segments)

    # -- raw passes (no modifications) ------------------------------------

    def raw_topk(self, queries: np.ndarray, ks, metric: DistanceMetric):
        """Per query the min(k, n) nearest by (distance, gid), CSR-packed."""
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        n = len(self.segments)
        ks = np.broadcast_to(np.asarray(ks, dtype=np.int64), (len(queries),))
        ks = np.minimum(ks, n)
        indptr = np.zeros(len(queries) + 1, dtype=np.int64)
        np.cumsum(ks, out=indptr[1:])
        dists = np.empty(indptr[-1])
        gids = np.empty(indptr[-1], dtype=np.int64)
        _kernels.knn_fill(queries, self._a, self._b, self._left, self._right,
                          self._start, self._end, self._lo, self._hi,
                          self._perm, metric.code, ks, indptr, dists, gids)
        return indptr, gids, dists

    def raw_count(self, queries: np.ndarray, r: float,
                  metric: DistanceMetric):
        """Per query: #segments with distance < r, plus the nearest one."""
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        counts = np.empty(len(queries), dtype=np.int64)
        near_d = np.empty(len(queries))
        near_g = np.empty(len(queries), dtype=np.int64)
        _kernels.rbn_count(queries, self._a, self._b, self._left,
                           self._right, self._start, self._end, self._lo,
                           self._hi, self._perm, metric.code, float(r),
                           counts, near_d, near_g)
        return counts, near_d, near_g

    def _check_inside(self, queries: np.ndarray):
        inside = self.bounds.contains_many(queries)
        if not inside.all():
            bad = int(np.argmin(inside))
            raise OutOfDomainError(f"query {queries[bad]} outside bounds")

    def corner_distances(self, queries: np.ndarray) -> np.ndarray:
        """Distance from each query to the nearest of the 8 domain corners."""
        corners = self.bounds.corners
        diff = queries[:, None, :] - corners[None, :, :]
        return np.linalg.norm(diff, axis=2).min(axis=1)


def build_index(segments: SegmentSet, bounds: DomainBounds,
                leaf_size: int = DEFAULT_LEAF_SIZE) -> SegmentIndex:
    return SegmentIndex(segments, bounds, leaf_size)


def knn_batch(index: SegmentIndex, queries: np.ndarray,
              cfg: SearchConfig) -> NeighborhoodBatch:
    """Modified KNN for many queries at once."""
    if cfg.method != "knn":
        raise ValueError("knn_batch needs a knn SearchConfig")
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    index._check_inside(queries)
    indptr, gids, dists = index.raw_topk(queries, cfg.k, cfg.metric)
    if not cfg.corner_exclusion:
        return NeighborhoodBatch(queries, indptr, gids, dists, cfg.metric,
                                 index.segments)
    dcorner = index.corner_distances(queries)
    rowlen = np.diff(indptr)
    rowid = np.repeat(np.arange(len(queries)), rowlen)
    keep_counts = _prefix_at_most(indptr, dists, dcorner[rowid])
    keep_counts = np.maximum(keep_counts, 1)  # retain only the nearest
    return _take_prefixes(queries, indptr, gids, dists, keep_counts,
                          cfg.metric, index.segments)


def rbn_batch(index: SegmentIndex, queries: np.ndarray,
              cfg: SearchConfig) -> NeighborhoodBatch:
    """Modified RBN for many queries at once."""
    if cfg.method != "rbn":
        raise ValueError("rbn_batch needs an rbn SearchConfig")
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    index._check_inside(queries)
    counts, near_d, near_g = index.raw_count(queries, cfg.r, cfg.metric)
    fill = counts.copy()
    if cfg.nearest_fallback:
        fill = np.maximum(fill, 1)
    indptr, gids, dists = index.raw_topk(queries, fill, cfg.metric)
    return NeighborhoodBatch(queries, indptr, gids, dists, cfg.metric,
                             index.segments)


def knn(index: SegmentIndex, p, cfg: SearchConfig) -> Neighborhood:
    """The k nearest segments with the corner-exclusion modification."""
    p = np.asarray(p, dtype=np.float64)
    return knn_batch(index, p[None, :], cfg)[0]


def rbn(index: SegmentIndex, p, cfg: SearchConfig) -> Neighborhood:
    """All segments strictly within r, with the nearest fallback."""
    p = np.asarray(p, dtype=np.float64)
    return rbn_batch(index, p[None, :], cfg)[0]


def row_counts(indptr, flags) -> np.ndarray:
    """Per CSR row, the number of True entries (empty rows count 0)."""
    out = np.zeros(len(indptr) - 1, dtype=np.int64)
    nonempty = indptr[:-1] < indptr[1:]
    if len(flags) and nonempty.any():
        # bool reduceat would OR, not count
        out[nonempty] = np.add.reduceat(flags.astype(np.int64),
                                        indptr[:-1][nonempty])
    return out


def _prefix_at_most(indptr, dists, thresholds) -> np.ndarray:
    """Per CSR row, how many leading entries have value <= threshold.

    Rows are sorted ascending, so this is the kept-prefix length for the
    corner-exclusion rule. thresholds is per-entry (already expanded).
    """
    return row_counts(indptr, dists <= thresholds)


def prefix_below(indptr, dists, r) -> np.ndarray:
    """Per CSR row, how many leading entries are strictly below r."""
    return row_counts(indptr, dists < r)


def _take_prefixes(queries, indptr, gids, dists, keep, metric, segments):
    keep = np.minimum(keep, np.diff(indptr))
    new_indptr = np.zeros(len(keep) + 1, dtype=np.int64)
    np.cumsum(keep, out=new_indptr[1:])
    take = _prefix_take_indices(indptr, keep)
    return NeighborhoodBatch(queries, new_indptr, gids[take], dists[take],
                             metric, segments)


def _prefix_take_indices(indptr, keep) -> np.ndarray:
    """Flat indices selecting the first keep[i] entries of each CSR row."""
    total = int(keep.sum())
    out = np.empty(total, dtype=np.int64)
    new_starts = np.zeros(len(keep), dtype=np.int64)
    np.cumsum(keep[:-1], out=new_starts[1:])
    nz = keep > 0
    offs = np.arange(total) - np.repeat(new_starts[nz], keep[nz])
    out[:] = np.repeat(indptr[:-1][nz], keep[nz]) + offs
    return out
