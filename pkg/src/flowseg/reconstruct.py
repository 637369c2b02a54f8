"""Velocity reconstruction at grid points from neighbor segments.

Each neighbor contributes the vector derived from its segment (direction
times speed, or the central-difference mean over the segment and its
streamline neighbors); contributions are combined with normalized
uniform, Gaussian, or inverse-squared-distance weights computed from the
stored search-metric distances. Reconstruction error against ground truth
is the plain vector-difference norm; the normalized variant exists but is
off by default because it blows up wherever the true speed is small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyNeighborhoodError
from .field import GridField, sample_many
from .neighborhood import (IcosaBins, build_icosa_bins,
                           segment_bin_masks_csr)
from .search import (DistanceMetric, Neighborhood, NeighborhoodBatch,
                     SearchConfig, SegmentIndex, knn_batch, rbn_batch)
from .tracer import SegmentSet, length_epsilon

WEIGHT_KINDS = ("uniform", "gaussian", "inverse-distance")
VECTOR_MODES = ("direct", "central-difference")


@dataclass(frozen=True)
class WeightScheme:
    """Weighting of neighbor vectors; epsilon guards zero distances."""

    kind: str = "inverse-distance"
    sigma: float | None = None   # Gaussian only; None = per-query avg dist
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def segment_vectors(segs: SegmentSet, mode: str = "direct") -> np.ndarray:
    """Per-segment reconstruction vectors.

    direct: direction * speed. central-difference: mean of the direct
    vectors of the predecessor, the segment, and the successor on the same
    streamline; segments missing either neighbor fall back to direct.
    """
    if mode not in VECTOR_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    direct = segs.direction * segs.speed[:, None]
    if mode == "direct" or len(segs) == 0:
        return direct
    out = direct.copy()
    sl = segs.streamline_ids
    ix = segs.index_on_curve
    # neighbors along a streamline are adjacent in global-id order; a
    # dropped degenerate segment breaks the index chain and disables the
    # central difference there
    prev_ok = np.zeros(len(segs), dtype=bool)
    next_ok = np.zeros(len(segs), dtype=bool)
    prev_ok[1:] = (sl[1:] == sl[:-1]) & (ix[1:] == ix[:-1] + 1)
    next_ok[:-1] = (sl[:-1] == sl[1:]) & (ix[:-1] == ix[1:] - 1)
    both = prev_ok & next_ok
    idx = np.nonzero(both)[0]
    out[idx] = (direct[idx - 1] + direct[idx] + direct[idx + 1]) / 3.0
    return out


def segment_vector(seg, mode: str = "direct", segments: SegmentSet | None = None):
    """Vector for one segment; central-difference needs the segment set."""
    if mode == "direct":
        return seg.direction * seg.speed
    if segments is None:
        raise ValueError("central-difference needs the segment set")
    return segment_vectors(segments, mode)[seg.global_id]


def neighborhood_weights(distances: np.ndarray, scheme: WeightScheme) -> np.ndarray:
    """Normalized weights for one neighborhood (sum exactly rescaled to 1)."""
    d = np.maximum(np.asarray(distances, dtype=np.float64), scheme.epsilon)
    n = len(d)
    if n == 0:
        raise EmptyNeighborhoodError("weights of empty neighborhood")
    if scheme.kind == "uniform":
        w = np.ones(n)
    elif scheme.kind == "inverse-distance":
        w = 1.0 / (d * d)
    else:
        sigma = scheme.sigma if scheme.sigma is not None else float(np.mean(d))
        sigma = max(sigma, scheme.epsilon)
        # shift by the smallest distance so dense far-away neighborhoods
        # cannot underflow every weight to zero
        d2 = d * d
        w = np.exp(-(d2 - d2.min()) / (2.0 * sigma * sigma))
    return w / w.sum()


def reconstruct_vector(nb: Neighborhood, scheme: WeightScheme,
                       mode: str = "direct",
                       vectors: np.ndarray | None = None) -> np.ndarray:
    """Weighted combination of the neighbor vectors (weights sum to 1)."""
    if len(nb) == 0:
        raise EmptyNeighborhoodError("reconstruct_vector of empty neighborhood")
    if vectors is None:
        vectors = segment_vectors(nb.segments, mode)
    w = neighborhood_weights(nb.distances, scheme)
    return w @ vectors[nb.seg_ids]


@dataclass(frozen=True)
class ReconstructionRecord:
    grid_point: np.ndarray
    reconstructed: np.ndarray
    truth: np.ndarray
    error: float
    n_neighbors: int
    avg_distance: float
    uniformity: float


class ReconstructionSet:
    """Array-backed reconstruction records, one per grid point."""

    def __init__(self, grid_points, reconstructed, truth, errors,
                 n_neighbors, avg_distance, uniformity):
        self.grid_points = grid_points
        self.reconstructed = reconstructed
        self.truth = truth
        self.errors = errors
        self.n_neighbors = n_neighbors
        self.avg_distance = avg_distance
        self.uniformity = uniformity

    def __len__(self) -> int:
        return len(self.errors)

    def __getitem__(self, i: int) -> ReconstructionRecord:
        return ReconstructionRecord(
            self.grid_points[i], self.reconstructed[i], self.truth[i],
            float(self.errors[i]), int(self.n_neighbors[i]),
            float(self.avg_distance[i]), float(self.uniformity[i]))


def summarize(recs: ReconstructionSet, normalized: bool = False,
              eps_speed: float = 0.0) -> dict:
    """e_mean plus distribution stats; the normalized error (off by
    default) only averages points whose true speed exceeds eps_speed."""
    errors = recs.errors
    summary = {
        "e_mean": float(np.mean(errors)) if len(recs) else float("nan"),
        "e_p10": float(np.percentile(errors, 10)) if len(recs) else float("nan"),
        "e_p50": float(np.percentile(errors, 50)) if len(recs) else float("nan"),
        "e_p90": float(np.percentile(errors, 90)) if len(recs) else float("nan"),
        "mean_n_neighbors": float(np.mean(recs.n_neighbors)) if len(recs) else 0.0,
        "mean_avg_distance": float(np.mean(recs.avg_distance)) if len(recs) else 0.0,
        "mean_uniformity": float(np.mean(recs.uniformity)) if len(recs) else 0.0,
        "min_uniformity": float(np.min(recs.uniformity)) if len(recs) else 0.0,
        "n_records": len(recs),
    }
    if normalized:
        speed = np.linalg.norm(recs.truth, axis=1)
        ok = speed > eps_speed
        summary["e_mean_normalized"] = (
            float(np.mean(errors[ok] / speed[ok])) if ok.any() else float("nan"))
        summary["n_normalized"] = int(ok.sum())
    return summary


def popcount_u32(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint32).copy()
    v -= (v >> np.uint32(1)) & np.uint32(0x55555555)
    v = (v & np.uint32(0x33333333)) + ((v >> np.uint32(2)) & np.uint32(0x33333333))
    v = (v + (v >> np.uint32(4))) & np.uint32(0x0F0F0F0F)
    return ((v * np.uint32(0x01010101)) >> np.uint32(24)).astype(np.int64)


def csr_weights(indptr: np.ndarray, dists: np.ndarray,
                scheme: WeightScheme) -> np.ndarray:
    """Row-normalized weights for CSR-packed neighborhoods."""
    rowlen = np.diff(indptr)
    rowid = np.repeat(np.arange(len(rowlen)), rowlen)
    d = np.maximum(dists, scheme.epsilon)
    if scheme.kind == "uniform":
        w = np.ones_like(d)
    elif scheme.kind == "inverse-distance":
        w = 1.0 / (d * d)
    else:
        if scheme.sigma is not None:
            sigma = np.full(len(rowlen), float(scheme.sigma))
        else:
            sums = _row_reduce(np.add, d, indptr)
            sigma = np.divide(sums, rowlen, out=np.zeros(len(rowlen)),
                              where=rowlen > 0)
        sigma = np.maximum(sigma, scheme.epsilon)
        d2 = d * d
        base = _row_reduce(np.minimum, d2, indptr)
        w = np.exp(-(d2 - base[rowid]) / (2.0 * sigma[rowid] ** 2))
    wsum = _row_reduce(np.add, w, indptr)
    return w / wsum[rowid]


def _row_reduce(ufunc, values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    """Per-row ufunc reduction over a CSR layout; empty rows give the
    ufunc identity (0 for add, +inf for minimum)."""
    n = len(indptr) - 1
    identity = 0.0 if ufunc is np.add else np.inf
    out = np.full(n, identity)
    nonempty = indptr[:-1] < indptr[1:]
    if len(values) and nonempty.any():
        # consecutive nonempty starts are strictly increasing and the empty
        # rows between them span zero entries, so reduceat over only the
        # nonempty starts yields exactly the per-row reductions
        out[nonempty] = ufunc.reduceat(values, indptr[:-1][nonempty])
    return out


def reconstruct_batch(batch: NeighborhoodBatch, truth: np.ndarray,
                      scheme: WeightScheme, mode: str,
                      bins: IcosaBins | None,
                      eps_len: float) -> ReconstructionSet:
    """Records for precomputed neighborhoods (queries = grid points)."""
    segs = batch.segments
    vectors = segment_vectors(segs, mode)
    n = len(batch)
    counts = batch.counts()
    nonempty = counts > 0
    if bins is None:
        bins = build_icosa_bins()
    masks = segment_bin_masks_csr(bins, batch.queries, batch.indptr,
                                  batch.gids, segs.a, segs.b, eps_len)
    w = csr_weights(batch.indptr, batch.dists, scheme)
    contrib = w[:, None] * vectors[batch.gids]
    recon = np.zeros((n, 3))
    for c in range(3):
        recon[:, c] = _row_reduce(np.add, np.ascontiguousarray(contrib[:, c]),
                                  batch.indptr)
    sum_d = _row_reduce(np.add, batch.dists, batch.indptr)
    avg = np.divide(sum_d, counts, out=np.zeros(n), where=nonempty)
    flags = _row_reduce_or(masks, batch.indptr)
    uni = popcount_u32(flags) / 20.0
    errors = np.linalg.norm(recon - truth, axis=1)
    return ReconstructionSet(batch.queries, recon, truth, errors,
                             counts.astype(np.int64), avg, uni)


def _row_reduce_or(masks: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    n = len(indptr) - 1
    out = np.zeros(n, dtype=np.uint32)
    nonempty = indptr[:-1] < indptr[1:]
    if len(masks) and nonempty.any():
        out[nonempty] = np.bitwise_or.reduceat(masks, indptr[:-1][nonempty])
    return out


def reconstruct_field(field, index: SegmentIndex, cfg: SearchConfig,
                      scheme: WeightScheme | None = None,
                      mode: str = "direct",
                      bins: IcosaBins | None = None,
                      grid: GridField | None = None,
                      normalized_summary: bool = False):
    """Reconstruct at every node of the grid and compare to ground truth.

    Returns (ReconstructionSet, summary dict). `field` provides the truth;
    the query grid defaults to the field itself when it is a GridField.
    """
    if grid is None:
        if not isinstance(field, GridField):
            raise ValueError("analytic fields need an explicit query grid")
        grid = field
    if scheme is None:
        scheme = WeightScheme()
    pts = grid.node_positions()
    truth = sample_many(field, pts)
    if cfg.method == "knn":
        batch = knn_batch(index, pts, cfg)
    else:
        batch = rbn_batch(index, pts, cfg)
    eps_len = length_epsilon(index.bounds)
    recs = reconstruct_batch(batch, truth, scheme, mode, bins, eps_len)
    return recs, summarize(recs, normalized=normalized_summary)
