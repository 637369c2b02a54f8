"""Per-segment saliency: weighted angular deviation of neighbor segments
(calculated) and circle-sampled field deviation (reference).

Calculated saliency queries neighbors at a segment's start point, drops
the segment itself and its same-streamline neighbors within a window,
weights the remaining neighbors by inverse squared start-point distance,
and averages the angles between orientations. Reference saliency samples
the ground-truth field on a circle perpendicular to the segment and
averages the angles to the segment orientation; its radius is either
fixed or follows the mean start-point distance of the found neighbors.

Angles are computed as atan2(|u x w|, u . w): identical in value to the
clamped-arccos form but stable near 0 and pi, so results stay in [0, pi]
with no NaN ever.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .field import GridField, _grid_args, sample_many
from .search import (Neighborhood, SearchConfig, SegmentIndex, knn_batch,
                     rbn_batch)
from .tracer import Segment, SegmentSet, speed_epsilon

DEFAULT_REF_SAMPLES = 16


@dataclass(frozen=True)
class SaliencyConfig:
    """Search config plus reference-circle controls.

    ref_radius None means the per-segment mean start-point distance of the
    found neighbors; exclusion_window 0 disables same-streamline skipping
    entirely, w >= 1 skips the segment itself and w neighbors per side.
    """

    search: SearchConfig
    ref_samples: int = DEFAULT_REF_SAMPLES
    ref_radius: float | None = None
    exclusion_window: int = 1

    def __post_init__(self):
        if self.ref_samples < 4:
            raise ValueError("ref_samples must be >= 4")
        if self.exclusion_window < 0:
            raise ValueError("exclusion_window must be >= 0")
        if self.ref_radius is not None and self.ref_radius <= 0:
            raise ValueError("ref_radius must be positive")


@dataclass(frozen=True)
class SaliencyRecord:
    segment_id: int
    s_cal: float
    s_ref: float
    ref_radius: float
    n_neighbors: int


class SaliencySet:
    """Array-backed saliency records plus drop counters."""

    def __init__(self, seg_ids, s_cal, s_ref, ref_radius, n_neighbors,
                 n_dropped_no_neighbor=0, n_dropped_no_reference=0):
        self.seg_ids = seg_ids
        self.s_cal = s_cal
        self.s_ref = s_ref
        self.ref_radius = ref_radius
        self.n_neighbors = n_neighbors
        self.n_dropped_no_neighbor = n_dropped_no_neighbor
        self.n_dropped_no_reference = n_dropped_no_reference

    def __len__(self) -> int:
        return len(self.seg_ids)

    def __getitem__(self, i: int) -> SaliencyRecord:
        return SaliencyRecord(int(self.seg_ids[i]), float(self.s_cal[i]),
                              float(self.s_ref[i]), float(self.ref_radius[i]),
                              int(self.n_neighbors[i]))


def angles_between(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Angle(s) in [0, pi] between rows of u and w."""
    u = np.atleast_2d(u)
    w = np.atleast_2d(w)
    cross = np.linalg.norm(np.cross(u, w), axis=-1)
    dot = np.einsum("...c,...c->...", u, w)
    return np.arctan2(cross, dot)


def exclusion_mask(segs: SegmentSet, query_seg: int, gids: np.ndarray,
                   window: int) -> np.ndarray:
    """True for neighbors to keep after same-streamline exclusion."""
    if window < 1:
        return np.ones(len(gids), dtype=bool)
    same = segs.streamline_ids[gids] == segs.streamline_ids[query_seg]
    near = np.abs(segs.index_on_curve[gids] -
                  segs.index_on_curve[query_seg]) <= window
    return ~(same & near)


def calculated_saliency(seg: Segment, index: SegmentIndex,
                        cfg: SaliencyConfig, eps: float = 1e-12):
    """(s_cal, kept Neighborhood) for one segment, or None when exclusion
    empties the neighborhood (the no-neighbor signal)."""
    p = seg.a
    if cfg.search.method == "knn":
        nb = knn_batch(index, p[None, :], cfg.search)[0]
    else:
        nb = rbn_batch(index, p[None, :], cfg.search)[0]
    keep = exclusion_mask(index.segments, seg.global_id, nb.seg_ids,
                          cfg.exclusion_window)
    if not keep.any():
        return None
    kept = Neighborhood(nb.query, nb.seg_ids[keep], nb.distances[keep],
                        nb.metric, nb.segments)
    segs = index.segments
    starts = segs.a[kept.seg_ids]
    d = np.linalg.norm(starts - p, axis=1)
    w = 1.0 / np.maximum(d, eps) ** 2
    theta = angles_between(seg.direction[None, :],
                           segs.direction[kept.seg_ids])
    s_cal = float(np.sum(w * theta) / np.sum(w))
    return s_cal, kept


def reference_saliency(seg: Segment, field, radius: float,
                       n_samples: int = DEFAULT_REF_SAMPLES,
                       eps_speed: float | None = None) -> float | None:
    """Mean angle between the segment orientation and the field on a
    perpendicular circle at the start point; None when every sample is
    out of bounds or slower than the speed floor (no-reference signal)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if eps_speed is None:
        eps_speed = speed_epsilon(field)
    v = seg.direction
    e1, e2 = perpendicular_basis(v)
    ang = 2.0 * np.pi * np.arange(n_samples) / n_samples
    pts = (seg.a[None, :] + radius * (np.cos(ang)[:, None] * e1[None, :] +
                                      np.sin(ang)[:, None] * e2[None, :]))
    inside = field.bounds.contains_many(pts)
    if not inside.any():
        return None
    vecs = sample_many(field, pts[inside])
    speeds = np.linalg.norm(vecs, axis=1)
    ok = speeds >= eps_speed
    if not ok.any():
        return None
    theta = angles_between(v[None, :], vecs[ok])
    return float(np.mean(theta))


def perpendicular_basis(v: np.ndarray):
    """Deterministic orthonormal (e1, e2) perpendicular to unit v:
    e1 = normalize(v x a) with a the canonical axis least aligned with v
    (ties to x then y), e2 = v x e1."""
    av = np.abs(v)
    if av[0] <= av[1] and av[0] <= av[2]:
        axis = np.array([1.0, 0.0, 0.0])
    elif av[1] <= av[2]:
        axis = np.array([0.0, 1.0, 0.0])
    else:
        axis = np.array([0.0, 0.0, 1.0])
    e1 = np.cross(v, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(v, e1)
    return e1, e2


def reference_saliency_many(field, segs: SegmentSet, radii: np.ndarray,
                            keep: np.ndarray, n_samples: int,
                            eps_speed: float):
    """Batched reference saliency; NaN rows mean no valid circle sample.

    GridFields go through the compiled kernel; analytic fields use the
    numpy path (same sampling semantics).
    """
    if isinstance(field, GridField):
        out = np.empty(len(segs))
        used = np.empty(len(segs), dtype=np.int64)
        _kernels.circle_reference_angles(
            segs.a, segs.direction, np.ascontiguousarray(radii, np.float64),
            np.ascontiguousarray(keep, np.bool_), int(n_samples),
            *_grid_args(field), float(eps_speed), out, used)
        return out, used
    out = np.full(len(segs), np.nan)
    used = np.zeros(len(segs), dtype=np.int64)
    for i in range(len(segs)):
        if not keep[i]:
            continue
        val = reference_saliency(segs[i], field, float(radii[i]), n_samples,
                                 eps_speed)
        if val is not None:
            out[i] = val
            used[i] = 1
    return out, used


def score_segments(field, index: SegmentIndex, cfg: SaliencyConfig,
                   eps: float = 1e-12) -> SaliencySet:
    """s_cal and s_ref for every indexed segment under one search config."""
    segs = index.segments
    n = len(segs)
    starts = segs.a
    if cfg.search.method == "knn":
        batch = knn_batch(index, starts, cfg.search)
    else:
        batch = rbn_batch(index, starts, cfg.search)
    rowlen = np.diff(batch.indptr)
    rowid = np.repeat(np.arange(n), rowlen)
    keep_flat = _exclusion_flat(segs, rowid, batch.gids, cfg.exclusion_window)
    sd = np.linalg.norm(segs.a[batch.gids] - starts[rowid], axis=1)
    w = np.where(keep_flat, 1.0 / np.maximum(sd, eps) ** 2, 0.0)
    theta = angles_between(segs.direction[rowid],
                           segs.direction[batch.gids])
    wsum = np.bincount(rowid, weights=w, minlength=n)
    wtsum = np.bincount(rowid, weights=w * theta, minlength=n)
    sdsum = np.bincount(rowid, weights=np.where(keep_flat, sd, 0.0),
                        minlength=n)
    kcount = np.bincount(rowid, weights=keep_flat.astype(np.float64),
                         minlength=n).astype(np.int64)
    has_nb = kcount > 0
    s_cal = np.divide(wtsum, wsum, out=np.full(n, np.nan), where=has_nb)
    if cfg.ref_radius is not None:
        radii = np.full(n, float(cfg.ref_radius))
    else:
        radii = np.divide(sdsum, kcount, out=np.zeros(n), where=has_nb)
        radii = np.maximum(radii, eps)
    eps_speed = speed_epsilon(field)
    s_ref, used = reference_saliency_many(field, segs, radii, has_nb,
                                          cfg.ref_samples, eps_speed)
    valid = has_nb & (used > 0)
    return SaliencySet(segs.global_ids[valid], s_cal[valid], s_ref[valid],
                       radii[valid], kcount[valid],
                       n_dropped_no_neighbor=int(n - has_nb.sum()),
                       n_dropped_no_reference=int(has_nb.sum() - valid.sum()))


def _exclusion_flat(segs, rowid, gids, window):
    if window < 1:
        return np.ones(len(gids), dtype=bool)
    same = segs.streamline_ids[gids] == segs.streamline_ids[rowid]
    near = np.abs(segs.index_on_curve[gids] -
                  segs.index_on_curve[rowid]) <= window
    return ~(same & near)


def saliency_sweep(field, index: SegmentIndex, base: SaliencyConfig,
                   k_values=None, r_values=None) -> dict:
    """Score all segments for each parameter value; keys are the values."""
    out = {}
    for k in (k_values or []):
        cfg = SaliencyConfig(
            SearchConfig("knn", base.search.metric, k=int(k),
                         corner_exclusion=base.search.corner_exclusion),
            base.ref_samples, base.ref_radius, base.exclusion_window)
        out[int(k)] = score_segments(field, index, cfg)
    for r in (r_values or []):
        cfg = SaliencyConfig(
            SearchConfig("rbn", base.search.metric, r=float(r),
                         nearest_fallback=base.search.nearest_fallback),
            base.ref_samples, base.ref_radius, base.exclusion_window)
        out[float(r)] = score_segments(field, index, cfg)
    return out
