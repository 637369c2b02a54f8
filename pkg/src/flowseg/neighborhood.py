"""Neighborhood characterization: average distance and spatial-coverage
uniformity.

Uniformity surrounds the query point with a sphere large enough to hold
every neighbor segment, partitions directions into the 20 faces of a
regular icosahedron (each face is one spatial bin extending to the
center), and reports the flagged-bin fraction. Face lookup goes through a
precomputed 2D table over spherical coordinates (polar angle x azimuth);
the exact spherical-triangle containment test is kept alongside both to
build the table and as the reference in tests and benchmarks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import EmptyNeighborhoodError
from .search import DistanceMetric, Neighborhood, point_segment_distance_many
from .tracer import SegmentSet

N_FACES = 20
N_SEGMENT_SAMPLES = 32
DEFAULT_RESOLUTION = (1024, 2048)


def icosahedron_faces() -> np.ndarray:
    """The 20 faces of a regular icosahedron as unit-vertex triples,
    oriented so det(v0, v1, v2) > 0 (counterclockwise from outside)."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, 0, phi], [1, 0, phi], [-1, 0, -phi], [1, 0, -phi],
        [0, phi, 1], [0, phi, -1], [0, -phi, 1], [0, -phi, -1],
        [phi, 1, 0], [phi, -1, 0], [-phi, 1, 0], [-phi, -1, 0],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    # faces = mutually adjacent vertex triples; adjacent unit vertices have
    # dot product exactly 1/sqrt(5)
    dots = verts @ verts.T
    edge_cos = 1.0 / math.sqrt(5.0)
    faces = []
    for i in range(12):
        for j in range(i + 1, 12):
            if not math.isclose(dots[i, j], edge_cos, abs_tol=1e-9):
                continue
            for k in range(j + 1, 12):
                if (math.isclose(dots[i, k], edge_cos, abs_tol=1e-9) and
                        math.isclose(dots[j, k], edge_cos, abs_tol=1e-9)):
                    faces.append((i, j, k))
    assert len(faces) == N_FACES
    out = np.empty((N_FACES, 3, 3))
    for f, (i, j, k) in enumerate(faces):
        v0, v1, v2 = verts[i], verts[j], verts[k]
        if np.linalg.det(np.stack([v0, v1, v2])) < 0:
            v1, v2 = v2, v1
        out[f, 0], out[f, 1], out[f, 2] = v0, v1, v2
    return out


@dataclass(frozen=True)
class IcosaBins:
    """20 spherical-triangle bins plus the face-index lookup table."""

    faces: np.ndarray        # (20, 3, 3) unit vertices, CCW from outside
    lookup: np.ndarray       # (n_theta, n_phi) uint8 face indices
    resolution: tuple[int, int]

    @property
    def edge_normals(self) -> np.ndarray:
        return _edge_normals(self.faces)

    @property
    def centroids(self) -> np.ndarray:
        c = self.faces.mean(axis=1)
        return c / np.linalg.norm(c, axis=1)[:, None]


def _edge_normals(faces: np.ndarray) -> np.ndarray:
    """(20, 3, 3): per face, cross products v0xv1, v1xv2, v2xv0.

    A direction d lies in face f iff all three dots (normal . d) >= 0.
    """
    n = np.empty_like(faces)
    n[:, 0] = np.cross(faces[:, 0], faces[:, 1])
    n[:, 1] = np.cross(faces[:, 1], faces[:, 2])
    n[:, 2] = np.cross(faces[:, 2], faces[:, 0])
    return n


def exact_face_of(faces: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Exact spherical-triangle containment for each direction.

    Picks the face maximizing the minimum signed edge determinant, which
    equals sign-test containment for interior directions and resolves
    boundary ties to the lowest face index.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    normals = _edge_normals(faces)
    best = np.full(len(dirs), -np.inf)
    out = np.zeros(len(dirs), dtype=np.uint8)
    for f in range(len(faces)):
        d0 = dirs @ normals[f, 0]
        d1 = dirs @ normals[f, 1]
        d2 = dirs @ normals[f, 2]
        m = np.minimum(np.minimum(d0, d1), d2)
        better = m > best
        out[better] = f
        best[better] = m[better]
    return out


def directions_to_cells(dirs: np.ndarray, resolution) -> tuple[np.ndarray, np.ndarray]:
    """Map (possibly unnormalized) directions to (theta, phi) cell indices."""
    dirs = np.asarray(dirs, dtype=np.float64)
    n_theta, n_phi = resolution
    r = np.linalg.norm(dirs, axis=1)
    ct = np.clip(dirs[:, 2] / r, -1.0, 1.0)
    theta = np.arccos(ct)
    phi = np.arctan2(dirs[:, 1], dirs[:, 0])
    phi = np.where(phi < 0, phi + 2.0 * math.pi, phi)
    it = np.minimum((theta * (n_theta / math.pi)).astype(np.int64), n_theta - 1)
    ip = np.minimum((phi * (n_phi / (2.0 * math.pi))).astype(np.int64), n_phi - 1)
    return it, ip


def lookup_face_of(bins: IcosaBins, dirs: np.ndarray) -> np.ndarray:
    """Table-based face lookup (the fast path)."""
    it, ip = directions_to_cells(dirs, bins.resolution)
    return bins.lookup[it, ip]


@lru_cache(maxsize=4)
def _cached_bins(resolution: tuple[int, int]) -> IcosaBins:
    faces = icosahedron_faces()
    n_theta, n_phi = resolution
    theta = (np.arange(n_theta) + 0.5) * (math.pi / n_theta)
    phi = (np.arange(n_phi) + 0.5) * (2.0 * math.pi / n_phi)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    st = np.sin(tt).ravel()
    dirs = np.stack([st * np.cos(pp).ravel(), st * np.sin(pp).ravel(),
                     np.cos(tt).ravel()], axis=1)
    table = exact_face_of(faces, dirs).reshape(n_theta, n_phi)
    return IcosaBins(faces, np.ascontiguousarray(table), resolution)


def build_icosa_bins(resolution=DEFAULT_RESOLUTION) -> IcosaBins:
    """Build the 20-face bins and their 2D lookup table.

    Every cell center direction is classified with the exact containment
    test; resolutions below 64 x 64 are rejected as too coarse.
    """
    n_theta, n_phi = int(resolution[0]), int(resolution[1])
    if n_theta < 64 or n_phi < 64:
        raise ValueError("lookup resolution must be at least 64 x 64")
    return _cached_bins((n_theta, n_phi))


@dataclass(frozen=True)
class UniformityResult:
    mu: float
    flagged_bins: np.ndarray  # (20,) bool
    radius_used: float


def average_distance(nb: Neighborhood) -> float:
    """Mean of the stored entry distances (under the producing metric)."""
    if len(nb) == 0:
        raise EmptyNeighborhoodError("average_distance of empty neighborhood")
    return float(np.mean(nb.distances))


def _clip_to_sphere(q, a, b, radius, d_max):
    """Parameter interval of segment [a, b] inside sphere(q, radius).

    Whole-segment shortcut when both endpoints are inside (the default
    radius rule guarantees this); otherwise the quadratic intersection.
    Returns None when the segment misses the sphere.
    """
    if d_max <= radius * (1.0 + 1e-12):
        return 0.0, 1.0
    u = b - a
    w = a - q
    A = float(u @ u)
    if A == 0.0:
        return (0.0, 1.0) if float(w @ w) <= radius * radius else None
    B = 2.0 * float(w @ u)
    C = float(w @ w) - radius * radius
    disc = B * B - 4.0 * A * C
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    t0 = max(0.0, (-B - sq) / (2.0 * A))
    t1 = min(1.0, (-B + sq) / (2.0 * A))
    if t0 > t1:
        return None
    return t0, t1


def segment_flags(bins: IcosaBins, q, a, b, t0, t1, eps_len,
                  n_samples=N_SEGMENT_SAMPLES, exact=False) -> np.ndarray:
    """Bins hit by n_samples uniform samples of one clipped segment."""
    t = np.linspace(t0, t1, n_samples)
    pts = a[None, :] + t[:, None] * (b - a)[None, :]
    d = pts - q
    keep = np.linalg.norm(d, axis=1) >= eps_len
    flags = np.zeros(N_FACES, dtype=bool)
    if keep.any():
        if exact:
            f = exact_face_of(bins.faces, d[keep])
        else:
            f = lookup_face_of(bins, d[keep])
        flags[f] = True
    return flags


def uniformity(nb: Neighborhood, bins: IcosaBins, *,
               radius: float | None = None, eps_len: float = 0.0,
               n_samples: int = N_SEGMENT_SAMPLES) -> UniformityResult:
    """Flagged-bin fraction of a neighborhood.

    The sphere radius defaults to the largest longest-distance over the
    entries, so every neighbor lies fully inside; segments are clipped to
    the sphere, sampled n_samples times, and each sample direction flags
    the bin the lookup table assigns. Samples closer than eps_len to the
    query are skipped.
    """
    if len(nb) == 0:
        raise EmptyNeighborhoodError("uniformity of empty neighborhood")
    q = nb.query
    segs = nb.segments
    sub = _subset(segs, nb.seg_ids)
    d_max = point_segment_distance_many(q[None, :], sub,
                                        DistanceMetric.LONGEST)[0]
    radius_used = float(d_max.max()) if radius is None else float(radius)
    flags = np.zeros(N_FACES, dtype=bool)
    for i, g in enumerate(nb.seg_ids):
        a = segs.a[g]
        b = segs.b[g]
        span = _clip_to_sphere(q, a, b, radius_used, float(d_max[i]))
        if span is None:
            continue
        flags |= segment_flags(bins, q, a, b, span[0], span[1], eps_len,
                               n_samples)
    return UniformityResult(float(flags.sum()) / N_FACES, flags, radius_used)


def _subset(segs, gids):
    return SegmentSet(segs.global_ids[gids], segs.streamline_ids[gids],
                      segs.index_on_curve[gids], segs.a[gids], segs.b[gids],
                      segs.direction[gids], segs.speed[gids],
                      segs.length[gids])


def segment_bin_masks_csr(bins: IcosaBins, queries, indptr, gids,
                          a0, b0, eps_len: float) -> np.ndarray:
    """uint32 bin masks for CSR neighbor lists (whole segments sampled;
    callers guarantee the default radius rule)."""
    rowid = np.repeat(np.arange(len(queries), dtype=np.int64),
                      np.diff(indptr))
    out = np.empty(len(gids), dtype=np.uint32)
    n_theta, n_phi = bins.resolution
    _kernels.segment_bin_masks(rowid, queries, gids, a0, b0, bins.lookup,
                               n_theta, n_phi, N_SEGMENT_SAMPLES,
                               eps_len * eps_len, out)
    return out
