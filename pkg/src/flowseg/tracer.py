"""Streamline seeding, fixed-arc-length RK4 tracing, segment decomposition.

Tracing integrates the *normalized* field with classical RK4 and a
renormalized increment, so every committed step advances exactly one step
length of arc; the local velocity magnitude is kept as a per-point
attribute so downstream reconstruction can recover magnitudes. Traces run
backward (negated field) then forward from each seed and are concatenated
with the seed once.

The "SL1" file format is an ASCII line ``SL1 <num_lines>\\n`` followed,
per streamline, by an ASCII line ``<num_points>\\n`` and then
little-endian float64 (x, y, z, speed) quadruples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import CapacityError, GridFormatError, OutOfDomainError
from .field import (AnalyticField, DomainBounds, ScalarGrid, rms_speed,
                    sample_many, _grid_args)

SEED_STRATEGIES = ("uniform", "jittered", "random", "feature-aware")

MAX_SEED_COUNT = 1_000_000

# S_N for the three desk-scale count levels (5^3, 8^3, 12^3 lattices)
LEVEL_SEED_COUNTS = {1: 125, 2: 512, 3: 1728}

SPEED_EPS_FACTOR = 1e-6    # eps_speed = factor * field RMS speed
LENGTH_EPS_FACTOR = 1e-9   # eps_len = factor * domain diagonal

ANNEAL_ITERATIONS = 200
ANNEAL_SIGMA_DECAY = 0.98
ANNEAL_TEMP_DECAY = 0.97


@dataclass(frozen=True)
class SeedSpec:
    """How to place seeds: strategy, target count S_N, jitter, RNG seed."""

    strategy: str
    count_level: int
    jitter_fraction: float = 0.9
    rng_seed: int = 0

    def __post_init__(self):
        if self.strategy not in SEED_STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}, "
                             f"expected one of {SEED_STRATEGIES}")
        if self.count_level < 1:
            raise ValueError("count_level must be >= 1")
        if not 0.0 <= self.jitter_fraction <= 1.0:
            raise ValueError("jitter_fraction must be in [0, 1]")


@dataclass(frozen=True)
class Streamline:
    id: int
    points: np.ndarray   # (n, 3)
    speeds: np.ndarray   # (n,)


class SegmentSet:
    """Array-backed sequence of straight segments between consecutive
    integration points. Indexing materializes a Segment view."""

    def __init__(self, global_ids, streamline_ids, index_on_curve,
                 a, b, direction, speed, length):
        self.global_ids = np.asarray(global_ids, dtype=np.int64)
        self.streamline_ids = np.asarray(streamline_ids, dtype=np.int64)
        self.index_on_curve = np.asarray(index_on_curve, dtype=np.int64)
        self.a = np.ascontiguousarray(a, dtype=np.float64)
        self.b = np.ascontiguousarray(b, dtype=np.float64)
        self.direction = np.ascontiguousarray(direction, dtype=np.float64)
        self.speed = np.asarray(speed, dtype=np.float64)
        self.length = np.asarray(length, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.global_ids)

    def __getitem__(self, i: int) -> "Segment":
        return Segment(int(self.global_ids[i]), int(self.streamline_ids[i]),
                       int(self.index_on_curve[i]), self.a[i], self.b[i],
                       self.direction[i], float(self.speed[i]),
                       float(self.length[i]))


@dataclass(frozen=True)
class Segment:
    global_id: int
    streamline_id: int
    index_on_curve: int
    a: np.ndarray
    b: np.ndarray
    direction: np.ndarray
    speed: float
    length: float


def speed_epsilon(field) -> float:
    return SPEED_EPS_FACTOR * rms_speed(field)


def length_epsilon(bounds: DomainBounds) -> float:
    return LENGTH_EPS_FACTOR * bounds.diagonal


def _lattice(bounds: DomainBounds, count: int):
    """Cell-centered lattice of n^3 points with n = round(count^(1/3))."""
    n = max(1, round(count ** (1.0 / 3.0)))
    extent = bounds.max_corner - bounds.min_corner
    spacing = extent / n
    axes = [bounds.min_corner[c] + (np.arange(n) + 0.5) * spacing[c]
            for c in range(3)]
    xx, yy, zz = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([xx.ravel(order="F"), yy.ravel(order="F"),
                    zz.ravel(order="F")], axis=1)
    return pts, spacing


def generate_seeds(spec: SeedSpec, bounds: DomainBounds,
                   interest: ScalarGrid | None = None) -> np.ndarray:
    """Seed positions for a strategy; deterministic under spec.rng_seed.

    feature-aware moves each uniform seed by simulated annealing that
    maximizes the interpolated interest grid (gradient magnitude), with a
    geometric proposal/temperature schedule and out-of-bounds proposals
    rejected.
    """
    if spec.count_level > MAX_SEED_COUNT:
        raise CapacityError(
            f"count_level {spec.count_level} exceeds cap {MAX_SEED_COUNT}")
    rng = np.random.default_rng(spec.rng_seed & (2 ** 64 - 1))
    if spec.strategy == "random":
        return rng.uniform(bounds.min_corner, bounds.max_corner,
                           (spec.count_level, 3))
    pts, spacing = _lattice(bounds, spec.count_level)
    if spec.strategy == "uniform":
        return pts
    if spec.strategy == "jittered":
        half = spec.jitter_fraction * spacing / 2.0
        return pts + rng.uniform(-half, half, pts.shape)
    # feature-aware
    if interest is None:
        raise ValueError("feature-aware seeding needs an interest grid")
    cur = pts.copy()
    cur_val = interest.sample_many(cur)
    sigma = float(np.mean(spacing))
    temp = float(np.std(interest.values))
    if temp <= 0.0:
        temp = 1e-12
    for _ in range(ANNEAL_ITERATIONS):
        prop = cur + rng.normal(0.0, sigma, cur.shape)
        accept_u = rng.uniform(0.0, 1.0, len(cur))
        inside = bounds.contains_many(prop)
        prop_val = np.full(len(cur), -np.inf)
        if inside.any():
            prop_val[inside] = interest.sample_many(prop[inside])
        delta = prop_val - cur_val
        accept = inside & ((delta >= 0) | (accept_u < np.exp(
            np.clip(delta / temp, -745.0, 0.0))))
        cur[accept] = prop[accept]
        cur_val[accept] = prop_val[accept]
        sigma *= ANNEAL_SIGMA_DECAY
        temp *= ANNEAL_TEMP_DECAY
    return cur


def trace(field, seed, h: float, max_steps: int) -> Streamline | None:
    """Trace one bidirectional streamline; None signals an empty trace
    (speed below the floor at the seed). Out-of-bounds seeds raise."""
    seed = np.asarray(seed, dtype=np.float64)
    if not field.bounds.contains(seed):
        raise OutOfDomainError(f"seed {seed} outside bounds")
    lines = trace_many(field, seed[None, :], h, max_steps)
    return lines[0] if lines else None


def _trace_analytic(field: AnalyticField, seeds, h, max_steps, eps_speed):
    """Same stepping semantics as the grid kernel, vectorized over seeds."""
    bounds = field.bounds

    def unit_dir(pts, sgn):
        ok = bounds.contains_many(pts)
        v = np.zeros_like(pts)
        if ok.any():
            v[ok] = sample_many(field, pts[ok])
        sp = np.linalg.norm(v, axis=1)
        ok &= sp >= eps_speed
        d = np.zeros_like(v)
        d[ok] = sgn * v[ok] / sp[ok, None]
        return d, sp, ok

    n_seeds = len(seeds)
    m = max_steps
    out = np.empty((n_seeds, 2 * m + 1, 4))
    sp0 = np.linalg.norm(sample_many(field, seeds), axis=1)
    alive0 = sp0 >= eps_speed
    out[:, m, :3] = seeds
    out[:, m, 3] = sp0
    lo = np.full(n_seeds, m, dtype=np.int64)
    hi = np.full(n_seeds, m, dtype=np.int64)
    for direction, sgn in ((0, -1.0), (1, 1.0)):
        pos = seeds.copy()
        alive = alive0.copy()
        for _ in range(max_steps):
            if not alive.any():
                break
            k1, _, ok = unit_dir(pos, sgn)
            k2, _, ok2 = unit_dir(pos + 0.5 * h * k1, sgn)
            k3, _, ok3 = unit_dir(pos + 0.5 * h * k2, sgn)
            k4, _, ok4 = unit_dir(pos + h * k3, sgn)
            step = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            norm = np.linalg.norm(step, axis=1)
            ok_all = alive & ok & ok2 & ok3 & ok4 & (norm > 0)
            nxt = pos.copy()
            nxt[ok_all] = pos[ok_all] + h * step[ok_all] / norm[ok_all, None]
            inside = bounds.contains_many(nxt)
            spn = np.zeros(n_seeds)
            good = ok_all & inside
            if good.any():
                spn[good] = np.linalg.norm(sample_many(field, nxt[good]),
                                           axis=1)
            commit = good & (spn >= eps_speed)
            alive &= commit
            if not alive.any():
                break
            idx = np.where(alive)[0]
            if direction == 0:
                lo[idx] -= 1
                out[idx, lo[idx], :3] = nxt[idx]
                out[idx, lo[idx], 3] = spn[idx]
            else:
                hi[idx] += 1
                out[idx, hi[idx], :3] = nxt[idx]
                out[idx, hi[idx], 3] = spn[idx]
            pos = nxt
    counts = np.where(alive0, hi - lo + 1, 0)
    return out, lo, counts


def trace_many(field, seeds: np.ndarray, h: float, max_steps: int,
               eps_speed: float | None = None) -> list[Streamline]:
    """Trace all seeds; drops empty traces and single-point lines."""
    if h <= 0:
        raise ValueError("step length h must be positive")
    seeds = np.ascontiguousarray(seeds, dtype=np.float64)
    if eps_speed is None:
        eps_speed = speed_epsilon(field)
    inside = field.bounds.contains_many(seeds)
    if not inside.all():
        bad = int(np.argmin(inside))
        raise OutOfDomainError(f"seed {seeds[bad]} outside bounds")
    if isinstance(field, AnalyticField):
        out_pts, out_lo, out_n = _trace_analytic(field, seeds, float(h),
                                                 int(max_steps),
                                                 float(eps_speed))
    else:
        out_pts = np.empty((len(seeds), 2 * max_steps + 1, 4))
        out_lo = np.empty(len(seeds), dtype=np.int64)
        out_n = np.empty(len(seeds), dtype=np.int64)
        _kernels.trace_many(*_grid_args(field), seeds, float(h),
                            int(max_steps), float(eps_speed),
                            out_pts, out_lo, out_n)
    lines = []
    for s in range(len(seeds)):
        n = int(out_n[s])
        if n < 2:
            continue
        lo = int(out_lo[s])
        window = out_pts[s, lo:lo + n]
        lines.append(Streamline(len(lines), window[:, :3].copy(),
                                window[:, 3].copy()))
    return lines


def decompose(lines, eps_len: float = 0.0) -> SegmentSet:
    """Split streamlines into straight segments, one per consecutive point
    pair; segments shorter than eps_len are dropped. Global ids are dense
    in (streamline_id, index_on_curve) order; speed is the endpoint mean.
    """
    a_parts, b_parts, sl_parts, idx_parts, sp_parts = [], [], [], [], []
    for line in lines:
        pts = line.points
        if len(pts) < 2:
            continue
        a_parts.append(pts[:-1])
        b_parts.append(pts[1:])
        sl_parts.append(np.full(len(pts) - 1, line.id, dtype=np.int64))
        idx_parts.append(np.arange(len(pts) - 1, dtype=np.int64))
        sp_parts.append(0.5 * (line.speeds[:-1] + line.speeds[1:]))
    if not a_parts:
        return SegmentSet(np.empty(0, np.int64), np.empty(0, np.int64),
                          np.empty(0, np.int64), np.empty((0, 3)),
                          np.empty((0, 3)), np.empty((0, 3)),
                          np.empty(0), np.empty(0))
    a = np.concatenate(a_parts)
    b = np.concatenate(b_parts)
    sl = np.concatenate(sl_parts)
    idx = np.concatenate(idx_parts)
    sp = np.concatenate(sp_parts)
    delta = b - a
    length = np.linalg.norm(delta, axis=1)
    keep = length > eps_len
    a, b, sl, idx, sp, delta, length = (arr[keep] for arr in
                                        (a, b, sl, idx, sp, delta, length))
    direction = delta / length[:, None]
    gids = np.arange(len(a), dtype=np.int64)
    return SegmentSet(gids, sl, idx, a, b, direction, sp, length)


def save_lines(lines, path) -> None:
    with open(path, "wb") as fh:
        fh.write(f"SL1 {len(lines)}\n".encode("ascii"))
        for line in lines:
            fh.write(f"{len(line.points)}\n".encode("ascii"))
            quad = np.column_stack([line.points, line.speeds])
            fh.write(quad.astype("<f8").tobytes())


def load_lines(path) -> list[Streamline]:
    with open(path, "rb") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2 or parts[0] != b"SL1":
            raise GridFormatError(f"bad SL1 header at offset 0: {header[:40]!r}")
        try:
            num_lines = int(parts[1])
        except ValueError as exc:
            raise GridFormatError(f"bad SL1 line count: {exc}") from exc
        lines = []
        for li in range(num_lines):
            offset = fh.tell()
            count_line = fh.readline()
            if not count_line:
                raise GridFormatError(
                    f"truncated SL1: missing line {li} header at offset {offset}")
            try:
                npts = int(count_line)
            except ValueError as exc:
                raise GridFormatError(
                    f"bad point count at offset {offset}: {exc}") from exc
            raw = fh.read(npts * 32)
            if len(raw) != npts * 32:
                raise GridFormatError(
                    f"truncated SL1 payload for line {li} at offset {fh.tell()}")
            quad = np.frombuffer(raw, dtype="<f8").reshape(npts, 4)
            lines.append(Streamline(li, quad[:, :3].copy(), quad[:, 3].copy()))
    return lines
