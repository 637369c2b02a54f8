"""Ground-truth 3D vector fields: analytic stand-ins and regular grids.

Grid fields store one float64 vector per node in x-fastest order and are
sampled with trilinear interpolation. Three analytic fields are provided
as closed forms (see ``analytic_field``): a rotor, a saddle, and an ABC
flow. Out-of-bounds sampling raises instead of clamping; streamline
tracing handles boundary termination itself.

The "VF1" file format is a single ASCII header line

    VF1 <nx> <ny> <nz> <ox> <oy> <oz> <sx> <sy> <sz>\\n

followed by little-endian float64 (vx, vy, vz) triples, x-fastest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import GridFormatError, InvalidGridError, OutOfDomainError

ANALYTIC_KINDS = ("rotor", "saddle", "abc")

_ANALYTIC_DEFAULTS = {
    "rotor": {"drift": 0.1},
    "saddle": {"drift": 0.3},
    "abc": {"a": math.sqrt(3.0), "b": math.sqrt(2.0), "c": 1.0},
}


def _as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3D position, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class DomainBounds:
    """Axis-aligned domain with componentwise min < max."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min_corner", _as_point(self.min_corner))
        object.__setattr__(self, "max_corner", _as_point(self.max_corner))
        if not np.all(self.min_corner < self.max_corner):
            raise ValueError("min_corner must be < max_corner componentwise")

    @property
    def corners(self) -> np.ndarray:
        """The 8 corner positions, shape (8, 3)."""
        lo, hi = self.min_corner, self.max_corner
        out = np.empty((8, 3))
        for i in range(8):
            out[i] = [hi[0] if i & 1 else lo[0],
                      hi[1] if i & 2 else lo[1],
                      hi[2] if i & 4 else lo[2]]
        return out

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.max_corner - self.min_corner))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min_corner + self.max_corner)

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return bool(np.all(p >= self.min_corner) and np.all(p <= self.max_corner))

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return np.all((pts >= self.min_corner) & (pts <= self.max_corner), axis=1)


@dataclass(frozen=True)
class GridField:
    """Regular grid of 3D vectors; values are (n, 3) float64, x-fastest."""

    dims: tuple[int, int, int]
    origin: np.ndarray
    spacing: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", _as_point(self.origin))
        object.__setattr__(self, "spacing", _as_point(self.spacing))
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if any(d < 1 for d in dims):
            raise InvalidGridError(f"dims must be positive, got {dims}")
        if not np.all(self.spacing > 0):
            raise InvalidGridError(f"spacing must be positive, got {self.spacing}")
        n = dims[0] * dims[1] * dims[2]
        if vals.shape != (n, 3):
            raise InvalidGridError(
                f"values shape {vals.shape} does not match dims {dims} "
                f"(expected ({n}, 3))")

    @property
    def bounds(self) -> DomainBounds:
        hi = self.origin + (np.array(self.dims, dtype=np.float64) - 1.0) * self.spacing
        return DomainBounds(self.origin, hi)

    def node_positions(self) -> np.ndarray:
        """All grid node positions, x-fastest, shape (n, 3)."""
        nx, ny, nz = self.dims
        ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                                 indexing="ij")
        idx = np.stack([ii.ravel(order="F"), jj.ravel(order="F"),
                        kk.ravel(order="F")], axis=1)
        return self.origin + idx * self.spacing

    def node_index(self, i: int, j: int, k: int) -> int:
        nx, ny, _ = self.dims
        return i + nx * (j + ny * k)


@dataclass(frozen=True)
class AnalyticField:
    """Closed-form field over explicit bounds; see ``analytic_field``."""

    kind: str
    parameters: dict
    bounds: DomainBounds

    def __post_init__(self):
        if self.kind not in ANALYTIC_KINDS:
            raise ValueError(f"unknown analytic kind {self.kind!r}, "
                             f"expected one of {ANALYTIC_KINDS}")


@dataclass(frozen=True)
class ScalarGrid:
    """Regular grid of scalars, same layout conventions as GridField."""

    dims: tuple[int, int, int]
    origin: np.ndarray
    spacing: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "origin", _as_point(self.origin))
        object.__setattr__(self, "spacing", _as_point(self.spacing))
        object.__setattr__(self, "values",
                           np.ascontiguousarray(self.values, dtype=np.float64))

    @property
    def bounds(self) -> DomainBounds:
        hi = self.origin + (np.array(self.dims, dtype=np.float64) - 1.0) * self.spacing
        return DomainBounds(self.origin, hi)

    @cached_property
    def _as_vector(self) -> "GridField":
        vec = np.repeat(self.values[:, None], 3, axis=1)
        return GridField(self.dims, self.origin, self.spacing, vec)

    def sample_many(self, pts: np.ndarray) -> np.ndarray:
        """Trilinear scalar interpolation; out-of-bounds raises."""
        return sample_many(self._as_vector, pts)[:, 0]


def analytic_field(kind: str, parameters: dict | None = None,
                   bounds: DomainBounds | None = None) -> AnalyticField:
    """Build one of the three analytic stand-in fields.

    rotor   v = (-y, x, drift)                over [-2, 2]^3, drift 0.1
    saddle  v = (x, -y, drift*sin(pi*z))      over [-2, 2]^3, drift 0.3
    abc     v = (a sin z + c cos y,
                 b sin x + a cos z,
                 c sin y + b cos x)           over [0, 2*pi]^3,
                                              a = sqrt(3), b = sqrt(2), c = 1
    """
    if kind not in ANALYTIC_KINDS:
        raise ValueError(f"unknown analytic kind {kind!r}")
    params = dict(_ANALYTIC_DEFAULTS[kind])
    if parameters:
        params.update(parameters)
    if bounds is None:
        if kind == "abc":
            bounds = DomainBounds((0.0, 0.0, 0.0),
                                  (2 * math.pi, 2 * math.pi, 2 * math.pi))
        else:
            bounds = DomainBounds((-2.0, -2.0, -2.0), (2.0, 2.0, 2.0))
    return AnalyticField(kind, params, bounds)


def _eval_analytic(f: AnalyticField, pts: np.ndarray) -> np.ndarray:
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    out = np.empty_like(pts)
    if f.kind == "rotor":
        out[:, 0] = -y
        out[:, 1] = x
        out[:, 2] = f.parameters["drift"]
    elif f.kind == "saddle":
        out[:, 0] = x
        out[:, 1] = -y
        out[:, 2] = f.parameters["drift"] * np.sin(np.pi * z)
    else:
        a, b, c = (f.parameters["a"], f.parameters["b"], f.parameters["c"])
        out[:, 0] = a * np.sin(z) + c * np.cos(y)
        out[:, 1] = b * np.sin(x) + a * np.cos(z)
        out[:, 2] = c * np.sin(y) + b * np.cos(x)
    return out


def _grid_args(gf: GridField):
    nx, ny, nz = gf.dims
    ox, oy, oz = gf.origin
    sx, sy, sz = gf.spacing
    hi = gf.bounds.max_corner
    return (gf.values, nx, ny, nz, ox, oy, oz, sx, sy, sz,
            hi[0], hi[1], hi[2])


def sample_many(field, pts: np.ndarray) -> np.ndarray:
    """Vectorized ``sample``; raises OutOfDomainError if any point is outside."""
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (n, 3) points, got {pts.shape}")
    if isinstance(field, AnalyticField):
        inside = field.bounds.contains_many(pts)
        if not inside.all():
            bad = int(np.argmin(inside))
            raise OutOfDomainError(f"point {pts[bad]} outside bounds")
        return _eval_analytic(field, pts)
    out = np.empty_like(pts)
    ok = np.empty(len(pts), dtype=np.bool_)
    _kernels.grid_sample_many(*_grid_args(field), pts, out, ok)
    if not ok.all():
        bad = int(np.argmin(ok))
        raise OutOfDomainError(f"point {pts[bad]} outside bounds")
    return out


def sample(field, p) -> np.ndarray:
    """Field vector at p (trilinear for grids, closed form for analytic)."""
    return sample_many(field, _as_point(p)[None, :])[0]


def rasterize(field, dims, bounds: DomainBounds | None = None) -> GridField:
    """Sample any field onto a regular grid with the given node counts."""
    dims = tuple(int(d) for d in dims)
    if any(d < 2 for d in dims):
        raise InvalidGridError(f"need at least 2 nodes per axis, got {dims}")
    if bounds is None:
        bounds = field.bounds
    spacing = (bounds.max_corner - bounds.min_corner) / (np.array(dims) - 1.0)
    gf = GridField(dims, bounds.min_corner, spacing,
                   np.zeros((dims[0] * dims[1] * dims[2], 3)))
    pts = gf.node_positions()
    vals = sample_many(field, pts)
    return GridField(dims, bounds.min_corner, spacing, vals)


def rms_speed(field) -> float:
    """Root-mean-square velocity magnitude.

    Grid fields use their stored vectors; analytic fields are evaluated on
    a fixed 32^3 lattice over their bounds.
    """
    if isinstance(field, GridField):
        vals = field.values
    else:
        vals = rasterize(field, (32, 32, 32)).values
    return float(np.sqrt(np.mean(np.sum(vals * vals, axis=1))))


def gradient_magnitude_field(field, dims=None) -> ScalarGrid:
    """Frobenius norm of the velocity Jacobian at every grid node.

    Central differences in the interior, one-sided at boundaries. Analytic
    fields must pass explicit dims to rasterize first.
    """
    if isinstance(field, AnalyticField):
        if dims is None:
            raise InvalidGridError("analytic fields need dims to resample")
        field = rasterize(field, dims)
    nx, ny, nz = field.dims
    if nx < 2 or ny < 2 or nz < 2:
        raise InvalidGridError(f"need >= 2 nodes per axis, got {field.dims}")
    v = field.values.reshape(nz, ny, nx, 3)  # k, j, i layout for x-fastest
    acc = np.zeros((nz, ny, nx))
    for axis, h in ((2, field.spacing[0]), (1, field.spacing[1]),
                    (0, field.spacing[2])):
        d = np.gradient(v, h, axis=axis)
        acc += np.sum(d * d, axis=3)
    out = np.sqrt(acc)
    return ScalarGrid(field.dims, field.origin, field.spacing,
                      out.ravel(order="C"))


def save_grid(gf: GridField, path) -> None:
    header = "VF1 {} {} {} {} {} {} {} {} {}\n".format(
        gf.dims[0], gf.dims[1], gf.dims[2],
        repr(float(gf.origin[0])), repr(float(gf.origin[1])),
        repr(float(gf.origin[2])),
        repr(float(gf.spacing[0])), repr(float(gf.spacing[1])),
        repr(float(gf.spacing[2])))
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(gf.values.astype("<f8").tobytes())


def load_grid(path) -> GridField:
    with open(path, "rb") as fh:
        header = fh.readline()
        payload = fh.read()
    parts = header.decode("ascii", errors="replace").split()
    if len(parts) != 10 or parts[0] != "VF1":
        raise GridFormatError(f"bad VF1 header at offset 0: {header[:40]!r}")
    try:
        dims = tuple(int(p) for p in parts[1:4])
        origin = np.array([float(p) for p in parts[4:7]])
        spacing = np.array([float(p) for p in parts[7:10]])
    except ValueError as exc:
        raise GridFormatError(f"unparseable VF1 header field: {exc}") from exc
    if any(d < 1 for d in dims):
        raise GridFormatError(f"non-positive dims {dims} in header")
    n = dims[0] * dims[1] * dims[2]
    expected = n * 3 * 8
    if len(payload) != expected:
        raise GridFormatError(
            f"payload is {len(payload)} bytes at offset {len(header)}, "
            f"expected {expected} for dims {dims}")
    vals = np.frombuffer(payload, dtype="<f8").reshape(n, 3)
    finite = np.isfinite(vals)
    if not finite.all():
        flat = int(np.argmin(finite.ravel()))
        offset = len(header) + flat * 8
        raise GridFormatError(f"non-finite value at byte offset {offset}")
    return GridField(dims, origin, spacing, vals.copy())
