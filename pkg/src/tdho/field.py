"""Uniform grids, complex fields on them, and the binary snapshot format."""
from __future__ import annotations

import functools
import math
import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import NonFinite, OutOfRange

SNAPSHOT_MAGIC = b"TDHO"
SNAPSHOT_VERSION = 1


def _is_pow2(k):
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Per-axis point counts, origins and spacings (length units).

    Point j of axis a sits at x_min[a] + j*dx[a].  A grid is *centered* when
    x_min = -(N/2)*dx; fourier() maps centered grids onto centered grids.
    """

    sizes: tuple
    x_min: tuple
    dx: tuple

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "x_min", tuple(float(v) for v in self.x_min))
        object.__setattr__(self, "dx", tuple(float(v) for v in self.dx))
        n = len(self.sizes)
        if n not in (1, 2, 3):
            raise OutOfRange(f"dimension {n} not in {{1, 2, 3}}")
        if len(self.x_min) != n or len(self.dx) != n:
            raise OutOfRange("sizes, x_min and dx must have one entry per axis")
        for s in self.sizes:
            if s < 8 or not _is_pow2(s):
                raise OutOfRange(f"axis size {s} must be a power of two >= 8")
        for d in self.dx:
            if not (d > 0 and math.isfinite(d)):
                raise OutOfRange(f"spacing {d} must be positive and finite")

    @classmethod
    def centered(cls, sizes, dx):
        sizes = tuple(sizes)
        if np.ndim(dx) == 0:
            dx = (float(dx),) * len(sizes)
        return cls(sizes, tuple(-(s // 2) * d for s, d in zip(sizes, dx)), tuple(dx))

    @classmethod
    def box(cls, sizes, half_width):
        """Centered grid covering [-L, L) on every axis."""
        sizes = tuple(sizes)
        if np.ndim(half_width) == 0:
            half_width = (float(half_width),) * len(sizes)
        return cls.centered(sizes, tuple(2.0 * L / s for L, s in zip(half_width, sizes)))

    @property
    def n(self):
        return len(self.sizes)

    @property
    def cell_volume(self):
        return float(np.prod(self.dx))

    @property
    def npoints(self):
        return int(np.prod(self.sizes))

    def axes(self):
        return [x0 + d * np.arange(s) for x0, d, s in zip(self.x_min, self.dx, self.sizes)]

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def r2(self):
        """|x|^2 on the grid (cached, read-only)."""
        return _r2(self)

    def offsets(self):
        """Origin offsets from the centered position, in units of dx."""
        return tuple(x0 / d + s // 2 for x0, d, s in zip(self.x_min, self.dx, self.sizes))

    def dual(self):
        """Centered frequency grid reached by fourier()."""
        return Grid.centered(self.sizes, tuple(2.0 * math.pi / (s * d) for s, d in zip(self.sizes, self.dx)))

    def scaled(self, tau):
        return Grid(self.sizes, tuple(x * tau for x in self.x_min), tuple(d * tau for d in self.dx))


@functools.lru_cache(maxsize=64)
def _r2(grid):
    out = np.zeros(grid.sizes)
    for a, ax in enumerate(grid.axes()):
        shape = [1] * grid.n
        shape[a] = ax.size
        out = out + (ax**2).reshape(shape)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Field:
    """Complex samples on a Grid, optionally tagged with a time."""

    grid: Grid
    values: np.ndarray
    time_tag: float | None = dc_field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.sizes:
            if v.size != self.grid.npoints:
                raise OutOfRange(f"values of size {v.size} do not fit grid {self.grid.sizes}")
            v = v.reshape(self.grid.sizes)
        if not np.all(np.isfinite(v)):
            raise NonFinite("field has non-finite entries")
        object.__setattr__(self, "values", v)

    def with_values(self, values, grid=None, time_tag="keep"):
        return Field(
            self.grid if grid is None else grid,
            values,
            self.time_tag if time_tag == "keep" else time_tag,
        )

    def tagged(self, t):
        return Field(self.grid, self.values, t)

    def norm(self):
        """Grid-aware L^2 norm: sqrt(sum |f|^2 * cell volume)."""
        return lp_norm(self, 2.0)

    def __add__(self, other):
        _same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return self.with_values(self.values - other.values)

    def scale(self, c):
        return self.with_values(self.values * c)


def _same_grid(a, b, rtol=1e-12):
    ga, gb = a.grid, b.grid
    ok = ga.sizes == gb.sizes and np.allclose(ga.dx, gb.dx, rtol=rtol, atol=0) and np.allclose(
        ga.x_min, gb.x_min, rtol=rtol, atol=rtol * max(max(map(abs, ga.dx)), 1e-300)
    )
    if not ok:
        raise OutOfRange("fields live on different grids; resample first")


def lp_norm(f, p):
    """L^p norm with the grid's cell volume as quadrature weight; p=inf is the grid max."""
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    return float((np.sum(a**p) * f.grid.cell_volume) ** (1.0 / p))


def write_snapshot(path, f):
    """Little-endian: magic, u32 version, u32 n, n*u64 sizes, n*f64 x_min,
    n*f64 dx, f64 time_tag (NaN when absent), then (re, im) f64 pairs in
    row-major order."""
    g = f.grid
    tag = math.nan if f.time_tag is None else float(f.time_tag)
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<II", SNAPSHOT_VERSION, g.n))
        fh.write(struct.pack(f"<{g.n}Q", *g.sizes))
        fh.write(struct.pack(f"<{g.n}d", *g.x_min))
        fh.write(struct.pack(f"<{g.n}d", *g.dx))
        fh.write(struct.pack("<d", tag))
        inter = np.empty(f.values.size * 2, dtype="<f8")
        flat = f.values.ravel(order="C")
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        fh.write(inter.tobytes())


def read_snapshot(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != SNAPSHOT_MAGIC:
        raise OutOfRange(f"{path}: not a field snapshot (bad magic)")
    version, n = struct.unpack_from("<II", data, 4)
    if version != SNAPSHOT_VERSION:
        raise OutOfRange(f"{path}: unsupported snapshot version {version}")
    off = 12
    sizes = struct.unpack_from(f"<{n}Q", data, off)
    off += 8 * n
    x_min = struct.unpack_from(f"<{n}d", data, off)
    off += 8 * n
    dx = struct.unpack_from(f"<{n}d", data, off)
    off += 8 * n
    (tag,) = struct.unpack_from("<d", data, off)
    off += 8
    count = int(np.prod(sizes))
    inter = np.frombuffer(data, dtype="<f8", count=2 * count, offset=off)
    values = (inter[0::2] + 1j * inter[1::2]).reshape(sizes)
    return Field(Grid(sizes, x_min, dx), values, None if math.isnan(tag) else tag)
