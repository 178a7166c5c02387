"""Dyadic grids on [-2^L, 2^L]^n, cube/cell-set geometry, quadrature, mollification.

Everything downstream computes on these objects: a function is a value per
cell center, a cube is a whole number of cells, and every measure is an exact
multiple of the cell volume h^n.  Reductions use a fixed ascending-cell-index
order with exact (Shewchuk) summation so that repeated runs and any worker
count produce identical numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage


class GridMismatchError(ValueError):
    """Operands live on different grids."""


class DomainError(RuntimeError):
    """A construction does not fit on the grid (scale or box overflow)."""


class Grid:
    """Uniform grid over [-2^L, 2^L]^n with cell size h = 2^-s.

    n in {1, 2}; L, s integers.  Cells per axis is 2^(L+s+1), cell centers sit
    at -2^L + (i + 1/2) h.  All coordinates are dyadic rationals, hence exact
    in binary floating point.
    """

    __slots__ = ("n", "L", "s", "h", "cells_per_axis", "shape", "axis", "__dict__")

    def __init__(self, n: int, L: int, s: int):
        if n not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {n}")
        L = int(L)
        s = int(s)
        if L + s + 1 < 1:
            raise ValueError(f"grid has no cells: L={L}, s={s}")
        self.n = n
        self.L = L
        self.s = s
        self.h = 2.0 ** -s
        self.cells_per_axis = 2 ** (L + s + 1)
        self.shape = (self.cells_per_axis,) * n
        axis = -(2.0 ** L) + (np.arange(self.cells_per_axis) + 0.5) * self.h
        axis.flags.writeable = False
        self.axis = axis

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def size(self) -> int:
        return self.cells_per_axis ** self.n

    @property
    def box_radius(self) -> float:
        return 2.0 ** self.L

    @cached_property
    def coords(self) -> np.ndarray:
        """Cell-center coordinates as an (size, n) array in C order."""
        if self.n == 1:
            out = self.axis[:, None].copy()
        else:
            xx, yy = np.meshgrid(self.axis, self.axis, indexing="ij")
            out = np.column_stack([xx.ravel(), yy.ravel()])
        out.flags.writeable = False
        return out

    def axis_index(self, x: float) -> int:
        """Index of the cell whose axis interval contains coordinate x."""
        i = int(math.floor((x + self.box_radius) / self.h))
        if not 0 <= i < self.cells_per_axis:
            raise DomainError(f"coordinate {x} outside [-2^{self.L}, 2^{self.L}]")
        return i

    def refined(self, extra_levels: int = 1) -> "Grid":
        return Grid(self.n, self.L, self.s + extra_levels)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Grid)
            and (self.n, self.L, self.s) == (other.n, other.L, other.s)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.L, self.s))

    def __repr__(self) -> str:
        return f"Grid(n={self.n}, L={self.L}, s={self.s})"


def _check_same_grid(*objs) -> Grid:
    grid = objs[0].grid
    for o in objs[1:]:
        if o is not None and o.grid != grid:
            raise GridMismatchError(f"grid mismatch: {o.grid} vs {grid}")
    return grid


class GridFunction:
    """One real or complex value per grid cell; immutable after construction."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.asarray(values)
        if arr.shape != grid.shape:
            raise ValueError(f"value shape {arr.shape} != grid shape {grid.shape}")
        if np.iscomplexobj(arr):
            arr = arr.astype(np.complex128, copy=True)
        else:
            arr = arr.astype(np.float64, copy=True)
        if not np.all(np.isfinite(arr.view(np.float64) if arr.dtype == np.complex128 else arr)):
            raise ValueError("grid function values must be finite")
        arr.flags.writeable = False
        self.grid = grid
        self.values = arr

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "GridFunction":
        pts = grid.coords
        vals = fn(pts[:, 0]) if grid.n == 1 else fn(pts[:, 0], pts[:, 1])
        return cls(grid, np.asarray(vals).reshape(grid.shape))

    @property
    def is_complex(self) -> bool:
        return self.values.dtype == np.complex128

    def real(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.real)

    def imag(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.imag)

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return GridFunction(self.grid, self.values + other.values)
        return GridFunction(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return GridFunction(self.grid, self.values - other.values)
        return GridFunction(self.grid, self.values - other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            _check_same_grid(self, other)
            return GridFunction(self.grid, self.values * other.values)
        return GridFunction(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def abs(self) -> "GridFunction":
        return GridFunction(self.grid, np.abs(self.values))

    def __repr__(self) -> str:
        return f"GridFunction({self.grid}, dtype={self.values.dtype})"


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube made of whole grid cells.

    `lo` is the starting cell index per axis, `side_cells` the edge length in
    cells.  Measure is exactly (side_cells * h)^n.
    """

    grid: Grid
    lo: tuple
    side_cells: int

    def __post_init__(self):
        if self.side_cells < 1:
            raise ValueError("cube needs at least one cell per side")
        if len(self.lo) != self.grid.n:
            raise ValueError("lo must have one index per axis")
        for a in self.lo:
            if a < 0 or a + self.side_cells > self.grid.cells_per_axis:
                raise DomainError(f"cube {self.lo}+{self.side_cells} leaves the grid box")
        object.__setattr__(self, "lo", tuple(int(a) for a in self.lo))

    @classmethod
    def from_bounds(cls, grid: Grid, lower, side: float) -> "Cube":
        """Cube snapped from real bounds; lower corner and side must align to cells."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        k = side / grid.h
        side_cells = int(round(k))
        if side_cells < 1 or abs(k - side_cells) > 1e-9:
            raise ValueError(f"side {side} is not a whole number of cells (h={grid.h})")
        lo = []
        for a in lower:
            j = (a + grid.box_radius) / grid.h
            ji = int(round(j))
            if abs(j - ji) > 1e-9:
                raise ValueError(f"corner {a} is not cell-aligned (h={grid.h})")
            lo.append(ji)
        return cls(grid, tuple(lo), side_cells)

    @property
    def side(self) -> float:
        return self.side_cells * self.grid.h

    @property
    def measure(self) -> float:
        return self.side ** self.grid.n

    @property
    def cell_count(self) -> int:
        return self.side_cells ** self.grid.n

    @property
    def center(self) -> tuple:
        g = self.grid
        return tuple(-g.box_radius + a * g.h + self.side / 2.0 for a in self.lo)

    @property
    def lower(self) -> tuple:
        g = self.grid
        return tuple(-g.box_radius + a * g.h for a in self.lo)

    @property
    def slices(self) -> tuple:
        return tuple(slice(a, a + self.side_cells) for a in self.lo)

    def values(self, f: GridFunction) -> np.ndarray:
        _check_same_grid(f, self)
        return f.values[self.slices].ravel()

    def cellset(self) -> "CellSet":
        mask = np.zeros(self.grid.shape, dtype=bool)
        mask[self.slices] = True
        return CellSet(self.grid, mask)

    def contains(self, other: "Cube") -> bool:
        return all(
            a <= b and b + other.side_cells <= a + self.side_cells
            for a, b in zip(self.lo, other.lo)
        )

    def dilate(self, factor: float) -> "Cube":
        """Concentric dilation snapped to whole cells (center may shift by <= h/2)."""
        new_side = int(round(self.side_cells * factor))
        if new_side < 1:
            raise ValueError(f"dilation factor {factor} collapses the cube")
        shift = (new_side - self.side_cells) // 2
        lo = tuple(a - shift for a in self.lo)
        return Cube(self.grid, lo, new_side)

    def translate(self, cell_offset) -> "Cube":
        off = np.atleast_1d(np.asarray(cell_offset, dtype=int))
        lo = tuple(int(a + o) for a, o in zip(self.lo, off))
        return Cube(self.grid, lo, self.side_cells)

    def key(self) -> tuple:
        return (self.side_cells,) + self.lo


class CellSet:
    """A set of grid cells as a boolean mask; measure = count * h^n."""

    __slots__ = ("grid", "mask")

    def __init__(self, grid: Grid, mask: np.ndarray):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != grid.shape:
            raise ValueError("mask shape must match grid shape")
        mask = mask.copy()
        mask.flags.writeable = False
        self.grid = grid
        self.mask = mask

    @classmethod
    def empty(cls, grid: Grid) -> "CellSet":
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @classmethod
    def full(cls, grid: Grid) -> "CellSet":
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def from_predicate(cls, grid: Grid, pred) -> "CellSet":
        pts = grid.coords
        m = pred(pts[:, 0]) if grid.n == 1 else pred(pts[:, 0], pts[:, 1])
        return cls(grid, np.asarray(m, dtype=bool).reshape(grid.shape))

    @classmethod
    def from_indices(cls, grid: Grid, flat_indices) -> "CellSet":
        mask = np.zeros(grid.size, dtype=bool)
        mask[np.asarray(flat_indices, dtype=np.int64)] = True
        return cls(grid, mask.reshape(grid.shape))

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def measure(self) -> float:
        return self.count * self.grid.cell_volume

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask.ravel())

    def __and__(self, other: "CellSet") -> "CellSet":
        _check_same_grid(self, other)
        return CellSet(self.grid, self.mask & other.mask)

    def __or__(self, other: "CellSet") -> "CellSet":
        _check_same_grid(self, other)
        return CellSet(self.grid, self.mask | other.mask)

    def minus(self, other: "CellSet") -> "CellSet":
        _check_same_grid(self, other)
        return CellSet(self.grid, self.mask & ~other.mask)

    def complement(self) -> "CellSet":
        return CellSet(self.grid, ~self.mask)

    def __repr__(self) -> str:
        return f"CellSet({self.grid}, count={self.count})"


@dataclass
class CellPairSet:
    """Pairs (x, y) in E x F stored as two index axes plus a membership mask."""

    grid: Grid
    e_indices: np.ndarray
    f_indices: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.e_indices = np.asarray(self.e_indices, dtype=np.int64)
        self.f_indices = np.asarray(self.f_indices, dtype=np.int64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (len(self.e_indices), len(self.f_indices)):
            raise ValueError("pair mask shape must be (|E|, |F|)")

    @property
    def pair_count(self) -> int:
        return int(self.mask.sum())

    @property
    def pair_measure(self) -> float:
        """Product measure |G| in units of (length^n)^2."""
        return self.pair_count * self.grid.cell_volume ** 2


# --- quadrature -----------------------------------------------------------


def _masked_values(f: GridFunction, region) -> np.ndarray:
    if region is None:
        return f.values.ravel()
    _check_same_grid(f, region)
    return f.values.ravel()[region.mask.ravel()]


def exact_sum(values: np.ndarray) -> float:
    """Exactly rounded sum (Shewchuk); independent of term ordering."""
    return math.fsum(values.tolist())


def integrate(f: GridFunction, region: CellSet | None = None, weight: GridFunction | None = None):
    """Integral of f (optionally times `weight`) over a cell set.

    Sum of f*w*h^n over cells in ascending flat-index order using exact
    summation, so results are reproducible bit-for-bit.
    """
    vals = _masked_values(f, region)
    if weight is not None:
        wv = _masked_values(weight, region)
        vals = vals * wv
    if np.iscomplexobj(vals):
        return complex(exact_sum(vals.real), exact_sum(vals.imag)) * f.grid.cell_volume
    return exact_sum(vals) * f.grid.cell_volume


def lq_norm(g: GridFunction, q: float, weight: GridFunction | None = None,
            region: CellSet | None = None) -> float:
    """(sum |g|^q * w^q * h^n)^(1/q) over the region; the weight enters to the q-th power."""
    if not (q > 0 and math.isfinite(q)):
        raise ValueError(f"q must be a finite positive real, got {q}")
    vals = np.abs(_masked_values(g, region)) ** q
    if weight is not None:
        wv = _masked_values(weight, region)
        if np.any(wv <= 0):
            raise ValueError("weight must be positive on the region")
        vals = vals * wv ** q
    total = exact_sum(vals) * g.grid.cell_volume
    return total ** (1.0 / q)


# --- mollification --------------------------------------------------------


def bump_profile(r):
    """The standard smooth bump e^{-1/(1-r^2)} on r < 1, zero outside."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    ri = r[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ri * ri))
    return out


def _mollifier_taps(grid: Grid, t: float) -> np.ndarray:
    reach = int(math.ceil(t / grid.h)) - 1
    offs = np.arange(-reach, reach + 1) * grid.h
    if grid.n == 1:
        taps = bump_profile(offs / t)
    else:
        dx, dy = np.meshgrid(offs, offs, indexing="ij")
        taps = bump_profile(np.hypot(dx, dy) / t)
    taps /= taps.sum()
    # nudge the center tap so the tap mass is 1.0 to the last bit
    center = (reach,) * grid.n
    taps[center] += 1.0 - taps.sum()
    return taps


def mollify(g: GridFunction, t: float) -> GridFunction:
    """Convolve with the unit-mass bump scaled to radius t; constant extension at the box edge."""
    grid = g.grid
    if t < 2 * grid.h:
        raise ValueError(f"mollification radius t={t} below resolution (need t >= 2h = {2 * grid.h})")
    if g.is_complex:
        re = mollify(g.real(), t)
        im = mollify(g.imag(), t)
        return GridFunction(grid, re.values + 1j * im.values)
    taps = _mollifier_taps(grid, t)
    if grid.n == 1:
        reach = (len(taps) - 1) // 2
        padded = np.pad(g.values, reach, mode="edge")
        out = np.convolve(padded, taps, mode="valid")
    else:
        out = ndimage.convolve(g.values, taps, mode="nearest")
    return GridFunction(grid, out)
