"""Means, medians, mean oscillation, local mean oscillation, BMO estimation.

Real-function paths are exact (sorting + counting on whole cells); the two
complex-center infima use deterministic searches polished to a declared
tolerance.  Suprema over "all cubes" are taken over a declared CubeFamily of
dyadic cubes plus half-step translates; every report names its family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .grid import Cube, Grid, GridFunction, exact_sum
from . import rearrange


@dataclass(frozen=True)
class MedianInterval:
    """All valid medians form a closed interval; the lower end is the representative."""

    lo: float
    hi: float

    @property
    def rep(self) -> float:
        return self.lo

    def distance_to(self, c: float) -> float:
        return max(self.lo - c, c - self.hi, 0.0)


def interval_distance(a: MedianInterval, b: MedianInterval) -> float:
    return max(0.0, max(a.lo, b.lo) - min(a.hi, b.hi))


def _median_interval_sorted(vs: np.ndarray) -> MedianInterval:
    n = vs.size
    if n % 2 == 1:
        m = float(vs[n // 2])
        return MedianInterval(m, m)
    return MedianInterval(float(vs[n // 2 - 1]), float(vs[n // 2]))


def median(f: GridFunction, cube: Cube) -> MedianInterval:
    """Exact median interval of real f over the cube's cells."""
    vs = cube.values(f)
    if np.iscomplexobj(vs):
        raise ValueError("median is defined for real grid functions")
    if vs.size == 0:
        raise ValueError("median over an empty cube")
    return _median_interval_sorted(np.sort(vs))


class OscResult(NamedTuple):
    value: float
    center: complex


def cube_mean(f: GridFunction, cube: Cube):
    vs = cube.values(f)
    if np.iscomplexobj(vs):
        return complex(exact_sum(vs.real), exact_sum(vs.imag)) / vs.size
    return exact_sum(vs) / vs.size


def mean_oscillation(f: GridFunction, cube: Cube) -> OscResult:
    """Average of |f - f_Q| over the cube; returns the value and f_Q."""
    vs = cube.values(f)
    if vs.size == 0:
        raise ValueError("oscillation over an empty cube")
    fq = cube_mean(f, cube)
    val = exact_sum(np.abs(vs - fq)) / vs.size
    return OscResult(float(val), fq)


def _golden_min(obj, lo: float, hi: float, tol: float) -> float:
    """Golden-section minimum of a unimodal objective on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = obj(c), obj(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = obj(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = obj(d)
    return 0.5 * (a + b)


def inf_mean_oscillation(f: GridFunction, cube: Cube, tol: float = 1e-10) -> OscResult:
    """min over centers c of average |f - c|.

    Real f: any median is an exact minimizer.  Complex f: componentwise
    medians, then coordinate descent (golden section per axis) to `tol`.
    """
    vs = cube.values(f)
    if vs.size == 0:
        raise ValueError("oscillation over an empty cube")
    if not np.iscomplexobj(vs):
        m = _median_interval_sorted(np.sort(vs)).rep
        val = exact_sum(np.abs(vs - m)) / vs.size
        return OscResult(float(val), m)

    def obj(a, b):
        return float(np.abs(vs - (a + 1j * b)).sum()) / vs.size

    a = _median_interval_sorted(np.sort(vs.real)).rep
    b = _median_interval_sorted(np.sort(vs.imag)).rep
    span = max(np.ptp(vs.real), np.ptp(vs.imag), tol)
    for _ in range(64):
        a_new = _golden_min(lambda t: obj(t, b), a - span, a + span, tol / 4)
        b_new = _golden_min(lambda t: obj(a_new, t), b - span, b + span, tol / 4)
        moved = max(abs(a_new - a), abs(b_new - b))
        a, b = a_new, b_new
        span = max(4.0 * moved, 8.0 * tol)
        if moved < tol:
            break
    return OscResult(obj(a, b), complex(a, b))


def _rank_index(n_cells: int, t: float, vol: float) -> int:
    """Index i such that the rearrangement at measure t is the (i+1)-th largest value.

    Cumulative measures are exact dyadic multiples of the cell volume, so the
    comparison (i+1)*vol >= t is exact.
    """
    cum = np.arange(1, n_cells + 1, dtype=float) * vol
    return int(np.searchsorted(cum, t, side="left"))


def _rearranged_desc(desc: np.ndarray, t: float, vol: float) -> float:
    i = _rank_index(desc.size, t, vol)
    return float(desc[i]) if i < desc.size else 0.0


def local_osc(f: GridFunction, cube: Cube, lam: float) -> float:
    """Rearrangement of |f - median| over the cube at measure lam*|Q|."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0,1), got {lam}")
    vs = cube.values(f)
    if np.iscomplexobj(vs):
        raise ValueError("local_osc is defined for real grid functions")
    m = _median_interval_sorted(np.sort(vs)).rep
    desc = np.sort(np.abs(vs - m))[::-1]
    return _rearranged_desc(desc, lam * cube.measure, f.grid.cell_volume)


def _shortest_window(vs_sorted: np.ndarray, lam: float, vol: float, measure: float) -> OscResult:
    """min over real c of the rearranged |f - c| at measure lam*|Q|.

    The value at rank R is minimized by centering the shortest interval that
    covers n - R + 1 of the sorted values.
    """
    n = vs_sorted.size
    i = _rank_index(n, lam * measure, vol)
    if i >= n:
        return OscResult(0.0, float(vs_sorted[0]))
    w = n - i
    widths = vs_sorted[w - 1:] - vs_sorted[: n - w + 1]
    j = int(np.argmin(widths))
    return OscResult(float(widths[j]) / 2.0, float(vs_sorted[j] + widths[j] / 2.0))


def local_osc_inf(f: GridFunction, cube: Cube, lam: float, tol: float = 1e-8) -> OscResult:
    """inf over centers of the rearranged |f - c| at measure lam*|Q|.

    Real f: exact via the shortest-window scan.  Complex f: 33x33 grid over
    the value bounding box, then shrinking refinements to `tol`.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0,1), got {lam}")
    vs = cube.values(f)
    vol = f.grid.cell_volume
    if not np.iscomplexobj(vs):
        return _shortest_window(np.sort(vs), lam, vol, cube.measure)

    n = vs.size
    rank = _rank_index(n, lam * cube.measure, vol)
    if rank >= n:
        return OscResult(0.0, complex(vs[0]))
    kth = n - rank - 1  # index of the rank-th largest in ascending partition

    def obj(c):
        d = np.abs(vs - c)
        return float(np.partition(d, kth)[kth])

    re_lo, re_hi = float(vs.real.min()), float(vs.real.max())
    im_lo, im_hi = float(vs.imag.min()), float(vs.imag.max())
    best_c = complex(0.5 * (re_lo + re_hi), 0.5 * (im_lo + im_hi))
    best = obj(best_c)
    grid_pts = 33
    while True:
        re = np.linspace(re_lo, re_hi, grid_pts)
        im = np.linspace(im_lo, im_hi, grid_pts)
        vals = np.empty((grid_pts, grid_pts))
        for a_i, a in enumerate(re):
            for b_i, b in enumerate(im):
                vals[a_i, b_i] = obj(complex(a, b))
        a_i, b_i = np.unravel_index(np.argmin(vals), vals.shape)
        if vals[a_i, b_i] < best:
            best = float(vals[a_i, b_i])
            best_c = complex(re[a_i], im[b_i])
        dre = (re_hi - re_lo) / (grid_pts - 1)
        dim = (im_hi - im_lo) / (grid_pts - 1)
        if max(dre, dim) <= tol:
            break
        re_lo, re_hi = re[a_i] - 2 * dre, re[a_i] + 2 * dre
        im_lo, im_hi = im[b_i] - 2 * dim, im[b_i] + 2 * dim
    return OscResult(best, best_c)


# --- cube families ----------------------------------------------------------


@dataclass(frozen=True)
class CubeFamily:
    """Dyadic cubes of side 2^k for k in [k_min, k_max], plus half-step translates.

    The finite stand-in for suprema over all cubes; every level keeps at least
    4 cells per side so medians and rearrangement thresholds stay meaningful.
    """

    grid: Grid
    k_min: int
    k_max: int
    translates: bool = True

    def __post_init__(self):
        g = self.grid
        if self.k_min > self.k_max:
            raise ValueError("k_min must not exceed k_max")
        if self.k_min + g.s < 2:
            raise ValueError(
                f"side 2^{self.k_min} is under 4 cells at s={g.s}; raise k_min"
            )
        if self.k_max > g.L + 1:
            raise ValueError(f"side 2^{self.k_max} exceeds the grid box")

    @property
    def levels(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def side_cells(self, k: int) -> int:
        return 2 ** (k + self.grid.s)

    def _axis_starts(self, k: int, shifted: bool) -> np.ndarray:
        c = self.side_cells(k)
        K = self.grid.cells_per_axis
        if not shifted:
            return np.arange(0, K - c + 1, c)
        return np.arange(c // 2, K - c + 1, c)

    def cubes_at_level(self, k: int) -> Iterator[Cube]:
        g = self.grid
        c = self.side_cells(k)
        shift_opts = [False, True] if self.translates else [False]
        for shifts in _axis_shift_combos(g.n, shift_opts):
            starts = [self._axis_starts(k, sh) for sh in shifts]
            if any(len(st) == 0 for st in starts):
                continue
            if g.n == 1:
                for a in starts[0]:
                    yield Cube(g, (int(a),), c)
            else:
                for a in starts[0]:
                    for b in starts[1]:
                        yield Cube(g, (int(a), int(b)), c)

    def cubes(self) -> Iterator[Cube]:
        for k in self.levels:
            yield from self.cubes_at_level(k)

    @property
    def count(self) -> int:
        return sum(1 for _ in self.cubes())

    def descriptor(self) -> dict:
        return {
            "k_min": self.k_min,
            "k_max": self.k_max,
            "translates": self.translates,
            "grid": {"n": self.grid.n, "L": self.grid.L, "s": self.grid.s},
        }


def _axis_shift_combos(n: int, opts):
    if n == 1:
        return [(o,) for o in opts]
    return [(a, b) for a in opts for b in opts]


class BmoEstimate(NamedTuple):
    value: float
    cube: Cube


def bmo_norm(f: GridFunction, fam: CubeFamily, method: str = "mean",
             lam: float | None = None) -> BmoEstimate:
    """Supremum of the chosen oscillation over the family, with the attaining cube.

    method "mean" uses the average of |f - f_Q|; method "local" uses the
    center-infimum local oscillation at level lam.
    """
    if method not in ("mean", "local"):
        raise ValueError(f"unknown method {method!r}")
    if method == "local" and not (lam and 0.0 < lam < 1.0):
        raise ValueError("method 'local' needs lambda in (0,1)")
    best = -1.0
    best_cube = None
    vol = f.grid.cell_volume
    complex_vals = f.is_complex
    for cube in fam.cubes():
        vs = cube.values(f)
        if method == "mean":
            if complex_vals:
                fq = vs.mean()
            else:
                fq = float(np.add.reduce(vs)) / vs.size
            val = float(np.abs(vs - fq).sum()) / vs.size
        else:
            if complex_vals:
                val = local_osc_inf(f, cube, lam).value
            else:
                val = _shortest_window(np.sort(vs), lam, vol, cube.measure).value
        if val > best:
            best = val
            best_cube = cube
    if best_cube is None:
        raise ValueError("empty cube family")
    return BmoEstimate(best, best_cube)


@dataclass
class CubeRecord:
    cube_key: tuple
    mean_osc: float
    inf_mean_osc: float
    local: float | None
    local_inf_real: float | None
    local_inf: float
    median_lo: float | None
    median_hi: float | None


@dataclass
class OscillationReport:
    family: dict
    lam: float
    records: list
    suprema: dict

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "lambda": self.lam,
            "suprema": self.suprema,
            "records": [vars(r) for r in self.records],
        }


def build_report(f: GridFunction, fam: CubeFamily, lam: float) -> OscillationReport:
    """Per-cube oscillation table plus family suprema."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0,1), got {lam}")
    records = []
    vol = f.grid.cell_volume
    is_c = f.is_complex
    for cube in fam.cubes():
        vs = cube.values(f)
        osc = mean_oscillation(f, cube).value
        inf_osc = inf_mean_oscillation(f, cube).value
        if is_c:
            a = None
            a_tilde = None
            a_bar = local_osc_inf(f, cube, lam).value
            med_lo = med_hi = None
        else:
            srt = np.sort(vs)
            med = _median_interval_sorted(srt)
            desc = np.sort(np.abs(vs - med.rep))[::-1]
            a = _rearranged_desc(desc, lam * cube.measure, vol)
            a_tilde = _shortest_window(srt, lam, vol, cube.measure).value
            a_bar = a_tilde
            med_lo, med_hi = med.lo, med.hi
        records.append(CubeRecord(cube.key(), osc, inf_osc, a, a_tilde, a_bar, med_lo, med_hi))
    sup = {
        "mean_osc": max(r.mean_osc for r in records),
        "inf_mean_osc": max(r.inf_mean_osc for r in records),
        "local_inf": max(r.local_inf for r in records),
    }
    if not is_c:
        sup["local"] = max(r.local for r in records)
    return OscillationReport(fam.descriptor(), lam, records, sup)
