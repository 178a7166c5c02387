"""Vanishing-oscillation diagnostics and the constructive smooth approximant.

`limit_profile` turns the three vanishing conditions (small scales, large
scales, far field) into finite curves over a cube family.  `build_approximant`
runs the constructive proof machinery: scan the curves for feasible scale
exponents, tile concentric boxes with dyadic cubes, set the step function to
tile medians, mollify, and certify the residual oscillation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Cube, DomainError, GridFunction, mollify
from .oscillation import (
    CubeFamily,
    _median_interval_sorted,
    _rearranged_desc,
    _shortest_window,
    bmo_norm,
    local_osc_inf,
    mean_oscillation,
)


@dataclass
class LimitProfile:
    """Per-scale and far-field oscillation envelopes over a family.

    `scale_sides` ascending cube sides with `scale_sup` the oscillation sup at
    each; `far_d` half-widths d with `far_sup` the sup over family cubes
    disjoint from [-d, d]^n.  No limits are claimed, curves only.
    """

    kind: str
    lam: float | None
    scale_sides: np.ndarray
    scale_sup: np.ndarray
    far_d: np.ndarray
    far_sup: np.ndarray
    family: dict

    def small_scale_curve(self):
        keep = self.scale_sides <= 1.0
        return self.scale_sides[keep], self.scale_sup[keep]

    def large_scale_curve(self):
        keep = self.scale_sides >= 1.0
        return self.scale_sides[keep], self.scale_sup[keep]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": self.lam,
            "scale_sides": self.scale_sides.tolist(),
            "scale_sup": self.scale_sup.tolist(),
            "far_d": self.far_d.tolist(),
            "far_sup": self.far_sup.tolist(),
            "family": self.family,
        }


def _cube_outside_box(cube: Cube, d: float) -> bool:
    lower = cube.lower
    side = cube.side
    return any(lo >= d or lo + side <= -d for lo in lower)


def _osc_value(f: GridFunction, cube: Cube, kind: str, lam: float | None) -> float:
    if kind == "mean":
        return mean_oscillation(f, cube).value
    if f.is_complex:
        return local_osc_inf(f, cube, lam).value
    vs = np.sort(cube.values(f))
    return _shortest_window(vs, lam, f.grid.cell_volume, cube.measure).value


def limit_profile(f: GridFunction, fam: CubeFamily, kind: str = "local",
                  lam: float | None = 0.25) -> LimitProfile:
    """Oscillation envelopes per scale and per far-field box over the family."""
    if kind not in ("mean", "local"):
        raise ValueError(f"unknown oscillation kind {kind!r}")
    if kind == "local" and not (lam and 0.0 < lam < 1.0):
        raise ValueError("kind 'local' needs lambda in (0,1)")
    grid = f.grid
    sides = []
    sups = []
    far_d = [2.0 ** j for j in range(0, grid.L)]
    far_sup = [0.0] * len(far_d)
    for k in fam.levels:
        level_sup = 0.0
        for cube in fam.cubes_at_level(k):
            val = _osc_value(f, cube, kind, lam)
            level_sup = max(level_sup, val)
            for i, d in enumerate(far_d):
                if val > far_sup[i] and _cube_outside_box(cube, d):
                    far_sup[i] = val
        sides.append(2.0 ** k)
        sups.append(level_sup)
    return LimitProfile(kind, lam if kind == "local" else None,
                        np.asarray(sides), np.asarray(sups),
                        np.asarray(far_d), np.asarray(far_sup), fam.descriptor())


def cmo_check(prof: LimitProfile, thresholds) -> dict:
    """Threshold verdict on the three vanishing conditions; a desk-scale diagnostic only."""
    t1, t2, t3 = (float(t) for t in thresholds)
    small = float(prof.scale_sup[0])
    large = float(prof.scale_sup[-1])
    far = float(prof.far_sup[-1]) if prof.far_sup.size else 0.0
    conditions = {
        "small_scale": {"value": small, "threshold": t1, "pass": small <= t1},
        "large_scale": {"value": large, "threshold": t2, "pass": large <= t2},
        "far_field": {"value": far, "threshold": t3, "pass": far <= t3},
    }
    return {
        "conditions": conditions,
        "verdict": all(c["pass"] for c in conditions.values()),
        "diagnostic_only": True,
    }


# --- constructive approximant ----------------------------------------------


@dataclass
class ApproximantResult:
    """Output of the constructive approximation at level eps.

    step_fn is the piecewise-median function, smooth_fn its mollification with
    the step function's base value removed (compactly supported).  The
    certificate carries the residual local oscillation of f - step_fn at the
    shifted level and the BMO estimate of f - smooth_fn.
    """

    eps: float
    lam: float
    cert_lam: float
    small_exp: int      # tile scale exponent (i)
    large_exp: int      # large-scale feasibility exponent (j)
    far_exp: int        # far-field feasibility exponent (k)
    inner_exp: int      # d1 = far_exp + 1
    stable_exp: int     # d2: medians settle beyond this box
    outer_exp: int      # d3: step function constant outside this box
    subtile_depth: int  # v
    mollify_radius: float
    base_value: float
    max_adjacent_jump: float
    mollify_sup_diff: float
    step_fn: GridFunction
    smooth_fn: GridFunction
    certificate: dict

    def params_dict(self) -> dict:
        return {
            "eps": self.eps, "lambda": self.lam, "cert_lambda": self.cert_lam,
            "i": self.small_exp, "j": self.large_exp, "k": self.far_exp,
            "d1": self.inner_exp, "d2": self.stable_exp, "d3": self.outer_exp,
            "v": self.subtile_depth, "t": self.mollify_radius,
            "base_value": self.base_value,
            "max_adjacent_jump": self.max_adjacent_jump,
            "mollify_sup_diff": self.mollify_sup_diff,
        }


def shifted_level(lam: float) -> float:
    """The certificate level (2*lam + 1)/4."""
    return (2.0 * lam + 1.0) / 4.0


def subtile_depth(lam: float, n: int) -> int:
    """max{3 + floor(log2(1/(((1+2 lam)/(4 lam))^(1/n) - 1))), 0}."""
    ratio = ((1.0 + 2.0 * lam) / (4.0 * lam)) ** (1.0 / n) - 1.0
    return max(3 + math.floor(math.log2(1.0 / ratio)), 0)


def outer_gap(lam: float, n: int) -> int:
    """d3 - d2 = 4 + ceil(log2((4/(1-2 lam))^(1/n)))."""
    return 4 + math.ceil(math.log2((4.0 / (1.0 - 2.0 * lam)) ** (1.0 / n)))


def _local_osc_sorted(vs: np.ndarray, lam: float, vol: float, measure: float) -> float:
    med = _median_interval_sorted(vs).rep
    desc = np.sort(np.abs(vs - med))[::-1]
    return _rearranged_desc(desc, lam * measure, vol)


def _box_cube(grid, exp: int) -> Cube:
    """R_e = [-2^e, 2^e]^n as a grid cube."""
    if exp > grid.L:
        raise DomainError(f"box [-2^{exp}, 2^{exp}]^n exceeds the domain (L={grid.L})")
    half_cells = 2 ** (exp + grid.s)
    mid = grid.cells_per_axis // 2
    return Cube(grid, (mid - half_cells,) * grid.n, 2 * half_cells)


def _median_over(f: GridFunction, cube: Cube) -> float:
    return _median_interval_sorted(np.sort(cube.values(f))).rep


def _tile_lattice(grid, box: Cube, side_cells: int):
    """Dyadic tiles of the given side covering `box` (boundaries always align)."""
    for axis_starts in _product_ranges(box, side_cells, grid.n):
        yield Cube(grid, axis_starts, side_cells)


def _product_ranges(box: Cube, c: int, n: int):
    axes = []
    for d in range(n):
        start = box.lo[d]
        count = box.side_cells // c
        axes.append([start + i * c for i in range(count)])
    if n == 1:
        for a in axes[0]:
            yield (a,)
    else:
        for a in axes[0]:
            for b in axes[1]:
                yield (a, b)


def build_approximant(f: GridFunction, eps: float, lam: float, fam: CubeFamily) -> ApproximantResult:
    """Construct the piecewise-median step function and its mollification.

    Scans the family for the three feasibility exponents at level eps, tiles
    the inner box and the concentric annuli with dyadic cubes whose side grows
    with the annulus, assigns tile medians, fixes the function to the outer
    box median beyond it, mollifies at the largest admissible dyadic radius,
    and certifies the residual oscillation over the same family.
    """
    if f.is_complex:
        raise ValueError("the approximant construction takes real symbols; "
                         "apply it to real and imaginary parts separately")
    if not 0.0 < lam < 0.5:
        raise ValueError(f"lambda must lie in (0, 1/2), got {lam}")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    grid = f.grid
    vol = grid.cell_volume

    # oscillation sup per level and per far-field box over the family
    level_sup: dict[int, float] = {}
    far_min = max(2 - grid.s, -6)
    far_sup = {d_exp: 0.0 for d_exp in range(far_min, grid.L)}
    for k in fam.levels:
        sup_k = 0.0
        for cube in fam.cubes_at_level(k):
            vs = np.sort(cube.values(f))
            val = _local_osc_sorted(vs, lam, vol, cube.measure)
            sup_k = max(sup_k, val)
            for d_exp in far_sup:
                if val > far_sup[d_exp] and _cube_outside_box(cube, 2.0 ** d_exp):
                    far_sup[d_exp] = val
        level_sup[k] = sup_k

    # (a) feasibility exponents.  Candidate tile exponents i keep the
    # small-scale sup below eps (largest first, for the coarsest admissible
    # tiling); tiles stay at 8+ cells so the mollification radius clears 2h.
    i_min = 3 - grid.s
    i_candidates = [i for i in range(fam.k_max - 1, i_min - 1, -1)
                    if max(level_sup[k] for k in fam.levels if k <= i + 1) < eps]
    if not i_candidates:
        raise DomainError(
            f"small-scale oscillation never drops below eps={eps} at tileable scales")
    large_exp = None
    for j in range(fam.k_min, fam.k_max + 1):
        if max(level_sup[k] for k in fam.levels if k >= j) < eps:
            large_exp = j
            break
    if large_exp is None:
        raise DomainError(
            f"large-scale oscillation never drops below eps={eps} on the family")
    far_found = None
    for d_exp in sorted(far_sup):
        if far_sup[d_exp] < eps:
            far_found = d_exp
            break
    if far_found is None:
        raise DomainError(
            f"far-field oscillation never drops below eps={eps} on the family")

    # (b)+(c) pack the construction into the box: for each candidate i pick
    # k = max(far exponent, i+2), d1 = k+1, then search the stable exponent d2
    # from which tile and box medians agree; d3 = d2 + gap must stay <= L.
    gap = outer_gap(lam, grid.n)
    median_cache: dict[tuple, float] = {}

    def tile_median(tile: Cube) -> float:
        key = tile.key()
        if key not in median_cache:
            median_cache[key] = _median_over(f, tile)
        return median_cache[key]

    box_median_cache: dict[int, float] = {}

    def box_median(m: int) -> float:
        if m not in box_median_cache:
            box_median_cache[m] = _median_over(f, _box_cube(grid, m))
        return box_median_cache[m]

    def annulus_tiles(m: int, small_e: int, inner_e: int):
        box = _box_cube(grid, m)
        t_exp = small_e if m <= inner_e else small_e + m - inner_e
        inner = _box_cube(grid, m - 1)
        for tile in _tile_lattice(grid, box, 2 ** (t_exp + grid.s)):
            if not inner.contains(tile):
                yield tile

    chosen = None
    for i_cand in i_candidates:
        k_cand = max(far_found, i_cand + 2)
        d1_cand = k_cand + 1
        if d1_cand >= grid.L:
            continue
        for m0 in range(d1_cand + 1, grid.L + 1 - gap):
            ok = True
            for m in range(m0, m0 + gap + 1):
                if abs(box_median(m) - box_median(m - 1)) >= eps:
                    ok = False
                    break
                if any(abs(tile_median(tile) - box_median(m)) >= eps / 2.0
                       for tile in annulus_tiles(m, i_cand, d1_cand)):
                    ok = False
                    break
            if ok:
                chosen = (i_cand, k_cand, d1_cand, m0)
                break
        if chosen:
            break
    if chosen is None:
        raise DomainError(
            f"construction does not fit: no stable exponent with d3 = d2 + {gap} "
            f"<= L = {grid.L} at eps={eps}")
    small_exp, far_exp, inner_exp, stable_exp = chosen
    outer_exp = stable_exp + gap
    if outer_exp > grid.L:
        raise DomainError(f"outer box exponent d3={outer_exp} exceeds the domain L={grid.L}")

    # (d) assemble the piecewise-median step function
    base_value = box_median(outer_exp)
    g_vals = np.full(grid.shape, base_value)
    inner_box = _box_cube(grid, inner_exp)
    c_in = 2 ** (small_exp + grid.s)
    for tile in _tile_lattice(grid, inner_box, c_in):
        g_vals[tile.slices] = tile_median(tile)
    for m in range(inner_exp + 1, outer_exp + 1):
        for tile in annulus_tiles(m, small_exp, inner_exp):
            g_vals[tile.slices] = tile_median(tile)
    step_fn = GridFunction(grid, g_vals)

    jumps = [np.abs(np.diff(g_vals, axis=d)).max() for d in range(grid.n)]
    max_jump = float(max(jumps))

    # (e) mollification radius: largest dyadic fraction of the tile side, at
    # least 2h, whose sup deviation stays within the measured jump bound
    t = (2.0 ** small_exp) / 4.0
    if t < 2.0 * grid.h:
        raise DomainError(
            f"mollification radius {t} is below grid resolution 2h={2 * grid.h}")
    smooth_raw = None
    sup_diff = math.inf
    while t >= 2.0 * grid.h:
        smooth_raw = mollify(step_fn, t)
        sup_diff = float(np.abs(smooth_raw.values - g_vals).max())
        if sup_diff <= max_jump + 1e-12:
            break
        t /= 2.0
    smooth_vals = smooth_raw.values - base_value
    # flush the sub-ulp convolution residue where the step function is constant,
    # making the compact support exact
    support_box = _box_cube(grid, min(outer_exp + 1, grid.L))
    outside = np.ones(grid.shape, dtype=bool)
    outside[support_box.slices] = False
    smooth_vals[outside] = 0.0
    smooth_fn = GridFunction(grid, smooth_vals)

    # (g) certificate over the same family
    cert_lam = shifted_level(lam)
    resid = f - step_fn
    cert_sup = 0.0
    for cube in fam.cubes():
        vs = np.sort(cube.values(resid))
        val = _shortest_window(vs, cert_lam, vol, cube.measure).value
        cert_sup = max(cert_sup, val)
    smooth_bmo = bmo_norm(f - smooth_fn, fam, method="mean")
    certificate = {
        "residual_local_osc": cert_sup,
        "residual_bmo": smooth_bmo.value,
        "residual_bmo_cube": smooth_bmo.cube.key(),
        "ratio_local": cert_sup / eps,
        "ratio_bmo": smooth_bmo.value / eps,
    }

    return ApproximantResult(
        eps=eps, lam=lam, cert_lam=cert_lam,
        small_exp=small_exp, large_exp=large_exp, far_exp=far_exp,
        inner_exp=inner_exp, stable_exp=stable_exp, outer_exp=outer_exp,
        subtile_depth=subtile_depth(lam, grid.n),
        mollify_radius=t, base_value=float(base_value),
        max_adjacent_jump=max_jump, mollify_sup_diff=sup_diff,
        step_fn=step_fn, smooth_fn=smooth_fn, certificate=certificate,
    )
