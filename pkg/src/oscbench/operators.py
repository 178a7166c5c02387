"""Singular/fractional integral operators, truncations, commutators, maximal functions.

Operators are realized by midpoint quadrature over source cells with the
diagonal cell omitted; for zero-order homogeneous kernels the symmetric grid
makes the omitted-singularity bias O(h).  The inner pair sums run on the
compiled backend when available, falling back to numpy (see _backend).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels_py
from ._backend import get_backend
from .grid import CellSet, Grid, GridFunction, _check_same_grid, lq_norm
from .oscillation import CubeFamily

_OUTPUT_CHUNK = 8192
_num_workers = 1


def set_workers(k: int) -> None:
    """Worker count for output-parallel quadrature; results are worker-invariant."""
    global _num_workers
    _num_workers = max(1, int(k))


@dataclass(frozen=True)
class ModulusSpec:
    """Modulus of continuity rho for kernel smoothness; Dini integrability checked numerically."""

    name: str
    coeff: float = 1.0

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.name == "linear":
            return self.coeff * t
        if self.name == "log_dini":
            out = np.zeros_like(t)
            pos = t > 0
            out[pos] = self.coeff / (1.0 + np.log(1.0 / t[pos])) ** 2
            return out
        raise ValueError(f"unknown modulus {self.name!r}")

    def tilde(self, t):
        """rho(t) + t, the modulus the truncated kernel satisfies."""
        return self.value(t) + np.asarray(t, dtype=float)

    def dini_integral(self) -> float:
        t = np.logspace(-12, 0, 4001)
        return float(np.trapezoid(self.value(t) / t, t))


_RHO_KINDS = {
    "hilbert": _kernels_py.KIND_HILBERT,
    "riesz_like": _kernels_py.KIND_RIESZ,
    "log_dini": _kernels_py.KIND_LOG_DINI,
}


@dataclass(frozen=True)
class KernelSpec:
    """Either a homogeneous (Omega, alpha) kernel or a named rho-type kernel.

    n=1 homogeneous kernels store Omega(+1), Omega(-1); n=2 kernels a uniform
    angle table with linear interpolation.  delta > 0 multiplies the kernel by
    (1 - cutoff(|x-y|/delta)), the smooth truncation vanishing inside B(0, delta/2).
    """

    n: int
    alpha: float
    variant: str = "homogeneous"
    om_pos: float = 1.0
    om_neg: float = -1.0
    om_table: np.ndarray | None = None
    rho_name: str | None = None
    size_const: float = 1.0
    modulus: ModulusSpec | None = None
    delta: float = 0.0

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("kernel dimension must be 1 or 2")
        if not 0.0 <= self.alpha < self.n:
            raise ValueError(f"alpha must lie in [0, n), got {self.alpha}")
        if self.delta < 0.0:
            raise ValueError("truncation radius must be nonnegative")
        if self.variant == "homogeneous":
            if self.n == 2:
                if self.om_table is None:
                    raise ValueError("2D homogeneous kernel needs an angle table")
                table = np.asarray(self.om_table, dtype=float).copy()
                if self.alpha == 0.0:
                    m = table.mean()
                    if abs(m) >= 1e-6:
                        raise ValueError(
                            f"zero-order kernel fails the mean-value-zero property (mean {m:.2e})"
                        )
                    table = table - m
                table.flags.writeable = False
                object.__setattr__(self, "om_table", table)
            elif self.alpha == 0.0 and abs(self.om_pos + self.om_neg) > 1e-10:
                raise ValueError("zero-order kernel fails the mean-value-zero property")
        elif self.variant == "rho":
            if self.rho_name not in _RHO_KINDS:
                raise ValueError(f"unknown rho-type kernel {self.rho_name!r}")
            if self.rho_name in ("hilbert", "log_dini") and self.n != 1:
                raise ValueError(f"{self.rho_name} kernel is one-dimensional")
            mod = self.modulus or _default_modulus(self.rho_name, self.n, self.alpha)
            if not math.isfinite(mod.dini_integral()):
                raise ValueError("modulus fails the Dini condition")
            object.__setattr__(self, "modulus", mod)
        else:
            raise ValueError(f"unknown kernel variant {self.variant!r}")

    @property
    def kind(self) -> int:
        if self.variant == "homogeneous":
            return _kernels_py.KIND_HOMOGENEOUS
        return _RHO_KINDS[self.rho_name]

    def truncated(self, delta: float) -> "KernelSpec":
        return replace(self, delta=float(delta))

    def descriptor(self) -> dict:
        out = {"variant": self.variant, "alpha": self.alpha, "delta": self.delta, "n": self.n}
        if self.variant == "homogeneous":
            if self.n == 1:
                out["omega"] = [self.om_pos, self.om_neg]
            else:
                out["omega_table"] = list(map(float, self.om_table))
        else:
            out["name"] = self.rho_name
            out["size_const"] = self.size_const
        return out


def _default_modulus(name: str, n: int, alpha: float) -> ModulusSpec:
    if name == "log_dini":
        return ModulusSpec("log_dini", 32.0)
    return ModulusSpec("linear", 4.0 * (n - alpha + 1.0))


def kernel_from_descriptor(desc: dict, n: int) -> KernelSpec:
    variant = desc.get("variant", "homogeneous")
    alpha = float(desc.get("alpha", 0.0))
    delta = float(desc.get("delta", 0.0))
    if variant == "homogeneous":
        if n == 1:
            om = desc.get("omega", [1.0, -1.0])
            return KernelSpec(n, alpha, om_pos=float(om[0]), om_neg=float(om[1]), delta=delta)
        return KernelSpec(n, alpha, om_table=np.asarray(desc["omega_table"], dtype=float), delta=delta)
    return KernelSpec(
        n, alpha, variant="rho", rho_name=desc["name"],
        size_const=float(desc.get("size_const", 1.0)), delta=delta,
    )


def hilbert_kernel(alpha: float = 0.0, delta: float = 0.0) -> KernelSpec:
    return KernelSpec(1, alpha, variant="rho", rho_name="hilbert", delta=delta)


def riesz_kernel(n: int, alpha: float, delta: float = 0.0) -> KernelSpec:
    return KernelSpec(n, alpha, variant="rho", rho_name="riesz_like", delta=delta)


def log_dini_kernel(alpha: float = 0.0, delta: float = 0.0) -> KernelSpec:
    return KernelSpec(1, alpha, variant="rho", rho_name="log_dini", delta=delta)


@dataclass(frozen=True)
class SymbolPowerCommutator:
    """Order-m commutator data: kernel (b(x)-b(y))^m K(x,y)."""

    kernel: KernelSpec
    symbol: GridFunction
    order: int = 1

    def __post_init__(self):
        if self.order < 1 or self.order != int(self.order):
            raise ValueError("commutator order must be a positive integer")
        if self.symbol.is_complex:
            raise ValueError("commutator symbols are real-valued")


def _kernel_args(k: KernelSpec):
    table = k.om_table if k.om_table is not None else np.empty(0)
    # fresh copy: the spec's table is frozen and memoryviews need writable buffers
    return (k.kind, float(k.alpha), float(k.delta), float(k.om_pos), float(k.om_neg),
            np.array(table, dtype=float))


def _run_quadrature(k: KernelSpec, xp, ip, yp, jp, w, bx, by, exps):
    backend = get_backend()
    kind, alpha, delta, om_pos, om_neg, table = _kernel_args(k)
    P = xp.shape[0]
    if P <= _OUTPUT_CHUNK or _num_workers == 1:
        return backend.pair_quadrature(xp, ip, yp, jp, w, bx, by, exps,
                                       kind, alpha, delta, om_pos, om_neg, table)
    spans = [(lo, min(P, lo + _OUTPUT_CHUNK)) for lo in range(0, P, _OUTPUT_CHUNK)]

    def work(span):
        lo, hi = span
        return backend.pair_quadrature(
            np.ascontiguousarray(xp[lo:hi]), ip[lo:hi], yp, jp, w,
            np.ascontiguousarray(bx[:, lo:hi]), by, exps,
            kind, alpha, delta, om_pos, om_neg, table)

    out = np.empty(P)
    with ThreadPoolExecutor(max_workers=_num_workers) as ex:
        for (lo, hi), chunk in zip(spans, ex.map(work, spans)):
            out[lo:hi] = chunk
    return out


def _source_arrays(f: GridFunction):
    grid = f.grid
    flat = f.values.ravel()
    idx = np.flatnonzero(flat != 0)
    yp = np.ascontiguousarray(grid.coords[idx])
    w = flat[idx] * grid.cell_volume
    return idx.astype(np.int64), yp, w


def _output_arrays(grid: Grid, out_region: CellSet | None, at):
    if at is not None:
        xp = np.ascontiguousarray(np.atleast_2d(np.asarray(at, dtype=float)))
        if xp.shape[1] != grid.n:
            raise ValueError(f"evaluation points must have {grid.n} coordinates")
        ip = np.full(xp.shape[0], -1, dtype=np.int64)
        return xp, ip, None
    if out_region is None:
        ids = np.arange(grid.size, dtype=np.int64)
    else:
        _check_same_grid_region(grid, out_region)
        ids = out_region.indices().astype(np.int64)
    xp = np.ascontiguousarray(grid.coords[ids])
    return xp, ids, ids


def _check_same_grid_region(grid, region):
    if region.grid != grid:
        raise ValueError("output region lives on a different grid")


def _symbol_stacks(symbols, orders, ip, at, jdx, grid):
    S = len(symbols)
    P = len(ip)
    bx = np.empty((S, P))
    by = np.empty((S, len(jdx)))
    for s, b in enumerate(symbols):
        flat = b.values.ravel()
        by[s] = flat[jdx]
        if at is None:
            bx[s] = flat[ip]
        else:
            bx[s] = _sample_at(b, at)
    return np.ascontiguousarray(bx), np.ascontiguousarray(by), np.asarray(orders, dtype=np.int64)


def _sample_at(b: GridFunction, pts) -> np.ndarray:
    """Symbol value at arbitrary points, interpolated linearly between cell centers."""
    grid = b.grid
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if grid.n == 1:
        return np.interp(pts[:, 0], grid.axis, b.values)
    # bilinear on the center lattice, clamped at the box edge
    u = np.clip((pts - grid.axis[0]) / grid.h, 0.0, grid.cells_per_axis - 1.0)
    i0 = np.floor(u).astype(np.int64)
    i0 = np.minimum(i0, grid.cells_per_axis - 2)
    frac = u - i0
    v00 = b.values[i0[:, 0], i0[:, 1]]
    v10 = b.values[i0[:, 0] + 1, i0[:, 1]]
    v01 = b.values[i0[:, 0], i0[:, 1] + 1]
    v11 = b.values[i0[:, 0] + 1, i0[:, 1] + 1]
    fx, fy = frac[:, 0], frac[:, 1]
    return (v00 * (1 - fx) * (1 - fy) + v10 * fx * (1 - fy)
            + v01 * (1 - fx) * fy + v11 * fx * fy)


def _evaluate(k: KernelSpec, f: GridFunction, symbols, orders, out_region, at):
    grid = f.grid
    if k.n != grid.n:
        raise ValueError("kernel dimension does not match the grid")
    xp, ip, ids = _output_arrays(grid, out_region, at)
    jdx, yp, w = _source_arrays(f)
    bx, by, exps = _symbol_stacks(symbols, orders, ip, at, jdx, grid)
    if f.is_complex:
        re = _run_quadrature(k, xp, ip, yp, jdx, np.ascontiguousarray(w.real), bx, by, exps)
        im = _run_quadrature(k, xp, ip, yp, jdx, np.ascontiguousarray(w.imag), bx, by, exps)
        vals = re + 1j * im
    else:
        vals = _run_quadrature(k, xp, ip, yp, jdx, np.ascontiguousarray(w.real), bx, by, exps)
    if at is not None:
        return vals
    if out_region is None:
        return GridFunction(grid, vals.reshape(grid.shape))
    full = np.zeros(grid.size, dtype=vals.dtype)
    full[ids] = vals
    return GridFunction(grid, full.reshape(grid.shape))


def apply(k: KernelSpec, f: GridFunction, out_region: CellSet | None = None, at=None):
    """(Tf)(x) = sum_{y != x} K(x, y) f(y) h^n over the source cells.

    `at` evaluates at arbitrary points instead of cell centers; `out_region`
    restricts output cells (others are zero).
    """
    return _evaluate(k, f, [], [], out_region, at)


def commutator(c: SymbolPowerCommutator, f: GridFunction,
               out_region: CellSet | None = None, at=None):
    """Order-m commutator via the kernel (b(x)-b(y))^m K(x,y)."""
    _check_same_grid(f, c.symbol)
    return _evaluate(c.kernel, f, [c.symbol], [c.order], out_region, at)


def multilinear_commutator(symbols, k: KernelSpec, f: GridFunction,
                           out_region: CellSet | None = None, at=None):
    """Nested commutator [b_m, ... [b_1, T]] via the product kernel."""
    symbols = list(symbols)
    if not symbols:
        raise ValueError("multilinear commutator needs at least one symbol")
    for b in symbols:
        _check_same_grid(f, b)
        if b.is_complex:
            raise ValueError("commutator symbols are real-valued")
    return _evaluate(k, f, symbols, [1] * len(symbols), out_region, at)


def maximal(f: GridFunction, alpha: float, fam: CubeFamily) -> GridFunction:
    """Fractional maximal function over family cubes: max |Q|^(alpha/n - 1) int_Q |f|.

    alpha = 0 is the uncentered Hardy-Littlewood maximal used by the A_infty
    constant.  Cubes with zero mass cannot attain the max, so only cubes
    meeting the support contribute.
    """
    grid = f.grid
    if not 0.0 <= alpha < grid.n:
        raise ValueError(f"alpha must lie in [0, n), got {alpha}")
    if fam.grid != grid:
        raise ValueError("cube family lives on a different grid")
    absf = np.abs(f.values)
    out = np.zeros(grid.shape)
    nz = np.argwhere(absf > 0)
    if nz.size == 0:
        return GridFunction(grid, out)
    lo_bb = nz.min(axis=0)
    hi_bb = nz.max(axis=0)
    vol = grid.cell_volume
    for cube in fam.cubes():
        if any(cube.lo[d] + cube.side_cells <= lo_bb[d] or cube.lo[d] > hi_bb[d]
               for d in range(grid.n)):
            continue
        mass = float(absf[cube.slices].sum()) * vol
        if mass == 0.0:
            continue
        val = cube.measure ** (alpha / grid.n - 1.0) * mass
        region = out[cube.slices]
        np.maximum(region, val, out=region)
    return GridFunction(grid, out)


def kernel_pair_values(k: KernelSpec, x_pts, y_pts) -> np.ndarray:
    """Elementwise K(x_i, y_i); used for direct kernel checks."""
    x = np.atleast_2d(np.asarray(x_pts, dtype=float))
    y = np.atleast_2d(np.asarray(y_pts, dtype=float))
    dx0 = x[:, 0] - y[:, 0]
    if k.n == 2:
        dx1 = x[:, 1] - y[:, 1]
        r = np.hypot(dx0, dx1)
    else:
        dx1 = None
        r = np.abs(dx0)
    if np.any(r == 0):
        raise ValueError("kernel is singular on the diagonal")
    kind, alpha, delta, om_pos, om_neg, table = _kernel_args(k)
    return _kernels_py.kernel_matrix(dx0, dx1, r, kind, k.n, alpha, delta, om_pos, om_neg, table)


def truncation_error_scaling(c: SymbolPowerCommutator, f: GridFunction, deltas,
                             q: float = 2.0, weight: GridFunction | None = None) -> dict:
    """Least-squares slope of log error vs log delta for the truncated commutator."""
    deltas = sorted((float(d) for d in deltas), reverse=True)
    h = f.grid.h
    if any(d < 4 * h for d in deltas):
        raise ValueError(f"truncation radii below resolution (need >= 4h = {4 * h})")
    base = commutator(c, f)
    errors = []
    for d in deltas:
        img = commutator(SymbolPowerCommutator(c.kernel.truncated(d), c.symbol, c.order), f)
        errors.append(lq_norm(img - base, q, weight))
    errors = np.asarray(errors)
    if np.any(errors == 0.0):
        return {"deltas": deltas, "errors": errors.tolist(), "exponent": None, "degenerate": True}
    slope = float(np.polyfit(np.log(deltas), np.log(errors), 1)[0])
    return {"deltas": deltas, "errors": errors.tolist(), "exponent": slope, "degenerate": False}
