"""Muckenhoupt constants over cube families, dual weights, reverse Holder probes.

All suprema run over a declared CubeFamily; reports carry its descriptor.
Per-cube averages are plain cell means, so the algebraic identities between
the constant families hold to rounding and are asserted at 1e-12.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import operators
from .grid import Cube, GridFunction, integrate
from .oscillation import CubeFamily


def conjugate_exponent(p: float) -> float:
    return p / (p - 1.0)


class Weight:
    """Positive grid function with cached family constants and exponent context."""

    def __init__(self, fn: GridFunction, p: float | None = None, q: float | None = None,
                 alpha: float | None = None):
        if fn.is_complex:
            raise ValueError("weights are real-valued")
        if fn.values.min() <= 0.0:
            raise ValueError("weights must be strictly positive")
        if p is not None and q is not None and alpha is not None:
            lhs = 1.0 / q
            rhs = 1.0 / p - alpha / fn.grid.n
            if abs(lhs - rhs) > 1e-12:
                raise ValueError(f"exponent relation 1/q = 1/p - alpha/n violated ({lhs} vs {rhs})")
        self.fn = fn
        self.p = p
        self.q = q
        self.alpha = alpha
        self._cache: dict = {}

    @property
    def grid(self):
        return self.fn.grid

    def _cached(self, key, compute):
        if key not in self._cache:
            self._cache[key] = compute()
        return self._cache[key]

    def __repr__(self):
        return f"Weight({self.fn!r}, p={self.p}, q={self.q}, alpha={self.alpha})"


class ConstantReport(NamedTuple):
    value: float      # the constant in the bracket normalization [w]_{A..}
    root: float       # the paper-display root ([w]^{1/p} or [w]^{1/q})
    cube: Cube        # attaining cube


def _family_key(fam: CubeFamily) -> tuple:
    return (fam.k_min, fam.k_max, fam.translates)


def ap_cube_quantity(w: GridFunction, p: float, cube: Cube) -> float:
    """(avg_Q w) * (avg_Q w^(1-p'))^(p-1)."""
    vals = cube.values(w)
    dual = vals ** (1.0 - conjugate_exponent(p))
    return float(vals.mean() * dual.mean() ** (p - 1.0))


def ap_constant(w: Weight, p: float, fam: CubeFamily) -> ConstantReport:
    """[w]_{A_p} over the family (bracket normalization; root reported alongside)."""
    if not p > 1.0:
        raise ValueError(f"A_p needs p > 1, got {p}")

    def compute():
        vals = w.fn.values
        # extreme exponents may overflow to inf; inf is the honest supremum then
        with np.errstate(over="ignore"):
            dual = vals ** (1.0 - conjugate_exponent(p))
            best, best_cube = -1.0, None
            for cube in fam.cubes():
                q_val = float(vals[cube.slices].mean() * dual[cube.slices].mean() ** (p - 1.0))
                if q_val > best:
                    best, best_cube = q_val, cube
        return ConstantReport(best, best ** (1.0 / p), best_cube)

    return w._cached(("ap", p, _family_key(fam)), compute)


def apq_cube_quantity(w: GridFunction, p: float, q: float, cube: Cube) -> float:
    """[(avg_Q w^q)^(1/q) (avg_Q w^(-p'))^(1/p')]^q."""
    vals = cube.values(w)
    pp = conjugate_exponent(p)
    return float((vals ** q).mean() * (vals ** -pp).mean() ** (q / pp))


def apq_constant(w: Weight, p: float, q: float, fam: CubeFamily) -> ConstantReport:
    """[w]_{A_{p,q}} over the family."""
    if not (1.0 < p < math.inf and 1.0 < q < math.inf):
        raise ValueError(f"A_pq needs 1 < p, q < inf, got p={p}, q={q}")

    def compute():
        vals = w.fn.values
        pp = conjugate_exponent(p)
        wq = vals ** q
        wdual = vals ** -pp
        best, best_cube = -1.0, None
        for cube in fam.cubes():
            q_val = float(wq[cube.slices].mean() * wdual[cube.slices].mean() ** (q / pp))
            if q_val > best:
                best, best_cube = q_val, cube
        return ConstantReport(best, best ** (1.0 / q), best_cube)

    return w._cached(("apq", p, q, _family_key(fam)), compute)


def ainf_constant(w: Weight, fam: CubeFamily) -> ConstantReport:
    """Fujii-Wilson constant: sup_Q (1/w(Q)) int_Q M(chi_Q w), M over the same family."""

    def compute():
        grid = w.grid
        best, best_cube = -1.0, None
        for cube in fam.cubes():
            masked = np.zeros(grid.shape)
            masked[cube.slices] = w.fn.values[cube.slices]
            mfn = operators.maximal(GridFunction(grid, masked), 0.0, fam)
            num = integrate(mfn, cube.cellset())
            den = integrate(w.fn, cube.cellset())
            val = num / den
            if val > best:
                best, best_cube = val, cube
        return ConstantReport(best, best, best_cube)

    return w._cached(("ainf", _family_key(fam)), compute)


def pair_ainf_constant(w: Weight, p: float, fam: CubeFamily) -> float:
    """max of the A_infty constants of w and its dual weight."""
    sigma = dual_weight(w, p)
    return max(ainf_constant(w, fam).value, ainf_constant(sigma, fam).value)


def dual_weight(w: Weight, p: float, fam: CubeFamily | None = None,
                check_tol: float = 1e-12) -> Weight:
    """sigma = w^(1-p'); when a family is given, the per-cube duality identity
    [sigma]_{A_p'}^(1/p') = [w]_{A_p}^(1/p) is verified on construction."""
    if not p > 1.0:
        raise ValueError(f"dual weight needs p > 1, got {p}")
    pp = conjugate_exponent(p)
    sigma = Weight(GridFunction(w.grid, w.fn.values ** (1.0 - pp)))
    if fam is not None:
        for cube in fam.cubes():
            lhs = ap_cube_quantity(sigma.fn, pp, cube) ** (1.0 / pp)
            rhs = ap_cube_quantity(w.fn, p, cube) ** (1.0 / p)
            if abs(lhs - rhs) > check_tol * max(1.0, abs(rhs)):
                raise AssertionError(
                    f"duality identity violated on {cube}: {lhs} vs {rhs}")
    return sigma


def reverse_holder_ratio(w: Weight, eps: float, fam: CubeFamily) -> float:
    """max over the family of (avg w^(1+eps))^(1/(1+eps)) / (avg w)."""
    if not eps > 0.0:
        raise ValueError("reverse Holder probe needs eps > 0")
    vals = w.fn.values
    powed = vals ** (1.0 + eps)
    worst = 0.0
    for cube in fam.cubes():
        num = powed[cube.slices].mean() ** (1.0 / (1.0 + eps))
        den = vals[cube.slices].mean()
        worst = max(worst, float(num / den))
    return worst


def reverse_holder_check(w: Weight, fam: CubeFamily, ratio_bound: float = 2.0,
                         eps_hi: float = 16.0, tol: float = 1e-3) -> dict:
    """Largest eps keeping the reverse Holder ratio <= ratio_bound (bisection)."""
    lo = 0.0
    hi = eps_hi
    if reverse_holder_ratio(w, hi, fam) <= ratio_bound:
        return {"eps": hi, "ratio": reverse_holder_ratio(w, hi, fam), "saturated": True}
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if reverse_holder_ratio(w, mid, fam) <= ratio_bound:
            lo = mid
        else:
            hi = mid
    ratio = reverse_holder_ratio(w, lo, fam) if lo > 0 else 1.0
    return {"eps": lo, "ratio": ratio, "saturated": False}


def openness_exponent(w: Weight, p: float, fam: CubeFamily,
                      blowup: float = 10.0, tol: float = 1e-3) -> float:
    """Smallest exponent r < p with [w]_{A_r} <= blowup * [w]_{A_p} (bisection).

    Realizes the self-improvement w in A_{p-eps}; the threshold is a declared
    artifact convention, not an asserted sharp constant.
    """
    cap = blowup * ap_constant(w, p, fam).value
    lo, hi = 1.0 + 1e-9, p
    if ap_constant(w, lo, fam).value <= cap:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ap_constant(w, mid, fam).value <= cap:
            hi = mid
        else:
            lo = mid
    return hi


def conjugated_weight(w: Weight, b_list, z_list) -> Weight:
    """e^{Re(sum b_j z_j)} * w, the conjugation multiplier weight."""
    if len(b_list) != len(z_list) or not b_list:
        raise ValueError("need matching, nonempty symbol and coefficient lists")
    expo = np.zeros(w.grid.shape)
    for b, z in zip(b_list, z_list):
        if b.is_complex:
            raise ValueError("conjugation symbols are real-valued")
        expo = expo + b.values * complex(z).real
    return Weight(GridFunction(w.grid, np.exp(expo) * w.fn.values))


def conjugate_constant(w: Weight, p: float, b_list, z_list, fam: CubeFamily) -> float:
    """[e^{Re(sum b_j z_j)} w]_{A_p} over the family."""
    return ap_constant(conjugated_weight(w, b_list, z_list), p, fam).value


def conjugate_apq_constant(w: Weight, p: float, q: float, b_list, z_list,
                           fam: CubeFamily) -> float:
    """[e^{Re(sum b_j z_j)} w]_{A_{p,q}} over the family."""
    return apq_constant(conjugated_weight(w, b_list, z_list), p, q, fam).value
