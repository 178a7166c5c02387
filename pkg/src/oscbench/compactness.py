"""Total-boundedness diagnostics for commutator image families.

fk_report realizes the three precompactness conditions (uniform bound,
uniform vanishing at infinity, uniform translation continuity) as finite
curves for the images of a normalized sample family; the verdict is a
one-directional desk-scale diagnostic.  boundedness_probe estimates the
operator norm against the product of the symbols' BMO norms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators
from .grid import CellSet, GridFunction, lq_norm
from .io import make_function
from .oscillation import CubeFamily, bmo_norm
from .weights import Weight

_NORMALIZATION_TOL = 1e-8


def make_samples(grid, w: Weight, p: float, count: int, seed: int,
                 support_radius: float = 2.0) -> list[GridFunction]:
    """Seeded bumps and indicators normalized to unit L^p(w^p) norm."""
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(count):
        center = rng.uniform(-support_radius / 2.0, support_radius / 2.0, size=grid.n)
        radius = rng.uniform(8 * grid.h, support_radius / 2.0)
        if i % 2 == 0:
            desc = {"name": "bump", "params": {"center": center.tolist(),
                                               "radius": radius, "height": 1.0}}
        else:
            lower = center - radius / 2.0
            upper = center + radius / 2.0
            desc = {"name": "indicator", "params": {"lower": lower.tolist(),
                                                    "upper": upper.tolist()}}
        f = make_function(grid, desc)
        norm = lq_norm(f, p, w.fn)
        if norm == 0.0:
            continue
        samples.append(f * (1.0 / norm))
    return samples


def _outside_box(grid, half_width: float) -> CellSet:
    if grid.n == 1:
        return CellSet.from_predicate(grid, lambda x: np.abs(x) > half_width)
    return CellSet.from_predicate(
        grid, lambda x, y: np.maximum(np.abs(x), np.abs(y)) > half_width)


def shift_difference_norm(g: GridFunction, cell_shift, q: float, w: GridFunction) -> float:
    """||g(.+z) - g(.)|| in L^q(w^q) over the overlap of the shifted domains."""
    grid = g.grid
    shift = np.atleast_1d(np.asarray(cell_shift, dtype=int))
    src = []
    dst = []
    for d in range(grid.n):
        z = int(shift[d] if d < len(shift) else 0)
        K = grid.cells_per_axis
        if abs(z) >= K:
            raise ValueError("shift exceeds the domain")
        if z >= 0:
            dst.append(slice(0, K - z))
            src.append(slice(z, K))
        else:
            dst.append(slice(-z, K))
            src.append(slice(0, K + z))
    diff = np.zeros(grid.shape, dtype=g.values.dtype)
    region = np.zeros(grid.shape, dtype=bool)
    diff[tuple(dst)] = g.values[tuple(src)] - g.values[tuple(dst)]
    region[tuple(dst)] = True
    return lq_norm(GridFunction(grid, diff), q, w, region=CellSet(grid, region))


@dataclass
class FKReport:
    descriptor: dict
    bound_sup: float
    tail_n: list
    tail_values: list
    shift_cells: list
    shift_values: list
    thresholds: dict | None
    verdict: bool | None
    diagnostic_only: bool = True

    def to_dict(self) -> dict:
        return {
            "descriptor": self.descriptor,
            "bound_sup": self.bound_sup,
            "tail_n": self.tail_n,
            "tail_values": self.tail_values,
            "shift_cells": self.shift_cells,
            "shift_values": self.shift_values,
            "thresholds": self.thresholds,
            "verdict": self.verdict,
            "diagnostic_only": self.diagnostic_only,
        }


def fk_report(b: GridFunction, m: int, kernel: operators.KernelSpec, w: Weight,
              p: float, q: float, samples, n_list, z_list,
              thresholds=None) -> FKReport:
    """Uniform bound, tail, and translation curves for the commutator images.

    Samples must be normalized in L^p(w^p); shifts are whole-cell offsets so
    the translation modulus carries no resampling error.
    """
    samples = list(samples)
    for f in samples:
        norm = lq_norm(f, p, w.fn)
        if abs(norm - 1.0) > _NORMALIZATION_TOL:
            raise ValueError(f"sample not normalized in L^p(w^p): norm={norm}")
    comm = operators.SymbolPowerCommutator(kernel, b, m)
    images = [operators.commutator(comm, f) for f in samples]

    bound_sup = max((lq_norm(g, q, w.fn) for g in images), default=0.0)
    n_list = sorted(float(N) for N in n_list)
    tail_vals = []
    for N in n_list:
        region = _outside_box(b.grid, N)
        tail_vals.append(max((lq_norm(g, q, w.fn, region=region) for g in images),
                             default=0.0))
    z_list = sorted(int(z) for z in z_list)
    shift_vals = []
    for z in z_list:
        shift = (z,) * b.grid.n
        shift_vals.append(max((shift_difference_norm(g, shift, q, w.fn) for g in images),
                              default=0.0))

    verdict = None
    if thresholds is not None:
        verdict = (
            bound_sup <= thresholds["bound"]
            and (not tail_vals or tail_vals[-1] <= thresholds["tail"])
            and (not shift_vals or shift_vals[0] <= thresholds["shift"])
        )
    descriptor = {
        "kernel": kernel.descriptor(),
        "order": m,
        "p": p,
        "q": q,
        "samples": len(samples),
    }
    return FKReport(descriptor, bound_sup, list(n_list), tail_vals,
                    list(z_list), shift_vals,
                    dict(thresholds) if thresholds else None, verdict)


def boundedness_probe(symbols, kernel: operators.KernelSpec, w: Weight,
                      p: float, q: float, samples, fam: CubeFamily) -> dict:
    """max over samples of ||image||_{L^q(w^q)} / ||f||_{L^p(w^p)}, with the BMO product."""
    lhs = 1.0 / q
    rhs = 1.0 / p - kernel.alpha / kernel.n
    if abs(lhs - rhs) > 1e-12:
        raise ValueError(f"exponent relation 1/q = 1/p - alpha/n violated ({lhs} vs {rhs})")
    symbols = list(symbols)
    ratios = []
    for f in samples:
        img = operators.multilinear_commutator(symbols, kernel, f)
        denom = lq_norm(f, p, w.fn)
        ratios.append(lq_norm(img, q, w.fn) / denom if denom > 0 else 0.0)
    est = max(ratios, default=0.0)
    bmo_product = 1.0
    for b in symbols:
        bmo_product *= bmo_norm(b, fam, method="mean").value
    return {
        "operator_norm_estimate": est,
        "bmo_product": bmo_product,
        "normalized_ratio": est / bmo_product if bmo_product > 0 else None,
        "per_sample": ratios,
    }
