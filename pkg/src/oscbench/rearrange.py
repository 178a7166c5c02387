"""Non-increasing rearrangement of grid functions over cell sets.

The rearrangement of a grid function restricted to a cell set is an exact
step function: sort the |values|, attach one cell measure to each, merge
ties.  `evaluate` then realizes f*(t) = inf{a > 0 : |{|f| > a}| < t} without
any approximation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CellSet, GridFunction, _check_same_grid


@dataclass(frozen=True)
class RearrangementProfile:
    """Breakpoints of the step function t -> f*(t).

    `values` strictly decreasing, `cum_measures` strictly increasing; entry i
    means |{ |f| >= values[i] }| = cum_measures[i].  Zero values are dropped:
    the profile covers the support, `set_measure` the whole cell set.
    """

    values: np.ndarray
    cum_measures: np.ndarray
    support_measure: float
    set_measure: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "cum_measures", np.asarray(self.cum_measures, dtype=float))


def profile(f: GridFunction, region: CellSet | None = None) -> RearrangementProfile:
    """Exact rearrangement profile of f restricted to a nonempty cell set."""
    if region is None:
        region = CellSet.full(f.grid)
    _check_same_grid(f, region)
    if region.count == 0:
        raise ValueError("rearrangement over an empty cell set")
    vol = f.grid.cell_volume
    mags = np.sort(np.abs(f.values.ravel()[region.mask.ravel()]))[::-1]
    nz = mags > 0.0
    mags = mags[nz]
    if mags.size == 0:
        return RearrangementProfile(
            np.empty(0), np.empty(0), 0.0, region.count * vol
        )
    # merge equal magnitudes into single breakpoints
    vals, counts = np.unique(mags[::-1], return_counts=True)
    vals = vals[::-1]
    cum = np.cumsum(counts[::-1]) * vol
    return RearrangementProfile(vals, cum, mags.size * vol, region.count * vol)


def evaluate(p: RearrangementProfile, t: float) -> float:
    """f*(t): the smallest breakpoint value whose strict super-level measure is < t."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if p.values.size == 0 or t > p.support_measure:
        return 0.0
    # smallest i with cum_measures[i] >= t; super-level |{|f| > values[i]}| = cum[i-1] < t
    i = int(np.searchsorted(p.cum_measures, t, side="left"))
    if i >= p.values.size:
        return 0.0
    return float(p.values[i])


def rearranged_value(f: GridFunction, region: CellSet | None, t: float) -> float:
    """One-shot (f chi_region)*(t)."""
    return evaluate(profile(f, region), t)
