import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscbench import CellSet, Cube, Grid, GridFunction, GridMismatchError
from oscbench.grid import DomainError, integrate, lq_norm, mollify
from oscbench.io import (
    make_function,
    read_function_csv,
    write_function_csv,
)

from conftest import random_cellset, random_function


def indicator(grid, lo, hi):
    return GridFunction.from_callable(grid, lambda x: ((x > lo) & (x < hi)).astype(float))


class TestIntegrate:
    def test_indicator_mass_exact(self, grid1d):
        f = indicator(grid1d, 0.0, 1.0)
        assert integrate(f) == 1.0

    def test_constant_times_weight(self, grid1d):
        f = GridFunction(grid1d, np.full(grid1d.shape, 3.0))
        w = GridFunction(grid1d, np.full(grid1d.shape, 2.0))
        region = Cube.from_bounds(grid1d, [0.0], 1.0).cellset()
        assert integrate(f, region, w) == pytest.approx(6.0, abs=1e-14)

    def test_matches_naive_oracle(self, grid1d):
        rng = np.random.default_rng(3)
        f = random_function(grid1d, rng)
        w = random_function(grid1d, rng)
        region = random_cellset(grid1d, rng)
        got = integrate(f, region, w)
        mask = region.mask
        naive = (f.values[mask] * w.values[mask]).sum() * grid1d.cell_volume
        assert got == pytest.approx(naive, rel=1e-12)

    def test_additive_over_disjoint_sets(self, grid1d):
        rng = np.random.default_rng(4)
        f = random_function(grid1d, rng)
        split = rng.random(grid1d.shape) < 0.3
        a = CellSet(grid1d, split)
        b = CellSet(grid1d, ~split)
        total = integrate(f)
        assert integrate(f, a) + integrate(f, b) == pytest.approx(total, rel=1e-14)

    def test_whole_cell_translation_invariance(self, grid1d):
        rng = np.random.default_rng(5)
        vals = np.zeros(grid1d.shape)
        vals[20:60] = rng.normal(size=40)
        f = GridFunction(grid1d, vals)
        g = GridFunction(grid1d, np.roll(vals, 17))
        region = CellSet.from_indices(grid1d, np.arange(20, 60))
        shifted = CellSet.from_indices(grid1d, np.arange(37, 77))
        assert integrate(f, region) == integrate(g, shifted)

    def test_grid_mismatch_raises(self, grid1d):
        other = Grid(1, 2, 5)
        f = GridFunction(grid1d, np.ones(grid1d.shape))
        with pytest.raises(GridMismatchError):
            integrate(f, CellSet.full(other))


class TestLqNorm:
    def test_indicator_unit(self, grid1d):
        f = indicator(grid1d, 0.0, 1.0)
        assert lq_norm(f, 2.0) == pytest.approx(1.0, abs=1e-14)

    def test_zero_function(self, grid1d):
        f = GridFunction(grid1d, np.zeros(grid1d.shape))
        assert lq_norm(f, 3.0) == 0.0

    def test_matches_power_sum_oracle(self, grid1d):
        rng = np.random.default_rng(6)
        f = random_function(grid1d, rng)
        w = GridFunction(grid1d, np.exp(rng.normal(size=grid1d.shape)))
        got = lq_norm(f, 3.0, w)
        naive = ((np.abs(f.values) ** 3 * w.values ** 3).sum() * grid1d.cell_volume) ** (1 / 3)
        assert got == pytest.approx(naive, rel=1e-12)

    def test_invalid_q(self, grid1d):
        f = GridFunction(grid1d, np.ones(grid1d.shape))
        with pytest.raises(ValueError):
            lq_norm(f, 0.0)
        with pytest.raises(ValueError):
            lq_norm(f, -1.0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10 ** 6), q=st.sampled_from([1.0, 1.5, 2.0, 4.0]))
    def test_minkowski(self, seed, q):
        grid = Grid(1, 1, 4)
        rng = np.random.default_rng(seed)
        f = random_function(grid, rng)
        g = random_function(grid, rng)
        lhs = lq_norm(f + g, q)
        rhs = lq_norm(f, q) + lq_norm(g, q)
        assert lhs <= rhs + 1e-12


class TestMollify:
    def test_preserves_constants(self, grid1d):
        f = GridFunction(grid1d, np.full(grid1d.shape, 2.75))
        out = mollify(f, 8 * grid1d.h)
        assert np.abs(out.values - 2.75).max() < 1e-12

    def test_linear_fixed_in_interior(self, grid1d):
        f = GridFunction.from_callable(grid1d, lambda x: x)
        out = mollify(f, 8 * grid1d.h)
        interior = slice(16, -16)
        assert np.abs(out.values[interior] - f.values[interior]).max() < 1e-6

    def test_commutes_with_constant_shift(self, grid1d):
        rng = np.random.default_rng(7)
        f = random_function(grid1d, rng)
        t = 0.125
        lhs = mollify(f + 5.0, t)
        rhs = mollify(f, t) + 5.0
        assert np.abs(lhs.values - rhs.values).max() < 1e-12

    def test_bump_matches_refined_oracle(self):
        coarse = Grid(1, 2, 6)
        fine = Grid(1, 2, 8)
        desc = {"name": "bump", "params": {"center": [0.0], "radius": 1.0, "height": 1.0}}
        t = 0.1
        out = mollify(make_function(coarse, desc), t)
        ref = mollify(make_function(fine, desc), t)
        # a coarse center is the midpoint of the two middle fine centers
        fine_blocks = ref.values.reshape(-1, 4)
        ref_at_coarse = 0.5 * (fine_blocks[:, 1] + fine_blocks[:, 2])
        assert np.abs(out.values - ref_at_coarse).max() < 1e-4

    def test_below_resolution_raises(self, grid1d):
        f = GridFunction(grid1d, np.zeros(grid1d.shape))
        with pytest.raises(ValueError):
            mollify(f, 1.5 * grid1d.h)

    def test_2d_preserves_constants(self, grid2d):
        f = GridFunction(grid2d, np.full(grid2d.shape, -1.5))
        out = mollify(f, 4 * grid2d.h)
        assert np.abs(out.values + 1.5).max() < 1e-12


class TestGeometry:
    def test_grid_invariants(self):
        g = Grid(1, 3, 4)
        assert g.cells_per_axis == 2 ** (3 + 4 + 1)
        assert g.cell_volume == g.h
        assert g.axis[0] == -8 + g.h / 2

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            Grid(3, 2, 2)

    def test_cube_measure_exact(self, grid1d):
        c = Cube(grid1d, (10,), 12)
        assert c.measure == 12 * grid1d.h
        assert c.cell_count == 12

    def test_cube_from_bounds_snaps(self, grid1d):
        c = Cube.from_bounds(grid1d, [0.0], 1.0)
        assert c.lo == (256,)
        assert c.side == 1.0
        with pytest.raises(ValueError):
            Cube.from_bounds(grid1d, [0.001], 1.0)

    def test_cube_outside_box(self, grid1d):
        with pytest.raises(DomainError):
            Cube(grid1d, (508,), 10)

    def test_dilate_and_contains(self, grid1d):
        c = Cube.from_bounds(grid1d, [0.0], 0.5)
        big = c.dilate(2)
        assert big.side == 1.0
        assert big.contains(c)

    def test_cellset_algebra(self, grid1d):
        a = Cube.from_bounds(grid1d, [0.0], 1.0).cellset()
        b = Cube.from_bounds(grid1d, [0.5], 1.0).cellset()
        assert (a & b).measure == pytest.approx(0.5)
        assert (a | b).measure == pytest.approx(1.5)
        assert a.minus(b).measure == pytest.approx(0.5)
        assert a.complement().count == grid1d.size - a.count

    def test_gridfunction_rejects_nonfinite(self, grid1d):
        vals = np.ones(grid1d.shape)
        vals[3] = np.inf
        with pytest.raises(ValueError):
            GridFunction(grid1d, vals)

    def test_values_immutable(self, grid1d):
        f = GridFunction(grid1d, np.ones(grid1d.shape))
        with pytest.raises(ValueError):
            f.values[0] = 2.0


class TestIO:
    def test_csv_roundtrip(self, tmp_path, grid1d):
        rng = np.random.default_rng(8)
        f = random_function(grid1d, rng)
        path = tmp_path / "f.csv"
        write_function_csv(f, path)
        g = read_function_csv(path)
        assert g.grid == grid1d
        assert np.array_equal(g.values, f.values)

    def test_csv_roundtrip_complex(self, tmp_path, grid1d):
        rng = np.random.default_rng(9)
        f = GridFunction(grid1d, rng.normal(size=grid1d.shape)
                         + 1j * rng.normal(size=grid1d.shape))
        path = tmp_path / "fc.csv"
        write_function_csv(f, path)
        g = read_function_csv(path)
        assert np.array_equal(g.values, f.values)

    def test_generators(self, grid1d):
        const = make_function(grid1d, {"name": "constant", "params": {"value": 2.0}})
        assert np.all(const.values == 2.0)
        lin = make_function(grid1d, {"name": "linear", "params": {"slope": [3.0]}})
        assert lin.values[10] == pytest.approx(3.0 * grid1d.axis[10])
        ind = make_function(grid1d, {"name": "indicator",
                                     "params": {"lower": [0.0], "upper": [1.0]}})
        assert integrate(ind) == 1.0
        bump = make_function(grid1d, {"name": "bump",
                                      "params": {"center": [0.0], "radius": 1.0}})
        assert bump.values.max() <= 1.0
        assert bump.values[np.abs(grid1d.axis) >= 1.0].max() == 0.0
        log_abs = make_function(grid1d, {"name": "log_abs", "params": {"coeff": 1.0}})
        assert np.isfinite(log_abs.values).all()
        pw = make_function(grid1d, {"name": "power_weight", "params": {"exponent": -0.5}})
        assert np.isfinite(pw.values).all() and pw.values.min() > 0
        lac = make_function(grid1d, {"name": "lacunary_sum",
                                     "params": {"terms": 4, "amplitude": 0.5}})
        assert np.isfinite(lac.values).all()
        with pytest.raises(ValueError):
            make_function(grid1d, {"name": "nope"})
