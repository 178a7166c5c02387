import math

import numpy as np
import pytest

import oscbench._backend as backend_mod
from oscbench import CubeFamily, Grid, GridFunction
from oscbench.io import make_function
from oscbench.operators import (
    KernelSpec,
    ModulusSpec,
    SymbolPowerCommutator,
    apply,
    commutator,
    hilbert_kernel,
    kernel_from_descriptor,
    kernel_pair_values,
    log_dini_kernel,
    maximal,
    multilinear_commutator,
    riesz_kernel,
    set_workers,
    truncation_error_scaling,
)

from conftest import random_function


def indicator(grid, lo, hi):
    return GridFunction.from_callable(grid, lambda x: ((x > lo) & (x < hi)).astype(float))


class TestKernelSpec:
    def test_mean_zero_enforced_1d(self):
        KernelSpec(1, 0.0, om_pos=1.0, om_neg=-1.0)
        with pytest.raises(ValueError):
            KernelSpec(1, 0.0, om_pos=1.0, om_neg=-0.5)
        # with alpha > 0 no cancellation needed
        KernelSpec(1, 0.5, om_pos=1.0, om_neg=1.0)

    def test_mean_zero_2d_subtraction(self):
        angles = 2 * np.pi * np.arange(256) / 256
        table = np.cos(angles) + 1e-8
        k = KernelSpec(2, 0.0, om_table=table)
        assert abs(k.om_table.mean()) < 1e-10
        with pytest.raises(ValueError):
            KernelSpec(2, 0.0, om_table=np.cos(angles) + 0.1)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            KernelSpec(1, 1.0, om_pos=1.0, om_neg=-1.0)
        with pytest.raises(ValueError):
            KernelSpec(1, -0.1, om_pos=1.0, om_neg=-1.0)

    def test_rho_kernels_validate(self):
        hilbert_kernel()
        riesz_kernel(1, 0.5)
        log_dini_kernel()
        with pytest.raises(ValueError):
            KernelSpec(2, 0.0, variant="rho", rho_name="hilbert")
        with pytest.raises(ValueError):
            KernelSpec(1, 0.0, variant="rho", rho_name="mystery")

    def test_dini_integrals_finite(self):
        assert math.isfinite(ModulusSpec("linear", 4.0).dini_integral())
        assert math.isfinite(ModulusSpec("log_dini", 32.0).dini_integral())
        # linear modulus integrates to its coefficient
        assert ModulusSpec("linear", 4.0).dini_integral() == pytest.approx(4.0, rel=1e-3)

    def test_descriptor_roundtrip(self):
        k = KernelSpec(1, 0.5, om_pos=1.0, om_neg=1.0, delta=0.25)
        k2 = kernel_from_descriptor(k.descriptor(), 1)
        assert k2 == k
        kr = log_dini_kernel(delta=0.125)
        kr2 = kernel_from_descriptor(kr.descriptor(), 1)
        assert kr2.rho_name == "log_dini" and kr2.delta == 0.125


class TestClosedForms:
    """Quadrature against hand integrals at h = 2^-8."""

    def setup_method(self):
        self.grid = Grid(1, 2, 8)

    def test_fractional_integral(self):
        k = KernelSpec(1, 0.5, om_pos=1.0, om_neg=1.0)
        f = indicator(self.grid, 0.0, 1.0)
        got = apply(k, f, at=[[2.0]])[0]
        assert got == pytest.approx(2 * (math.sqrt(2) - 1), abs=1e-3)

    def test_hilbert_log(self):
        k = KernelSpec(1, 0.0, om_pos=1.0, om_neg=-1.0)
        f = indicator(self.grid, -1.0, 1.0)
        got = apply(k, f, at=[[2.0]])[0]
        assert got == pytest.approx(math.log(3.0), abs=1e-3)

    def test_commutator_closed_form(self):
        k = KernelSpec(1, 0.5, om_pos=1.0, om_neg=1.0)
        b = GridFunction.from_callable(self.grid, lambda x: x)
        f = indicator(self.grid, 0.0, 1.0)
        got = commutator(SymbolPowerCommutator(k, b, 1), f, at=[[2.0]])[0]
        expected = (2.0 / 3.0) * (2 * math.sqrt(2) - 1)
        assert got == pytest.approx(expected, abs=1e-3)

    def test_refinement_order(self):
        expected = 2 * (math.sqrt(2) - 1)
        errs = []
        for s in (8, 9):
            g = Grid(1, 2, s)
            k = KernelSpec(1, 0.5, om_pos=1.0, om_neg=1.0)
            f = indicator(g, 0.0, 1.0)
            errs.append(abs(apply(k, f, at=[[2.0]])[0] - expected))
        order = math.log2(errs[0] / errs[1])
        assert order >= 0.9

    def test_odd_kernel_cancellation(self):
        # even source about a grid center: the principal value vanishes there
        g = Grid(1, 2, 7)
        k = KernelSpec(1, 0.0, om_pos=1.0, om_neg=-1.0)
        center = g.axis[g.cells_per_axis // 2 + 8]
        f = GridFunction.from_callable(g, lambda x: np.cos(x - center) * (np.abs(x - center) < 1))
        out_idx = g.cells_per_axis // 2 + 8
        img = apply(k, f)
        assert abs(img.values[out_idx]) < 1e-10


class TestAlgebra:
    def setup_method(self):
        self.grid = Grid(1, 1, 5)
        self.rng = np.random.default_rng(44)

    def test_linearity(self):
        k = hilbert_kernel()
        f = random_function(self.grid, self.rng)
        g = random_function(self.grid, self.rng)
        lhs = apply(k, 2.0 * f + (-3.0) * g)
        rhs = 2.0 * apply(k, f) + (-3.0) * apply(k, g)
        scale = np.abs(lhs.values).max()
        assert np.abs(lhs.values - rhs.values).max() <= 1e-12 * max(1.0, scale)

    def test_symbol_shift_invariance(self):
        k = hilbert_kernel()
        f = random_function(self.grid, self.rng)
        b = random_function(self.grid, self.rng)
        img1 = commutator(SymbolPowerCommutator(k, b, 2), f)
        img2 = commutator(SymbolPowerCommutator(k, b + 3.0, 2), f)
        assert np.abs(img1.values - img2.values).max() < 1e-10

    def test_constant_symbol_vanishes(self):
        k = hilbert_kernel()
        f = random_function(self.grid, self.rng)
        b = GridFunction(self.grid, np.full(self.grid.shape, 2.0))
        for m in (1, 2, 3):
            img = commutator(SymbolPowerCommutator(k, b, m), f)
            assert np.abs(img.values).max() == 0.0

    def test_power_matches_recursion(self):
        k = hilbert_kernel()
        f = random_function(self.grid, self.rng)
        b = random_function(self.grid, self.rng)

        # recursion oracle: T_b^m f = b T_b^(m-1) f - T_b^(m-1)(b f)
        def recursive(m, g):
            if m == 0:
                return apply(k, g)
            prev_b = recursive(m - 1, b * g)
            prev = recursive(m - 1, g)
            return b * prev - prev_b

        for m in (1, 2, 3):
            direct = commutator(SymbolPowerCommutator(k, b, m), f)
            ref = recursive(m, f)
            scale = max(1.0, np.abs(ref.values).max())
            assert np.abs(direct.values - ref.values).max() <= 1e-10 * scale

    def test_multilinear_matches_power(self):
        k = hilbert_kernel()
        f = random_function(self.grid, self.rng)
        b = random_function(self.grid, self.rng)
        img1 = multilinear_commutator([b, b, b], k, f)
        img2 = commutator(SymbolPowerCommutator(k, b, 3), f)
        scale = max(1.0, np.abs(img2.values).max())
        assert np.abs(img1.values - img2.values).max() <= 1e-12 * scale

    def test_multilinear_constant_vanishes(self):
        k = hilbert_kernel()
        f = random_function(self.grid, self.rng)
        b1 = random_function(self.grid, self.rng)
        b2 = GridFunction(self.grid, np.full(self.grid.shape, -1.0))
        img = multilinear_commutator([b1, b2], k, f)
        assert np.abs(img.values).max() == 0.0

    def test_multilinear_matches_nested_recursion(self):
        k = hilbert_kernel()
        f = random_function(self.grid, self.rng)
        b1 = random_function(self.grid, self.rng)
        b2 = random_function(self.grid, self.rng)
        direct = multilinear_commutator([b1, b2], k, f)
        inner = lambda g: b1 * apply(k, g) - apply(k, b1 * g)  # noqa: E731
        ref = b2 * inner(f) - inner(b2 * f)
        scale = max(1.0, np.abs(ref.values).max())
        assert np.abs(direct.values - ref.values).max() <= 1e-10 * scale

    def test_domination_by_size_majorant(self):
        f = random_function(self.grid, self.rng)
        for alpha in (0.25, 0.5):
            k = log_dini_kernel(alpha=alpha)
            majorant = riesz_kernel(1, alpha)
            lhs = np.abs(apply(k, f).values)
            rhs = (1.0 + 0.5) * apply(majorant, f.abs()).values  # size constant of log_dini
            assert np.all(lhs <= rhs + 1e-12)


class TestTruncation:
    def test_cutoff_region(self):
        k = hilbert_kernel(delta=0.5)
        x = np.full((8, 1), 0.0)
        y = np.linspace(0.05, 1.0, 8)[:, None]
        vals = kernel_pair_values(k, x, y)
        r = np.abs(y[:, 0])
        assert np.all(vals[r <= 0.25] == 0.0)
        full = kernel_pair_values(hilbert_kernel(), x, y)
        assert np.allclose(vals[r >= 0.5], full[r >= 0.5])

    def test_truncated_smoothness_bound(self):
        # |K^d(x,y) - K^d(x',y)| <= C rho~(|x-x'|/|x-y|) / |x-y|^(n-alpha)
        rng = np.random.default_rng(45)
        k = hilbert_kernel(delta=0.25)
        mod = k.modulus
        worst = 0.0
        for _ in range(500):
            r = rng.uniform(0.05, 4.0)
            dx = rng.uniform(1e-4, r / 2.0 * 0.999)
            x, xp, y = r, r - dx, 0.0
            lhs = abs(kernel_pair_values(k, [[x]], [[y]])[0]
                      - kernel_pair_values(k, [[xp]], [[y]])[0])
            bound = mod.tilde(dx / r) / r
            if bound > 0:
                worst = max(worst, lhs / bound)
        assert math.isfinite(worst)
        assert worst <= 8.0  # recorded constant for the declared modulus

    def test_error_scaling_degenerate(self):
        g = Grid(1, 1, 6)
        k = hilbert_kernel()
        b = GridFunction(g, np.full(g.shape, 1.0))
        f = indicator(g, -0.5, 0.5)
        rec = truncation_error_scaling(SymbolPowerCommutator(k, b, 1), f,
                                       [0.25, 0.125])
        assert rec["degenerate"]

    def test_error_scaling_orders(self):
        g = Grid(1, 2, 7)
        k = hilbert_kernel()
        b = make_function(g, {"name": "bump", "params": {"center": [0.0], "radius": 2.0}})
        f = indicator(g, -0.5, 0.5)
        deltas = [2.0 ** -e for e in range(2, 6)]
        slopes = {}
        for m in (1, 2):
            rec = truncation_error_scaling(SymbolPowerCommutator(k, b, m), f, deltas)
            slopes[m] = rec["exponent"]
        assert slopes[1] >= 0.7
        assert slopes[2] >= 1.7

    def test_resolution_guard(self):
        g = Grid(1, 1, 4)
        k = hilbert_kernel()
        b = GridFunction(g, np.ones(g.shape))
        f = indicator(g, -0.5, 0.5)
        with pytest.raises(ValueError):
            truncation_error_scaling(SymbolPowerCommutator(k, b, 1), f, [g.h])


class TestMaximal:
    def setup_method(self):
        self.grid = Grid(1, 2, 6)
        self.fam = CubeFamily(self.grid, -2, 2)
        self.f = indicator(self.grid, 0.0, 1.0)

    def test_inside_support(self):
        m = maximal(self.f, 0.0, self.fam)
        idx = self.grid.axis_index(0.5)
        assert m.values[idx] == pytest.approx(1.0, abs=1e-12)

    def test_away_from_support(self):
        m = maximal(self.f, 0.0, self.fam)
        idx = self.grid.axis_index(2.0 + self.grid.h)
        # best family interval around x=2 is a side-2 cube half-filled
        assert m.values[idx] == pytest.approx(0.5, abs=1e-12)

    def test_fractional(self):
        m = maximal(self.f, 0.5, self.fam)
        idx = self.grid.axis_index(0.5)
        assert m.values[idx] == pytest.approx(1.0, abs=1e-12)

    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            maximal(self.f, 1.5, self.fam)


class TestBackends:
    def test_backends_agree(self):
        grid = Grid(1, 1, 5)
        rng = np.random.default_rng(46)
        f = GridFunction(grid, rng.normal(size=grid.shape))
        b = GridFunction(grid, rng.normal(size=grid.shape))
        comm = SymbolPowerCommutator(hilbert_kernel(delta=0.25), b, 2)
        results = {}
        saved = backend_mod._active
        try:
            for name in ("python",) + (("compiled",) if backend_mod.COMPILED_AVAILABLE else ()):
                backend_mod._active = backend_mod.get_backend(name)
                results[name] = commutator(comm, f).values
        finally:
            backend_mod._active = saved
        if "compiled" in results:
            scale = np.abs(results["python"]).max()
            assert np.abs(results["python"] - results["compiled"]).max() <= 1e-12 * scale

    def test_worker_count_invariance(self):
        grid = Grid(1, 2, 6)
        rng = np.random.default_rng(47)
        f = GridFunction(grid, rng.normal(size=grid.shape))
        b = GridFunction(grid, rng.normal(size=grid.shape))
        comm = SymbolPowerCommutator(hilbert_kernel(), b, 1)
        try:
            set_workers(1)
            one = commutator(comm, f).values
            set_workers(4)
            four = commutator(comm, f).values
        finally:
            set_workers(1)
        assert np.array_equal(one, four)

    def test_out_region_zeroes_elsewhere(self):
        grid = Grid(1, 1, 5)
        rng = np.random.default_rng(48)
        f = GridFunction(grid, rng.normal(size=grid.shape))
        from oscbench import CellSet
        region = CellSet.from_indices(grid, np.arange(10, 20))
        img = apply(hilbert_kernel(), f, out_region=region)
        assert np.all(img.values[:10] == 0.0)
        assert np.all(img.values[20:] == 0.0)
        full = apply(hilbert_kernel(), f)
        assert np.array_equal(img.values[10:20], full.values[10:20])

    def test_complex_input(self):
        grid = Grid(1, 1, 5)
        rng = np.random.default_rng(49)
        f = GridFunction(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))
        img = apply(hilbert_kernel(), f)
        re = apply(hilbert_kernel(), f.real())
        im = apply(hilbert_kernel(), f.imag())
        assert np.allclose(img.values, re.values + 1j * im.values, rtol=0, atol=1e-14)
