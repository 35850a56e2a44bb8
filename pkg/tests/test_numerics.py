import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from fiodecomp.numerics import (
    FitResult,
    Grid,
    MultiIndex,
    box_spectrum,
    dft,
    default_fd_step,
    fit_log2_slope,
    finite_difference,
    idft,
    quadrature_integral,
)


class TestGrid:
    def test_spacing_and_weight(self):
        g = Grid(2, 1.0, 8)
        assert g.spacing == pytest.approx(0.25)
        assert g.weight == pytest.approx(0.0625)
        assert g.size == 64

    def test_points_inside_box(self):
        g = Grid(2, 1.5, 16)
        pts = g.points()
        assert pts.shape == (256, 2)
        assert np.all(pts >= -1.5) and np.all(pts < 1.5)

    def test_dual_spacing(self):
        g = Grid(1, 8.0, 512)
        d = g.dual()
        assert d.spacing == pytest.approx(1.0 / 16.0)
        assert d.points_per_axis == 512

    def test_invalid(self):
        with pytest.raises(ValueError):
            Grid(0, 1.0, 4)
        with pytest.raises(ValueError):
            Grid(1, -1.0, 4)
        with pytest.raises(ValueError):
            Grid(1, 1.0, 0)

    def test_embed_restrict_roundtrip(self):
        g = Grid(2, 1.0, 8)
        rng = np.random.default_rng(0)
        f = rng.normal(size=g.shape)
        big = g.embed(f, 4)
        assert big.shape == (32, 32)
        assert np.allclose(g.restrict(big, 4), f)
        assert big.sum() == pytest.approx(f.sum())


class TestQuadrature:
    def test_constant(self):
        g = Grid(1, 1.0, 4)
        assert quadrature_integral(g, np.ones(4)) == pytest.approx(2.0)

    def test_odd_function(self):
        g = Grid(1, 1.0, 64)
        x = g.axis()
        assert abs(quadrature_integral(g, x)) < 1e-12

    def test_gaussian_against_quad_oracle(self):
        # independent oracle: adaptive 1-D quadrature of exp(-x^2)
        oracle, _ = quad(lambda x: np.exp(-(x**2)), -8, 8)
        g = Grid(1, 8.0, 1024)
        val = quadrature_integral(g, np.exp(-g.axis() ** 2))
        assert val.real == pytest.approx(oracle, abs=1e-6)
        assert oracle == pytest.approx(np.sqrt(np.pi), abs=1e-12)

    def test_empty_rejected(self):
        g = Grid(1, 1.0, 4)
        with pytest.raises(ValueError):
            quadrature_integral(g, np.array([]))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid(1, 1.0, 16)
        f1 = rng.normal(size=16) + 1j * rng.normal(size=16)
        f2 = rng.normal(size=16) + 1j * rng.normal(size=16)
        a, b = rng.normal(size=2)
        lhs = quadrature_integral(g, a * f1 + b * f2)
        rhs = a * quadrature_integral(g, f1) + b * quadrature_integral(g, f2)
        assert abs(lhs - rhs) < 1e-12


class TestDft:
    def test_gaussian_self_dual(self):
        g = Grid(1, 8.0, 512)
        f = np.exp(-np.pi * g.axis() ** 2)
        spec = dft(g, f)
        expected = np.exp(-np.pi * g.dual().axis() ** 2)
        assert np.max(np.abs(spec - expected)) < 1e-6

    def test_gaussian_self_dual_2d(self):
        g = Grid(2, 6.0, 128)
        X, Y = g.meshgrid()
        f = np.exp(-np.pi * (X**2 + Y**2))
        spec = dft(g, f)
        KX, KY = g.dual().meshgrid()
        expected = np.exp(-np.pi * (KX**2 + KY**2))
        assert np.max(np.abs(spec - expected)) < 1e-6

    def test_shift_modulation_invariance(self):
        # |transform| of a shifted bump is shift-invariant
        g = Grid(1, 8.0, 512)
        x = g.axis()
        f0 = np.exp(-20 * x**2)
        f1 = np.exp(-20 * (x - 0.5) ** 2)
        assert np.max(np.abs(np.abs(dft(g, f0)) - np.abs(dft(g, f1)))) < 1e-8

    def test_roundtrip_identity(self):
        rng = np.random.default_rng(3)
        g = Grid(2, 2.0, 32)
        f = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
        back = idft(g, dft(g, f))
        assert np.max(np.abs(back - f)) < 1e-10 * max(1.0, np.max(np.abs(f)))

    def test_parseval(self):
        rng = np.random.default_rng(4)
        g = Grid(2, 2.0, 32)
        f = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
        spec = dft(g, f)
        lhs = g.weight * np.sum(np.abs(f) ** 2)
        rhs = g.dual().weight * np.sum(np.abs(spec) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_non_pow2_rejected(self):
        g = Grid(1, 1.0, 12)
        with pytest.raises(ValueError):
            dft(g, np.ones(12))

    def test_box_spectrum_matches_direct_sum(self):
        # pin the offset-box transform against brute-force summation
        rng = np.random.default_rng(5)
        for sign in (-1, +1):
            starts, spacings, shape = [0.7, -2.3], [0.31, 0.17], (8, 5)
            vals = rng.normal(size=shape) + 1j * rng.normal(size=shape)
            dstarts, dspac, out = box_spectrum(starts, spacings, vals, sign)
            ax0 = starts[0] + (np.arange(shape[0]) + 0.5) * spacings[0]
            ax1 = starts[1] + (np.arange(shape[1]) + 0.5) * spacings[1]
            u0 = dstarts[0] + (np.arange(shape[0]) + 0.5) * dspac[0]
            u1 = dstarts[1] + (np.arange(shape[1]) + 0.5) * dspac[1]
            w = spacings[0] * spacings[1]
            for li in (0, 3, shape[0] - 1):
                for lj in (0, 2, shape[1] - 1):
                    phase = np.exp(
                        sign * 2j * np.pi * (u0[li] * ax0[:, None] + u1[lj] * ax1[None, :]))
                    direct = w * np.sum(vals * phase)
                    assert abs(out[li, lj] - direct) < 1e-10 * max(1.0, abs(direct))


class TestFiniteDifference:
    def test_quadratic_exact(self):
        f = lambda p: p[0] ** 2
        val = finite_difference(f, np.array([0.3, 0.7]), (2, 0))
        assert val == pytest.approx(2.0, abs=1e-6)

    def test_norm_gradient_on_axis(self):
        f = lambda p: np.linalg.norm(p)
        val = finite_difference(f, np.array([1.0, 0.0]), (1, 0))
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_sin_against_analytic_oracle(self):
        step = 1e-3
        val = finite_difference(lambda p: np.sin(p[0]), np.array([0.0]), (1,), step)
        assert abs(val - np.cos(0.0)) < step**2

    def test_mixed_derivative(self):
        f = lambda p: p[0] ** 2 * p[1]
        val = finite_difference(f, np.array([1.0, 2.0]), (2, 1))
        assert val == pytest.approx(2.0, abs=1e-5)

    def test_polynomial_degree_matches_order(self):
        f = lambda p: p[0] ** 3
        val = finite_difference(f, np.array([0.5]), (3,), 1e-2)
        assert val == pytest.approx(6.0, abs=1e-6)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            finite_difference(lambda p: p[0], np.array([0.0]), (1,), -1.0)

    def test_order_cap(self):
        with pytest.raises(ValueError):
            finite_difference(lambda p: p[0], np.array([0.0, 0.0]), (3, 2))

    def test_default_step_rule(self):
        assert default_fd_step(np.zeros(2)) == pytest.approx(1e-3)
        assert default_fd_step(np.array([256.0, 0.0])) == pytest.approx(0.256)

    def test_multiindex_validation(self):
        with pytest.raises(ValueError):
            MultiIndex((-1, 0))
        assert MultiIndex((1, 2)).order == 3


class TestFit:
    def test_exact_dyadic(self):
        fit = fit_log2_slope([(1, 0.5), (2, 0.25), (3, 0.125)])
        assert fit.slope == pytest.approx(-1.0, abs=1e-12)
        assert fit.residual < 1e-10

    def test_constant(self):
        fit = fit_log2_slope([(j, 3.7) for j in range(2, 7)])
        assert fit.slope == pytest.approx(0.0, abs=1e-12)

    def test_half_slope(self):
        fit = fit_log2_slope([(j, 2.0 ** (-j / 2)) for j in range(2, 7)])
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.residual < 1e-10

    def test_validation(self):
        with pytest.raises(ValueError):
            fit_log2_slope([(1, 1.0), (2, 0.5)])
        with pytest.raises(ValueError):
            fit_log2_slope([(1, 1.0), (2, -0.5), (3, 1.0)])
        with pytest.raises(ValueError):
            FitResult(1.0, 0.0, -1.0)
