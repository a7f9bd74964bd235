import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artifact.design import DesignGrid, build_ladder
from artifact.errors import DimensionMismatch, SingularInformation, ValidationError
from artifact.local_model import (LocalModel, NoiseModel, PolynomialBasis, derivative_estimates,
                                  fll_quadratic, info_matrix, lp_weights, qmle, spd_solve)

from conftest import random_grid


def make_model(rng, n=60, p=2, K=4, kernel="rectangular", delta=0.0, x=None):
    grid = DesignGrid(random_grid(rng, n))
    x = float(rng.uniform(0.2, 0.8)) if x is None else x
    lad = build_ladder(grid, x, kernel, 0.15, 1.3, K, p)
    sigma2 = rng.uniform(0.5, 2.0, n)
    ratios = 1 + delta * rng.uniform(-1, 1, n)
    return LocalModel(lad, p, NoiseModel(sigma2, sigma2 * ratios, delta))


class TestBasis:
    def test_factorial_scaling(self):
        psi = PolynomialBasis(4)(np.array([0.0, 2.0]))
        np.testing.assert_allclose(psi[:, 0], [1, 0, 0, 0])
        np.testing.assert_allclose(psi[:, 1], [1, 2, 2, 8 / 6])

    def test_invalid(self):
        with pytest.raises(ValidationError):
            PolynomialBasis(0)


class TestNoiseModel:
    def test_band(self):
        s = np.ones(3)
        with pytest.raises(ValidationError):
            NoiseModel(s, 1.3 * s, 0.2)
        NoiseModel(s, 1.2 * s, 0.2)

    def test_constructors(self):
        nm = NoiseModel.homoscedastic(5, 2.0, 2.2)
        assert nm.delta == pytest.approx(0.21)
        assert nm.is_homogeneous
        nm = NoiseModel.misspecified(np.ones(4), [1.0, 0.9, 1.1, 1.05])
        assert nm.delta == pytest.approx(0.1)
        assert not nm.is_homogeneous


class TestInfoMatrix:
    def test_local_design_size(self):
        lad = build_ladder(DesignGrid.equidistant(50), 0.5, "rectangular", 0.1, 1.5, 3)
        nm = NoiseModel.homoscedastic(50, 0.5)
        for k in range(1, 4):
            m_k = lad.weights[k - 1].sum()
            np.testing.assert_allclose(info_matrix(lad, 1, nm, k), [[m_k / 0.25]], rtol=1e-14)

    def test_single_point_singular(self):
        lad = build_ladder(DesignGrid([0.0, 0.5, 1.0]), 0.5, "rectangular", 0.3, 1.5, 2, p=1)
        with pytest.raises(SingularInformation):
            info_matrix(lad, 2, NoiseModel.homoscedastic(3, 1.0), 1)

    def test_naive_summation(self, rng):
        model = make_model(rng, p=3, kernel="epanechnikov")
        pts = model.ladder.grid.points - model.ladder.x
        for k in range(1, model.K + 1):
            B = np.zeros((3, 3))
            for i in range(model.n):
                psi = np.array([1.0, pts[i], pts[i] ** 2 / 2])
                for a in range(3):
                    for b in range(3):
                        B[a, b] += psi[a] * psi[b] * model.ladder.weights[k - 1, i] / model.noise.sigma2[i]
            np.testing.assert_allclose(model.info_matrix(k), B, rtol=1e-12)

    def test_cached_read_only(self, rng):
        model = make_model(rng)
        B = model.info_matrix(2)
        assert B is model.info_matrix(2)
        with pytest.raises(ValueError):
            B[0, 0] = 0

    def test_scale_range(self, rng):
        model = make_model(rng)
        with pytest.raises(ValidationError):
            model.info_matrix(0)


class TestQMLE:
    def test_constant(self, rng):
        model = make_model(rng, p=1)
        for est in model.all_estimates(np.full(model.n, 3.25)):
            assert est.theta[0] == pytest.approx(3.25, abs=1e-13)

    def test_linear_reproduced(self, rng):
        model = make_model(rng, p=2)
        a, b = 1.5, -2.0
        Y = a + b * model.ladder.grid.points
        for est in model.all_estimates(Y):
            np.testing.assert_allclose(est.theta, [a + b * model.ladder.x, b], atol=1e-11)

    def test_interpolation(self):
        lad = build_ladder(DesignGrid([0.0, 0.4, 0.6, 1.0]), 0.5, "rectangular", 0.125, 1.5, 2, p=2)
        model = LocalModel(lad, 2, NoiseModel.homoscedastic(4, 1.0))
        Y = np.array([5.0, 1.0, 2.0, -3.0])
        est = model.qmle(1, Y)
        fit = model.Psi.T @ est.theta
        np.testing.assert_allclose(fit[1:3], Y[1:3], atol=1e-12)

    def test_normal_equations(self, rng):
        model = make_model(rng, p=3)
        Y = rng.normal(size=model.n)
        for k in range(1, model.K + 1):
            est = model.qmle(k, Y)
            rhs = model.Psi @ (model.weights(k) * Y)
            assert np.linalg.norm(est.info @ est.theta - rhs) <= 1e-8 * np.linalg.norm(rhs)
            np.testing.assert_allclose(est.info, est.info.T, atol=1e-12)

    def test_minimizes_weighted_ss(self, rng):
        model = make_model(rng, p=2)
        Y = rng.normal(size=model.n)
        est = model.qmle(3, Y)
        base = model.log_likelihood(3, Y, est.theta)
        for _ in range(20):
            assert model.log_likelihood(3, Y, est.theta + rng.normal(size=2) * 0.1) <= base

    def test_wrapper_and_shape(self, rng):
        model = make_model(rng)
        Y = rng.normal(size=model.n)
        est = qmle(model.ladder, model.basis, model.noise, 2, Y)
        np.testing.assert_array_equal(est.theta, model.qmle(2, Y).theta)
        with pytest.raises(DimensionMismatch):
            model.qmle(1, Y[:-1])

    def test_noiseless_decomposition(self, rng):
        model = make_model(rng, p=2)
        f = np.sin(3 * model.ladder.grid.points)
        for k in range(1, model.K + 1):
            np.testing.assert_allclose(model.qmle(k, f).theta, model.best_fit(k, f), atol=1e-10)


class TestLPWeights:
    @given(st.integers(0, 10 ** 6), st.integers(1, 4))
    def test_reproducing(self, seed, p):
        rng = np.random.default_rng(seed)
        model = make_model(rng, n=80, p=p, kernel=["rectangular", "triangular", "epanechnikov"][seed % 3])
        pts = model.ladder.grid.points - model.ladder.x
        for k in range(1, model.K + 1):
            w = model.lp_weights(k)
            assert abs(w.sum() - 1) <= 1e-10
            for m in range(1, p):
                assert abs(np.sum(pts ** m * w)) <= 1e-10

    def test_uniform_average(self):
        lad = build_ladder(DesignGrid.equidistant(40), 0.5, "rectangular", 0.1, 1.5, 3)
        w = lp_weights(lad, 1, NoiseModel.homoscedastic(40, 1.0), 2)
        inside = lad.weights[1] > 0
        np.testing.assert_allclose(w[inside], 1 / inside.sum(), rtol=1e-13)
        assert np.all(w[~inside] == 0)

    def test_linearity(self, rng):
        model = make_model(rng, p=3)
        Y = rng.normal(size=model.n)
        assert model.lp_weights(2) @ Y == pytest.approx(model.qmle(2, Y).theta[0], abs=1e-12)


class TestFLL:
    def test_zero_at_estimate(self, rng):
        model = make_model(rng)
        est = model.qmle(1, rng.normal(size=model.n))
        assert fll_quadratic(est, est.theta) == 0.0

    def test_scalar(self, rng):
        model = make_model(rng, p=1)
        est = model.qmle(2, rng.normal(size=model.n))
        assert fll_quadratic(est, [0.3]) == pytest.approx((est.theta[0] - 0.3) ** 2 * est.info[0, 0])

    @given(st.integers(0, 10 ** 6))
    def test_likelihood_identity(self, seed):
        rng = np.random.default_rng(seed)
        model = make_model(rng, p=int(rng.integers(1, 4)))
        Y = rng.normal(size=model.n)
        k = int(rng.integers(1, model.K + 1))
        est = model.qmle(k, Y)
        theta = est.theta + rng.normal(size=model.p)
        raw = 2 * (model.log_likelihood(k, Y, est.theta) - model.log_likelihood(k, Y, theta))
        assert fll_quadratic(est, theta) == pytest.approx(raw, rel=1e-8)

    def test_dimension(self, rng):
        model = make_model(rng)
        est = model.qmle(1, rng.normal(size=model.n))
        with pytest.raises(DimensionMismatch):
            fll_quadratic(est, [1.0])


class TestDerivatives:
    def test_quadratic(self, rng):
        model = make_model(rng, p=3)
        t = model.ladder.grid.points
        x = model.ladder.x
        est = model.qmle(2, 1 + 2 * t - 3 * t ** 2)
        np.testing.assert_allclose(derivative_estimates(est), [1 + 2 * x - 3 * x * x, 2 - 6 * x, -6],
                                   atol=1e-9)

    def test_sine_slope_shrinks(self):
        x = 0.4
        errs = []
        for h in (0.2, 0.1, 0.05):
            lad = build_ladder(DesignGrid.equidistant(4000), x, "epanechnikov", h, 1.5, 2, p=2)
            model = LocalModel(lad, 2, NoiseModel.homoscedastic(4000, 1.0))
            est = model.qmle(1, np.sin(lad.grid.points))
            errs.append(abs(derivative_estimates(est)[1] - math.cos(x)))
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 0.01


class TestVariance:
    @given(st.integers(0, 10 ** 6), st.sampled_from([0.0, 0.1, 0.3]))
    def test_variance_bound(self, seed, delta):
        rng = np.random.default_rng(seed)
        model = make_model(rng, p=2, delta=delta, kernel="triangular")
        for k in range(1, model.K + 1):
            B = model.info_matrix(k)
            vals, vecs = np.linalg.eigh(B)
            Bh = (vecs * np.sqrt(vals)) @ vecs.T
            lam = np.linalg.eigvalsh(Bh @ model.variance(k) @ Bh)[-1]
            assert lam <= (1 + delta) * (1 + 1e-9)

    def test_spd_solve(self, rng):
        A = rng.normal(size=(4, 4))
        B = A @ A.T + np.diag([1e6, 1, 1e-3, 1])
        b = rng.normal(size=4)
        np.testing.assert_allclose(B @ spd_solve(B, b), b, rtol=1e-9, atol=1e-9)
