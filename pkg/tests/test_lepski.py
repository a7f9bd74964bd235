import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artifact.calibration import theoretical_cv
from artifact.design import DesignGrid, build_ladder
from artifact.errors import DimensionMismatch, ValidationError
from artifact.lepski import (batch_select, batch_statistics, last_accepted, select,
                             select_from_statistics, statistics_triangle, test_statistic)
from artifact.local_model import LocalModel, NoiseModel, ScaleEstimate, fll_quadratic


def make_model(n=120, p=2, K=5, sigma=1.0):
    lad = build_ladder(DesignGrid.equidistant(n), 0.5, "rectangular", 0.05, 1.5, K, p)
    return LocalModel(lad, p, NoiseModel.homoscedastic(n, sigma))


class TestStatistic:
    def test_identical(self):
        e = ScaleEstimate(np.array([1.0, 2.0]), np.eye(2), 1)
        assert test_statistic(e, e) == 0.0

    def test_scalar(self):
        a = ScaleEstimate(np.array([1.0]), np.array([[4.0]]), 1)
        b = ScaleEstimate(np.array([0.5]), np.array([[9.0]]), 2)
        assert test_statistic(a, b) == pytest.approx(0.25 * 4)

    def test_matches_fll(self):
        model = make_model()
        ests = model.all_estimates(np.random.default_rng(1).normal(size=model.n))
        assert test_statistic(ests[0], ests[3]) == fll_quadratic(ests[0], ests[3].theta)

    def test_dimension(self):
        a = ScaleEstimate(np.array([1.0]), np.array([[1.0]]), 1)
        b = ScaleEstimate(np.array([1.0, 0.0]), np.eye(2), 2)
        with pytest.raises(DimensionMismatch):
            test_statistic(a, b)


class TestSelect:
    def setup_method(self):
        self.model = make_model()
        self.Y = np.random.default_rng(3).normal(size=self.model.n)
        self.ests = self.model.all_estimates(self.Y)

    def test_infinite_thresholds(self):
        assert select(self.ests, np.full(4, np.inf)).k_hat == 5

    def test_zero_thresholds(self):
        res = select(self.ests, np.zeros(4))
        assert res.k_hat == 1
        np.testing.assert_array_equal(res.accepted, [True, False, False, False, False])

    def test_parametric_noiseless(self):
        ests = self.model.all_estimates(2 - 3 * self.model.ladder.grid.points)
        assert select(ests, np.full(4, 1e-8)).k_hat == 5

    def test_non_strict(self):
        T = statistics_triangle(np.stack([e.theta for e in self.ests]), [e.info for e in self.ests])
        # thresholds exactly at the largest statistic of each row still accept
        z = np.nan_to_num(np.nanmax(np.where(np.isnan(T), -np.inf, T), axis=1)[:-1])
        assert select_from_statistics(T, z) == 5

    def test_theta_and_last_accepted(self):
        cv = theoretical_cv(2, 1.0, 1.0, 1.5, 5)
        res = select(self.ests, cv)
        np.testing.assert_array_equal(res.theta, self.ests[res.k_hat - 1].theta)
        np.testing.assert_array_equal(last_accepted(self.ests, cv, 1), self.ests[0].theta)
        for k in range(1, 6):
            np.testing.assert_array_equal(last_accepted(self.ests, np.zeros(4), k), self.ests[0].theta)
            np.testing.assert_array_equal(last_accepted(self.ests, np.full(4, np.inf), k),
                                          self.ests[k - 1].theta)
        with pytest.raises(ValidationError):
            last_accepted(self.ests, cv, 6)

    def test_threshold_count(self):
        with pytest.raises(ValidationError):
            select(self.ests, np.ones(3))


@given(st.integers(0, 10 ** 6))
def test_prefix_and_monotone(seed):
    rng = np.random.default_rng(seed)
    model = make_model(n=80, K=6)
    ests = model.all_estimates(rng.normal(size=80) + np.sin(8 * model.ladder.grid.points))
    z1 = rng.exponential(3.0, size=5)
    z2 = z1 + rng.exponential(2.0, size=5)
    r1, r2 = select(ests, z1), select(ests, z2)
    assert r1.k_hat <= r2.k_hat
    acc = r1.accepted
    assert acc[0] and np.all(acc[:r1.k_hat]) and not np.any(acc[r1.k_hat:])
    upper = r1.statistics[np.triu_indices(6, 1)]
    assert np.all(upper >= 0)
    # the rule depends on the data only through the statistics
    assert select_from_statistics(r1.statistics, z1) == r1.k_hat


def test_batch_matches_single():
    model = make_model(K=5)
    thetas = model.simulate(50, seed=4)
    infos = [model.info_matrix(k) for k in range(1, 6)]
    z = np.array([6.0, 5.0, 4.0, 3.0])
    T = batch_statistics(thetas, infos)
    kh = batch_select(T, z)
    for r in range(50):
        Tr = statistics_triangle(thetas[r], infos)
        np.testing.assert_allclose(T[r][~np.isnan(Tr)], Tr[~np.isnan(Tr)], rtol=1e-12)
        assert kh[r] == select_from_statistics(Tr, z)
