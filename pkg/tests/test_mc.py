import numpy as np
import pytest

from artifact.errors import ValidationError
from artifact.mc import BLOCK, batch_means, normal_blocks


def collect(seed, R, dim):
    return np.vstack([z for _, z in normal_blocks(seed, R, dim)])


class TestStreams:
    def test_prefix_stable(self):
        a = collect(3, 2 * BLOCK + 7, 4)
        b = collect(3, BLOCK + 1, 4)
        np.testing.assert_array_equal(a[:BLOCK + 1], b)

    def test_seeds_differ(self):
        assert not np.array_equal(collect(1, 10, 3), collect(2, 10, 3))

    def test_moments(self):
        z = collect(0, 50000, 2)
        assert abs(z.mean()) < 0.01 and abs(z.var() - 1) < 0.02

    def test_replicates(self):
        with pytest.raises(ValidationError):
            list(normal_blocks(0, 0, 2))


class TestBatchMeans:
    def test_iid_scale(self):
        x = np.random.default_rng(0).normal(size=(100000, 2))
        m, se = batch_means(x)
        np.testing.assert_allclose(se, 1 / np.sqrt(100000), rtol=0.5)
        np.testing.assert_allclose(m, x.mean(axis=0))

    def test_small(self):
        m, se = batch_means(np.array([1.0, 2.0, 3.0]))
        assert m == 2.0 and se == pytest.approx(1 / np.sqrt(3))
