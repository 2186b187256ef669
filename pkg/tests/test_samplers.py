import math

import numpy as np
import pytest

from bmmlr import (
    InvalidParameterError,
    NotSPDError,
    NumericInputError,
    sample_categories,
    sample_category,
    sample_dirichlet,
    sample_inverse_wishart,
    sample_mvn,
    sample_polya_gamma,
    stream,
    substreams,
)
from oracles import ks_distance, pg_cdf, pg_mean


class TestPolyaGamma:
    @pytest.mark.parametrize("c", [0.0, 2.0, 5.0])
    def test_mean(self, c):
        rng = stream(101)
        draws = sample_polya_gamma(np.full(100_000, c), rng)
        se = draws.std() / math.sqrt(draws.size)
        assert abs(draws.mean() - pg_mean(c)) < 4 * se

    def test_scalar_and_shape(self):
        rng = stream(7)
        assert isinstance(sample_polya_gamma(1.0, rng), float)
        out = sample_polya_gamma(np.zeros((3, 4)), rng)
        assert out.shape == (3, 4)
        assert (out > 0).all()

    def test_sign_symmetric(self):
        # PG(1, c) depends on c only through |c|
        a = sample_polya_gamma(np.full(50_000, 3.0), stream(5))
        b = sample_polya_gamma(np.full(50_000, -3.0), stream(5))
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("c", [0.0, 1.0, 3.0])
    def test_distribution_ks(self, c):
        # exactness check against the series CDF
        draws = sample_polya_gamma(np.full(100_000, c), stream(2024))
        assert ks_distance(draws, lambda x: pg_cdf(x, c)) < 0.01

    def test_non_finite_rejected(self):
        with pytest.raises(NumericInputError):
            sample_polya_gamma(np.inf, stream(0))


class TestMvn:
    def test_moments(self):
        rng = stream(42)
        draws = np.stack([sample_mvn([0.0, 0.0], np.eye(2), rng) for _ in range(100_000)])
        assert np.abs(draws.mean(axis=0)).max() < 3.0 / math.sqrt(100_000) * 1.1
        cov = np.cov(draws.T)
        assert np.abs(cov - np.eye(2)).max() < 0.05

    def test_tight_covariance(self):
        rng = stream(1)
        draws = np.stack(
            [sample_mvn([1.0, 2.0], 0.01 * np.eye(2), rng) for _ in range(2_000)]
        )
        assert (np.abs(draws - [1.0, 2.0]) < 0.5).all()

    def test_correlation(self):
        rng = stream(9)
        cov = np.array([[2.0, 1.0], [1.0, 2.0]])
        draws = np.stack([sample_mvn([0.0, 0.0], cov, rng) for _ in range(100_000)])
        corr = np.corrcoef(draws.T)[0, 1]
        assert abs(corr - 0.5) < 0.02

    def test_not_spd(self):
        with pytest.raises(NotSPDError) as exc:
            sample_mvn([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], stream(0))
        assert exc.value.min_eigenvalue == pytest.approx(-1.0, abs=1e-9)

    def test_ridge_recovers(self):
        bad = np.array([[1.0, 1.0], [1.0, 1.0]])  # singular
        out = sample_mvn([0.0, 0.0], bad, stream(0), ridge=1e-6)
        assert np.isfinite(out).all()


class TestInverseWishart:
    def test_mean(self):
        rng = stream(3)
        acc = np.zeros((2, 2))
        n = 100_000
        for _ in range(n):
            acc += sample_inverse_wishart(10.0, np.eye(2), rng)
        mean = acc / n
        expected = np.eye(2) / 7.0  # scale / (df - d - 1)
        assert np.abs(mean - expected).max() < 0.05 * expected[0, 0] + 0.002

    def test_low_df_prior_draws_spd(self):
        # df = 2 with a 2x2 scale of 0.1 I: the diffuse covariance prior
        rng = stream(4)
        for _ in range(2_000):
            draw = sample_inverse_wishart(2.0, 0.1 * np.eye(2), rng)
            assert np.linalg.eigvalsh(draw).min() > 0

    def test_symmetry(self):
        rng = stream(5)
        scale = np.array([[2.0, 0.3], [0.3, 1.0]])
        for _ in range(200):
            draw = sample_inverse_wishart(5.0, scale, rng)
            assert np.abs(draw - draw.T).max() < 1e-12

    def test_stress_spd(self):
        # df = d + 1 heavy-tail stress: every draw stays SPD
        rng = stream(6)
        draws = np.stack(
            [sample_inverse_wishart(3.0, np.eye(2), rng) for _ in range(100_000)]
        )
        eigs = np.linalg.eigvalsh(draws)
        assert (eigs[:, 0] > 0).all()

    def test_invalid_df(self):
        with pytest.raises(InvalidParameterError):
            sample_inverse_wishart(0.5, np.eye(2), stream(0))

    def test_not_spd_scale(self):
        with pytest.raises(NotSPDError):
            sample_inverse_wishart(5.0, [[1.0, 2.0], [2.0, 1.0]], stream(0))


class TestDirichlet:
    def test_mean(self):
        rng = stream(8)
        draws = np.stack([sample_dirichlet(np.ones(4), rng) for _ in range(100_000)])
        assert np.abs(draws.mean(axis=0) - 0.25).max() < 0.01

    def test_sparse_concentration(self):
        rng = stream(12)
        draws = np.stack(
            [sample_dirichlet(np.full(4, 0.01), rng) for _ in range(5_000)]
        )
        assert (draws.max(axis=1) > 0.9).mean() > 0.9

    def test_simplex(self):
        rng = stream(13)
        for _ in range(500):
            d = sample_dirichlet(np.array([0.5, 1.5, 2.0]), rng)
            assert abs(d.sum() - 1.0) < 1e-12

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            sample_dirichlet([1.0, 0.0], stream(0))


class TestCategory:
    def test_degenerate(self):
        rng = stream(1)
        assert all(sample_category([1.0, 0.0, 0.0, 0.0], rng) == 0 for _ in range(50))

    def test_uniform_frequencies(self):
        rng = stream(2)
        draws = sample_categories(np.tile([0.25, 0.25, 0.25, 0.25], (100_000, 1)), rng)
        freq = np.bincount(draws, minlength=4) / draws.size
        se = math.sqrt(0.25 * 0.75 / draws.size)
        assert np.abs(freq - 0.25).max() < 3 * se

    def test_skewed_frequency(self):
        rng = stream(3)
        draws = sample_categories(np.tile([0.4, 0.2, 0.2, 0.2], (100_000, 1)), rng)
        assert abs((draws == 0).mean() - 0.4) < 0.005

    def test_invalid_simplex(self):
        with pytest.raises(InvalidParameterError):
            sample_category([0.5, 0.4], stream(0))


class TestDeterminism:
    def test_identical_seeds_identical_sequences(self):
        a, b = stream(99), stream(99)
        assert sample_polya_gamma(np.full(100, 1.5), a).tolist() == sample_polya_gamma(
            np.full(100, 1.5), b
        ).tolist()
        assert np.array_equal(
            sample_mvn([0.0], np.eye(1), a), sample_mvn([0.0], np.eye(1), b)
        )
        assert np.array_equal(
            sample_inverse_wishart(4.0, np.eye(2), a),
            sample_inverse_wishart(4.0, np.eye(2), b),
        )
        assert np.array_equal(
            sample_dirichlet(np.ones(3), a), sample_dirichlet(np.ones(3), b)
        )
        assert sample_category([0.3, 0.7], a) == sample_category([0.3, 0.7], b)

    def test_substreams_independent_and_stable(self):
        fam1 = substreams(7, 3)
        fam2 = substreams(7, 3)
        for g1, g2 in zip(fam1, fam2):
            assert np.array_equal(g1.standard_normal(5), g2.standard_normal(5))
        keyed = substreams(7, 2, key=(4,))
        assert not np.array_equal(
            substreams(7, 2)[0].standard_normal(5), keyed[0].standard_normal(5)
        )
