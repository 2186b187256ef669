import numpy as np
import pytest

import bmmlr
from bmmlr import (
    BmbPosterior,
    InvalidParameterError,
    McmcConfig,
    ModelSpec,
    posterior_bmb,
)
from bmmlr.data import build_dataset


def small_dataset(seed=0, n_clusters=4, n_per_arm=8):
    spec = bmmlr.ScenarioSpec(
        n_clusters=n_clusters, n_per_arm=n_per_arm, replications=1, seed=seed
    )
    return bmmlr.generate_dataset(spec, 0)


class TestModelSpecValidation:
    def test_mixed_requires_random_block(self):
        with pytest.raises(InvalidParameterError):
            ModelSpec(bmmlr.BMMLR_MIXED, 2, (), (0, 1, 2, 3))

    def test_random_rejects_shared_block(self):
        with pytest.raises(InvalidParameterError):
            ModelSpec(bmmlr.BMMLR_RANDOM, 2, (0, 1), (2, 3))

    def test_overlapping_blocks_rejected(self):
        with pytest.raises(InvalidParameterError):
            ModelSpec(bmmlr.BMMLR_MIXED, 2, (0, 1), (1, 2))

    def test_partition_checked_against_data(self):
        data = small_dataset()
        model = ModelSpec(bmmlr.BMMLR_MIXED, 2, (0, 1), (2,))  # misses column 3
        with pytest.raises(bmmlr.DimensionError):
            bmmlr.fit(data, model, config=McmcConfig(iterations=5, burnin=0, chains=1))

    def test_unknown_kind(self):
        with pytest.raises(InvalidParameterError):
            ModelSpec("logit", 2)


class TestMcmcConfig:
    def test_zero_iterations_rejected(self):
        with pytest.raises(InvalidParameterError):
            McmcConfig(iterations=0)

    def test_thin_bounds(self):
        with pytest.raises(InvalidParameterError):
            McmcConfig(iterations=10, thin=11)

    def test_defaults_match_two_long_chains(self):
        cfg = McmcConfig()
        assert (cfg.iterations, cfg.burnin, cfg.chains) == (50_000, 10_000, 2)


class TestFit:
    def test_deterministic(self):
        data = small_dataset()
        model = bmmlr.mixed_effects_model(2, data.n_columns, (0, 1))
        cfg = McmcConfig(iterations=40, burnin=10, chains=2, seed=123)
        a = bmmlr.fit(data, model, config=cfg)
        b = bmmlr.fit(data, model, config=cfg)
        for name in ("gamma_j", "gamma", "sigma", "beta"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_parallel_chains_match_sequential(self):
        data = small_dataset()
        model = bmmlr.mixed_effects_model(2, data.n_columns, (0, 1))
        cfg = McmcConfig(iterations=30, burnin=5, chains=2, seed=9)
        seq = bmmlr.fit(data, model, config=cfg, workers=1)
        par = bmmlr.fit(data, model, config=cfg, workers=2)
        assert np.array_equal(seq.gamma_j, par.gamma_j)
        assert np.array_equal(seq.beta, par.beta)

    def test_chains_finite_and_reference_category_absent(self):
        data = small_dataset()
        model = bmmlr.mixed_effects_model(2, data.n_columns, (0, 1))
        chains = bmmlr.fit(data, model, config=McmcConfig(iterations=50, burnin=10, chains=2))
        for arr in (chains.gamma_j, chains.gamma, chains.sigma, chains.beta):
            assert np.isfinite(arr).all()
        # three free categories for K = 2; the reference is never stored
        assert chains.gamma.shape[2] == 3
        assert chains.gamma_j.shape == (2, 50, 3, data.n_clusters, 2)

    def test_storage_thinning(self):
        data = small_dataset()
        model = bmmlr.single_level_model(2, data.n_columns)
        cfg = McmcConfig(iterations=40, burnin=10, chains=1, thin=4, seed=3)
        chains = bmmlr.fit(data, model, config=cfg)
        assert chains.n_draws == 10

    def test_parameter_chain_names(self):
        data = small_dataset()
        model = bmmlr.mixed_effects_model(2, data.n_columns, (0, 1))
        chains = bmmlr.fit(data, model, config=McmcConfig(iterations=20, burnin=0, chains=2))
        named = chains.parameter_chains()
        assert any(name.startswith("beta[q1") for name in named)
        assert any(name.startswith("gamma_mean[q2") for name in named)
        assert any(name.startswith("sigma[q3") for name in named)
        for arr in named.values():
            assert arr.shape == (2, 20)


class TestBmb:
    def test_counts_plus_prior(self):
        # ten subjects, all treated, all in the all-ones category
        outcomes = np.ones((10, 2), dtype=int)
        data = build_dataset([1] * 10, np.ones(10, dtype=int), np.zeros(10), outcomes)
        post = posterior_bmb(data, np.full(4, 0.01))
        assert np.allclose(post.alpha_treated, [10.01, 0.01, 0.01, 0.01])
        # the empty control arm keeps its prior
        assert np.allclose(post.alpha_control, [0.01, 0.01, 0.01, 0.01])

    def test_exact_count_arithmetic(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(4, 40))
            outcomes = rng.integers(0, 2, size=(n, 2))
            treatment = rng.integers(0, 2, size=n)
            data = build_dataset(np.ones(n, dtype=int), treatment, rng.normal(size=n), outcomes)
            post = posterior_bmb(data, np.ones(4))
            design = bmmlr.build_response_design(2)
            codes = bmmlr.encode_outcomes(data.outcomes, design)
            for arm, alpha in ((0, post.alpha_control), (1, post.alpha_treated)):
                counts = np.bincount(codes[data.treatment == arm], minlength=4)
                assert np.array_equal(alpha, counts + 1.0)

    def test_fit_bypass(self):
        data = small_dataset()
        result = bmmlr.fit(data, bmmlr.bernoulli_model(2))
        assert isinstance(result, BmbPosterior)

    def test_invalid_concentration(self):
        data = small_dataset()
        with pytest.raises(InvalidParameterError):
            posterior_bmb(data, np.zeros(4))

    def test_subset_rows(self):
        data = small_dataset()
        mask = data.x[:, 2] > 0
        post = posterior_bmb(data, np.full(4, 0.01), rows=mask)
        assert post.n_control + post.n_treated == int(mask.sum())
