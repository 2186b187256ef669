import numpy as np
import pytest

import bmmlr
from bmmlr import (
    CompositeWeights,
    EmptySubpopulationError,
    McmcConfig,
    PosteriorChains,
    bernoulli_effect_draws,
    composite,
    covariate_interval,
    covariate_value,
    full_population,
    pool_over_clusters,
    subject_joint_probability,
    subpopulation_effect,
)
from bmmlr.data import build_dataset
from oracles import cate_truth

TRUTH = np.array(
    [
        [0.000, 0.433, 0.433],
        [0.000, 0.000, 0.000],
        [1.027, 0.601, 0.427],
        [-2.055, -1.201, -0.854],
    ]
)


def constant_chains(data, gamma_j_value, beta_value, n_draws=1, n_chains=1):
    """PosteriorChains whose draws are all equal to the given mixed-model
    coefficients (random block = intercept & treatment)."""
    model = bmmlr.mixed_effects_model(2, data.n_columns, (0, 1))
    j = data.n_clusters
    gj = np.broadcast_to(
        np.asarray(gamma_j_value, dtype=float), (n_chains, n_draws, 3, j, 2)
    ).copy()
    beta = np.broadcast_to(
        np.asarray(beta_value, dtype=float), (n_chains, n_draws, 3, 2)
    ).copy()
    return PosteriorChains(
        gamma_j=gj,
        gamma=gj[:, :, :, 0, :].copy(),
        sigma=np.broadcast_to(np.eye(2), (n_chains, n_draws, 3, 2, 2)).copy(),
        beta=beta,
        model=model,
        config=McmcConfig(iterations=n_draws, burnin=0, chains=n_chains, seed=0),
    )


def truth_chains(data, n_draws=1):
    gamma_j = TRUTH[:2].T[None, :, :]  # (1, 3, 2): intercept & treatment per category
    gamma_j = np.broadcast_to(gamma_j, (data.n_clusters, 3, 2)).transpose(1, 0, 2)
    beta = TRUTH[2:].T  # (3, 2): covariate & interaction
    return constant_chains(data, gamma_j, beta, n_draws=n_draws)


def scenario_data(seed=0, n_clusters=6, n_per_arm=50, sigma=0.0):
    spec = bmmlr.ScenarioSpec(
        n_clusters=n_clusters,
        n_per_arm=n_per_arm,
        replications=1,
        seed=seed,
        random_effect_cov=sigma * np.eye(2),
    )
    return bmmlr.generate_dataset(spec, 0)


class TestSubjectJointProbability:
    def test_zero_coefficients(self):
        phi = subject_joint_probability([1.0, 0, 0, 0], np.zeros((3, 4)))
        assert np.allclose(phi, 0.25)

    def test_intercepts_only(self):
        phi = subject_joint_probability([1.0, 0, 0, 0], TRUTH.T)
        assert np.allclose(
            phi,
            [0.19670509363441074, 0.30329490636558926, 0.30329490636558926, 0.19670509363441074],
            atol=1e-15,
        )

    def test_dimension_mismatch(self):
        with pytest.raises(bmmlr.DimensionError):
            subject_joint_probability([1.0, 0.0], np.zeros((3, 4)))


class TestPooling:
    def test_equal_sizes_mean(self):
        dj = np.array([[0.1, 0.2], [0.3, 0.4]])
        assert np.allclose(pool_over_clusters(dj, [5, 5]), [0.2, 0.3])

    def test_weighted_mean(self):
        dj = np.array([[0.1], [0.5]])
        assert np.allclose(pool_over_clusters(dj, [10, 30]), [0.4])

    def test_single_cluster_identity(self):
        dj = np.array([[0.25, -0.1]])
        assert np.allclose(pool_over_clusters(dj, [7]), dj[0])

    def test_zero_total_weight(self):
        with pytest.raises(EmptySubpopulationError):
            pool_over_clusters(np.zeros((2, 2)), [0, 0])

    def test_convexity_bulk(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            j = int(rng.integers(1, 8))
            dj = rng.uniform(-1, 1, size=(50, j, 2))
            w = rng.integers(1, 20, size=j)
            pooled = pool_over_clusters(dj, w)
            assert (pooled >= dj.min(axis=1) - 1e-12).all()
            assert (pooled <= dj.max(axis=1) + 1e-12).all()


class TestComposite:
    def test_equal_weights(self):
        assert composite(np.array([0.25, 0.15]), CompositeWeights([0.5, 0.5])) == pytest.approx(0.20)

    def test_one_hot_matches_component(self):
        delta = np.random.default_rng(1).uniform(-1, 1, size=(100, 2))
        assert np.array_equal(composite(delta, CompositeWeights([1.0, 0.0])), delta[:, 0])

    def test_unbalanced_weights_near_zero(self):
        val = composite(np.array([-0.114, 0.029]), CompositeWeights([0.2, 0.8]))
        assert val == pytest.approx(0.0004, abs=5e-5)

    def test_normalization(self):
        w = CompositeWeights([2.0, 6.0])
        assert np.allclose(w.weights, [0.25, 0.75])

    def test_commutes_with_pooling(self):
        rng = np.random.default_rng(2)
        dj = rng.uniform(-1, 1, size=(40, 5, 2))
        sizes = rng.integers(1, 30, size=5)
        w = CompositeWeights([0.3, 0.7])
        a = composite(pool_over_clusters(dj, sizes), w)
        b = pool_over_clusters(composite(dj, w)[..., None], sizes)[..., 0]
        assert np.allclose(a, b, atol=1e-12)


class TestSubpopulationEffect:
    def test_value_subpop_single_cluster_logistic_difference(self):
        # K = 1: the pooled effect at a covariate value is the difference of
        # two scalar logistic evaluations
        outcomes = np.array([[1], [0], [1], [0]])
        data = build_dataset([1, 1, 1, 1], [1, 0, 1, 0], [0.2, -0.3, 0.1, 0.4], outcomes)
        model = bmmlr.single_level_model(1, data.n_columns)
        beta = np.array([[0.5, 1.0, -0.7, 0.3]])  # (Qm1=1, P=4)
        chains = PosteriorChains(
            gamma_j=np.zeros((1, 1, 1, 1, 0)),
            gamma=np.zeros((1, 1, 1, 0)),
            sigma=np.zeros((1, 1, 1, 0, 0)),
            beta=beta[None, None],
            model=model,
            config=McmcConfig(iterations=1, burnin=0, chains=1, seed=0),
        )
        v = 0.8
        draws = subpopulation_effect(chains, data, covariate_value("x1", v), thin=1)

        def expit(x):
            return 1.0 / (1.0 + np.exp(-x))

        psi1 = 0.5 + 1.0 + (-0.7) * v + 0.3 * v
        psi0 = 0.5 + (-0.7) * v
        assert draws.delta.shape == (1, 1)
        assert draws.delta[0, 0] == pytest.approx(expit(psi1) - expit(psi0), abs=1e-12)

    def test_zero_treatment_row_gives_zero_effect(self):
        data = scenario_data()
        coef = TRUTH.copy()
        chains = truth_chains(data)
        draws = subpopulation_effect(chains, data, full_population(), thin=1)
        # treatment row and interaction zero => both arms identical
        coef_no_int = coef.copy()
        gamma_j = coef_no_int[:2].T[None]
        beta = np.zeros((3, 2))
        flat = constant_chains(data, np.broadcast_to(gamma_j, (data.n_clusters, 3, 2)).transpose(1, 0, 2), beta)
        d0 = subpopulation_effect(flat, data, full_population(), thin=1)
        assert np.allclose(d0.delta, 0.0, atol=1e-14)

    def test_interval_effect_matches_brute_force(self):
        data = scenario_data(n_clusters=4, n_per_arm=20_000)
        chains = truth_chains(data)
        draws = subpopulation_effect(
            chains, data, covariate_interval("w", -1.0, 0.0), thin=1
        )
        truth = cate_truth(TRUTH, -1.0, 0.0)
        # empirical covariate sample vs the integral: ~27k qualifying subjects
        assert np.abs(draws.delta[0] - truth).max() < 0.01

    def test_full_population_near_zero_under_truth(self):
        data = scenario_data(n_clusters=4, n_per_arm=20_000)
        chains = truth_chains(data)
        draws = subpopulation_effect(chains, data, full_population(), thin=1)
        assert np.abs(draws.delta[0]).max() < 0.01

    def test_counterfactual_label_swap_negates(self):
        data = scenario_data(n_clusters=5, n_per_arm=30)
        rng = np.random.default_rng(8)
        gj = rng.normal(0, 0.4, size=(1, 30, 3, data.n_clusters, 2))
        beta = rng.normal(0, 0.4, size=(1, 30, 3, 2))
        chains = constant_chains(data, gj[0, 0], beta[0, 0], n_draws=30)
        chains = PosteriorChains(
            gamma_j=gj, gamma=gj[:, :, :, 0, :], sigma=chains.sigma.repeat(30, axis=1) * 0 + np.eye(2),
            beta=beta, model=chains.model, config=chains.config,
        )
        swapped_data = build_dataset(
            data.cluster.tolist(),
            1 - data.treatment,
            data.x[:, 2],
            data.outcomes,
            covariate_names=["w"],
        )
        # relabeling arms transforms coefficients: intercept' = intercept +
        # treatment, treatment' = -treatment (same for covariate/interaction)
        gj2 = gj.copy()
        gj2[..., 0] = gj[..., 0] + gj[..., 1]
        gj2[..., 1] = -gj[..., 1]
        beta2 = beta.copy()
        beta2[..., 0] = beta[..., 0] + beta[..., 1]
        beta2[..., 1] = -beta[..., 1]
        swapped_chains = PosteriorChains(
            gamma_j=gj2, gamma=gj2[:, :, :, 0, :], sigma=chains.sigma,
            beta=beta2, model=chains.model, config=chains.config,
        )
        for subpop in (full_population(), covariate_interval("w", -1.0, 0.5)):
            a = subpopulation_effect(chains, data, subpop, thin=1)
            b = subpopulation_effect(swapped_chains, swapped_data, subpop, thin=1)
            assert np.allclose(a.delta, -b.delta, atol=1e-12)

    def test_thinning_is_subsequence(self):
        data = scenario_data(n_clusters=3, n_per_arm=10)
        model = bmmlr.mixed_effects_model(2, data.n_columns, (0, 1))
        chains = bmmlr.fit(
            data, model, config=McmcConfig(iterations=40, burnin=5, chains=2, seed=4)
        )
        unthinned = subpopulation_effect(chains, data, full_population(), thin=1)
        thinned = subpopulation_effect(chains, data, full_population(), thin=4)
        per_chain = unthinned.delta.reshape(2, 40, 2)
        expected = per_chain[:, ::4].reshape(-1, 2)
        assert np.array_equal(thinned.delta, expected)

    def test_empty_subpopulation_raises(self):
        data = scenario_data()
        chains = truth_chains(data)
        with pytest.raises(EmptySubpopulationError):
            subpopulation_effect(chains, data, covariate_interval("w", 99.0, 100.0), thin=1)

    def test_nonqualifying_cluster_gets_zero_weight(self):
        # cluster 2's covariates sit outside the window; pooling must ignore it
        w = np.array([0.0, 0.1, 0.0, 0.1, 5.0, 5.0])
        data = build_dataset(
            [1, 1, 2, 2, 3, 3],
            [1, 0, 1, 0, 1, 0],
            w,
            np.array([[1, 0], [0, 1], [1, 1], [0, 0], [1, 0], [1, 1]]),
            covariate_names=["w"],
        )
        rng = np.random.default_rng(3)
        gj = rng.normal(size=(3, 3, 2))
        beta = rng.normal(size=(3, 2))
        chains = constant_chains(data, gj, beta)
        window = covariate_interval("w", -1.0, 1.0)
        draws = subpopulation_effect(chains, data, window, thin=1, keep_per_cluster=True)
        assert draws.per_cluster.shape[1] == 2  # cluster 3 dropped
        assert draws.cluster_weights.tolist() == [2.0, 2.0]

    def test_per_arm_mode(self):
        data = scenario_data(n_clusters=4, n_per_arm=40)
        chains = truth_chains(data)
        cf = subpopulation_effect(chains, data, full_population(), thin=1)
        pa = subpopulation_effect(
            chains, data, full_population(), thin=1, counterfactual=False
        )
        # same estimand, different averaging sample; close but not identical
        assert np.abs(cf.delta - pa.delta).max() < 0.1
        assert not np.array_equal(cf.delta, pa.delta)

    def test_per_cluster_pooling_consistency(self):
        data = scenario_data(n_clusters=5, n_per_arm=25)
        chains = truth_chains(data, n_draws=3)
        draws = subpopulation_effect(
            chains, data, full_population(), thin=1, keep_per_cluster=True
        )
        repooled = pool_over_clusters(draws.per_cluster, draws.cluster_weights)
        assert np.allclose(repooled, draws.delta, atol=1e-12)


class TestBernoulliEffects:
    def test_shapes_and_range(self):
        data = scenario_data(n_clusters=3, n_per_arm=30)
        post = bmmlr.posterior_bmb(data)
        draws = bernoulli_effect_draws(post, 500, bmmlr.stream(6))
        assert draws.delta.shape == (500, 2)
        assert (draws.delta >= -1).all() and (draws.delta <= 1).all()

    def test_concentrated_posterior_matches_empirical_difference(self):
        rng = np.random.default_rng(11)
        n = 4000
        treatment = np.tile([0, 1], n // 2)
        outcomes = np.column_stack(
            [
                rng.random(n) < np.where(treatment, 0.7, 0.5),
                rng.random(n) < np.where(treatment, 0.4, 0.4),
            ]
        ).astype(int)
        data = build_dataset(np.ones(n, dtype=int), treatment, np.zeros(n), outcomes)
        post = bmmlr.posterior_bmb(data)
        draws = bernoulli_effect_draws(post, 2000, bmmlr.stream(7))
        mean = draws.delta.mean(axis=0)
        assert abs(mean[0] - 0.2) < 0.04
        assert abs(mean[1] - 0.0) < 0.04
