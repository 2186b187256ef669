import math

import numpy as np
import pytest

import bmmlr
from bmmlr import gibbs
from bmmlr.exceptions import DimensionError, NotSPDError

# tilt at an all-zero state with four categories: psi_q = 0 and the other
# three categories (incl. the reference) each contribute exp(0) = 1
ETA_ZERO_STATE = -math.log(3.0)
OMEGA_MEAN_ZERO_STATE = 0.22755980665670935


def make_problem(n_clusters=4, n_per_arm=25, seed=0, kind="mixed"):
    spec = bmmlr.ScenarioSpec(
        n_clusters=n_clusters, n_per_arm=n_per_arm, replications=1, seed=seed
    )
    data = bmmlr.generate_dataset(spec, 0)
    if kind == "mixed":
        model = bmmlr.mixed_effects_model(2, data.n_columns, (0, 1))
    elif kind == "random":
        model = bmmlr.random_effects_model(2, data.n_columns)
    else:
        model = bmmlr.single_level_model(2, data.n_columns)
    prior = bmmlr.default_priors(model)
    return data, model, prior, gibbs.build_problem(data, model, prior)


def zero_state(problem, stream):
    state = gibbs.initial_state(problem, stream)
    state.gamma_j[:] = 0.0
    state.gamma[:] = 0.0
    state.beta[:] = 0.0
    state.psi[:] = 0.0
    return state


class TestPolyaGammaStep:
    def test_tilt_at_zero_state(self):
        _, _, _, problem = make_problem(n_clusters=10, n_per_arm=100)
        state = zero_state(problem, bmmlr.stream(0))
        for q in range(3):
            eta = gibbs.polya_gamma_tilt(state, q)
            assert np.allclose(eta, ETA_ZERO_STATE, atol=1e-14)

    def test_omega_mean_at_zero_state(self):
        _, _, _, problem = make_problem(n_clusters=10, n_per_arm=100)
        state = zero_state(problem, bmmlr.stream(1))
        gibbs.update_polya_gamma(state, problem, 0, bmmlr.stream(2))
        omega = state.omega[0]
        se = omega.std() / math.sqrt(omega.size)
        assert abs(omega.mean() - OMEGA_MEAN_ZERO_STATE) < 4 * se

    def test_tilt_not_shift_invariant(self):
        # the reference category pins the scale: shifting one category's
        # predictors must change another category's tilt
        _, _, _, problem = make_problem()
        state = zero_state(problem, bmmlr.stream(3))
        before = gibbs.polya_gamma_tilt(state, 1).copy()
        state.psi[0] += 1.0
        after = gibbs.polya_gamma_tilt(state, 1)
        assert not np.allclose(before, after)


class TestClusterStep:
    def test_prior_dominance(self):
        _, _, _, problem = make_problem(n_clusters=3)
        state = zero_state(problem, bmmlr.stream(4))
        gibbs.update_polya_gamma(state, problem, 0, bmmlr.stream(5))
        state.sigma[0] = 1e-8 * np.eye(2)  # prior pins cluster blocks at gamma = 0
        gibbs.update_cluster_coefficients(state, problem, 0, bmmlr.stream(6))
        assert np.abs(state.gamma_j[0]).max() < 1e-2

    def test_not_spd_raises_with_context(self):
        _, _, _, problem = make_problem()
        state = zero_state(problem, bmmlr.stream(7))
        gibbs.update_polya_gamma(state, problem, 0, bmmlr.stream(8))
        state.sigma[0] = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(NotSPDError):
            gibbs.update_cluster_coefficients(state, problem, 0, bmmlr.stream(9))

    def test_block_absent_for_single_level(self):
        _, _, _, problem = make_problem(kind="single")
        state = zero_state(problem, bmmlr.stream(10))
        with pytest.raises(DimensionError):
            gibbs.update_cluster_coefficients(state, problem, 0, bmmlr.stream(11))


class TestMeanStep:
    def test_prior_dominance(self):
        _, model, prior, _ = make_problem()
        from dataclasses import replace

        data, model, _, _ = make_problem()
        strong = replace(
            prior,
            coef_mean=np.array([0.7, -0.2]),
            coef_precision=1e8 * np.eye(2),
        )
        problem = gibbs.build_problem(data, model, strong)
        state = zero_state(problem, bmmlr.stream(12))
        gibbs.update_coefficient_means(state, problem, 0, bmmlr.stream(13))
        assert np.allclose(state.gamma[0], [0.7, -0.2], atol=1e-3)

    def test_pooled_mean_recovers_shared_value(self):
        data, model, prior, _ = make_problem(n_clusters=100, n_per_arm=2)
        problem = gibbs.build_problem(data, model, prior)
        state = zero_state(problem, bmmlr.stream(14))
        target = np.array([0.8, -0.5])
        state.gamma_j[0] = target  # all clusters agree
        state.sigma[0] = 0.01 * np.eye(2)
        draws = []
        rng = bmmlr.stream(15)
        for _ in range(200):
            gibbs.update_coefficient_means(state, problem, 0, rng)
            draws.append(state.gamma[0].copy())
        mean = np.mean(draws, axis=0)
        assert np.abs(mean - target).max() < 0.01


class TestCovarianceStep:
    def test_zero_scatter_reduces_to_prior(self):
        data, model, prior, problem = make_problem(n_clusters=20)
        state = zero_state(problem, bmmlr.stream(16))
        state.gamma_j[0] = 0.0
        state.gamma[0] = 0.0
        rng = bmmlr.stream(17)
        draws = np.stack(
            [
                (gibbs.update_covariance(state, problem, 0, rng), state.sigma[0].copy())[1]
                for _ in range(20_000)
            ]
        )
        df = prior.iw_df + 20
        expected = prior.iw_scale / (df - 2 - 1)
        assert np.abs(draws.mean(axis=0) - expected).max() < 0.05 * expected[0, 0]
        eigs = np.linalg.eigvalsh(draws)
        assert (eigs[:, 0] > 0).all()

    def test_dispersed_clusters_match_scatter(self):
        data, model, prior, problem = make_problem(n_clusters=200, n_per_arm=1)
        state = zero_state(problem, bmmlr.stream(18))
        rng = bmmlr.stream(19)
        spread = rng.standard_normal((200, 2)) * [0.5, 0.2]
        state.gamma_j[0] = spread
        state.gamma[0] = spread.mean(axis=0)
        scatter = (spread - state.gamma[0]).T @ (spread - state.gamma[0])
        draws = np.stack(
            [
                (gibbs.update_covariance(state, problem, 0, rng), state.sigma[0].copy())[1]
                for _ in range(20_000)
            ]
        )
        df = prior.iw_df + 200
        expected = (prior.iw_scale + scatter) / (df - 2 - 1)
        assert np.abs(draws.mean(axis=0) - expected).max() < 0.05 * expected.max()


class TestFixedStep:
    def test_prior_dominance(self):
        from dataclasses import replace

        data, model, prior, _ = make_problem()
        strong = replace(prior, fixed_precision=1e8 * np.eye(2))
        problem = gibbs.build_problem(data, model, strong)
        state = zero_state(problem, bmmlr.stream(20))
        gibbs.update_polya_gamma(state, problem, 0, bmmlr.stream(21))
        gibbs.update_fixed_coefficients(state, problem, 0, bmmlr.stream(22))
        assert np.abs(state.beta[0]).max() < 1e-3

    def test_block_absent_for_random_model(self):
        _, _, _, problem = make_problem(kind="random")
        state = zero_state(problem, bmmlr.stream(23))
        with pytest.raises(DimensionError):
            gibbs.update_fixed_coefficients(state, problem, 0, bmmlr.stream(24))


class TestModelEquivalence:
    def test_mixed_with_empty_shared_block_matches_random_model(self):
        spec = bmmlr.ScenarioSpec(n_clusters=4, n_per_arm=10, replications=1, seed=5)
        data = bmmlr.generate_dataset(spec, 0)
        cfg = bmmlr.McmcConfig(iterations=50, burnin=10, chains=2, seed=77)
        random_model = bmmlr.random_effects_model(2, data.n_columns)
        mixed_model = bmmlr.ModelSpec(
            bmmlr.BMMLR_MIXED, 2, tuple(range(data.n_columns)), ()
        )
        a = bmmlr.fit(data, random_model, config=cfg)
        b = bmmlr.fit(data, mixed_model, config=cfg)
        assert np.array_equal(a.gamma_j, b.gamma_j)
        assert np.array_equal(a.sigma, b.sigma)
