"""Transformation of posterior coefficients to treatment differences.

For every stored draw, cluster-specific joint category probabilities
are computed for both treatment arms, reduced to marginal success
probabilities, differenced, and pooled over clusters with
size-proportional weights:

    delta_j = theta(arm 1, cluster j) - theta(arm 0, cluster j)
    delta   = sum_j n_j delta_j / sum_j n_j

Subpopulations come in three kinds.  A *value* subpopulation evaluates
the linear predictor directly at a covariate value; *full* and
*interval* subpopulations average subject-level joint probabilities
over the qualifying empirical sample.  By default that average is
counterfactual: every qualifying subject, from either arm, contributes
to both arms with the treatment indicator (and its interaction columns)
overridden.  Per-arm averaging, which uses each arm's own subjects
only, is available via ``counterfactual=False``.  Pooling weights n_j
are qualifying-subject counts (clusters with none get weight zero);
value subpopulations weigh by total cluster size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ClusteredDataset, INTERACTION, TREATMENT
from .exceptions import DimensionError, EmptySubpopulationError, InvalidParameterError
from .inference import BmbPosterior, PosteriorChains
from .mvb import build_response_design, multinomial_logistic

FULL_POPULATION = "full"
INTERVAL = "interval"
VALUE = "value"


@dataclass(frozen=True)
class SubpopulationSpec:
    """Which (sub)population a treatment effect conditions on.

    ``covariate`` names a covariate column (by name or design-column
    index); it is unused for the full population.  Interval bounds are
    inclusive.
    """

    kind: str
    covariate: object = None
    lower: float = -np.inf
    upper: float = np.inf
    value: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in (FULL_POPULATION, INTERVAL, VALUE):
            raise InvalidParameterError(f"unknown subpopulation kind {self.kind!r}")
        if self.kind == INTERVAL and not self.lower <= self.upper:
            raise InvalidParameterError("interval requires lower <= upper")
        if self.kind != FULL_POPULATION and self.covariate is None:
            raise InvalidParameterError(f"{self.kind} subpopulation needs a covariate")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == FULL_POPULATION:
            return "ate"
        if self.kind == INTERVAL:
            return f"cate[{self.lower:g},{self.upper:g}]"
        return f"cate[{self.covariate}={self.value:g}]"


def full_population(name: str = "") -> SubpopulationSpec:
    return SubpopulationSpec(FULL_POPULATION, name=name)


def covariate_interval(covariate, lower, upper, name: str = "") -> SubpopulationSpec:
    return SubpopulationSpec(INTERVAL, covariate, float(lower), float(upper), name=name)


def covariate_value(covariate, value, name: str = "") -> SubpopulationSpec:
    return SubpopulationSpec(VALUE, covariate, value=float(value), name=name)


@dataclass(frozen=True)
class CompositeWeights:
    """Nonnegative outcome weights, normalized to sum to one."""

    weights: np.ndarray

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or (w < 0).any() or w.sum() <= 0:
            raise InvalidParameterError("weights must be nonnegative with positive sum")
        object.__setattr__(self, "weights", w / w.sum())


@dataclass(frozen=True)
class EffectDraws:
    """Per-draw pooled treatment differences (and optional cluster detail)."""

    delta: np.ndarray  # (L, K)
    per_cluster: np.ndarray | None = field(default=None, repr=False)  # (L, J', K)
    cluster_weights: np.ndarray | None = field(default=None, repr=False)  # (J',)

    @property
    def n_draws(self) -> int:
        return self.delta.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.delta.shape[1]


def composite(delta, weights: CompositeWeights) -> np.ndarray:
    """Weighted combination delta(w) = sum_k w_k delta_k (vectorized over draws)."""
    d = np.asarray(delta, dtype=float)
    if d.shape[-1] != weights.weights.shape[0]:
        raise DimensionError("weights do not match the number of outcomes")
    return d @ weights.weights


def pool_over_clusters(delta_j, cluster_sizes) -> np.ndarray:
    """Cluster-size-weighted pooling; weights may be zero but not all zero."""
    d = np.asarray(delta_j, dtype=float)
    n = np.asarray(cluster_sizes, dtype=float)
    if n.ndim != 1 or d.shape[-2] != n.shape[0]:
        raise DimensionError("cluster sizes do not match delta_j")
    if (n < 0).any() or n.sum() <= 0:
        raise EmptySubpopulationError("all cluster weights are zero")
    return np.tensordot(d, n, axes=([-2], [0])) / n.sum()


def subject_joint_probability(x, coefficients, design=None) -> np.ndarray:
    """Joint category probabilities for one covariate row and one draw.

    ``coefficients`` is the (Q-1, P) matrix of per-category coefficients
    applicable to the subject's cluster (reference category implicit).
    """
    coef = np.atleast_2d(np.asarray(coefficients, dtype=float))
    x = np.asarray(x, dtype=float)
    if coef.shape[1] != x.shape[0]:
        raise DimensionError(
            f"coefficient matrix has {coef.shape[1]} columns, x has length {x.shape[0]}"
        )
    return multinomial_logistic(coef @ x)


def _thinned_flat(chains: PosteriorChains, thin: int):
    """Per-chain thinning, then concatenation across chains."""
    if thin < 1 or thin > chains.n_draws:
        raise InvalidParameterError("transformation thinning factor out of range")
    keep = np.arange(0, chains.n_draws, thin)
    n_flat = chains.n_chains * keep.size
    gj = chains.gamma_j[:, keep].reshape((n_flat,) + chains.gamma_j.shape[2:])
    b = chains.beta[:, keep].reshape((n_flat,) + chains.beta.shape[2:])
    return gj, b


def qualifying_mask(data: ClusteredDataset, subpop: SubpopulationSpec) -> np.ndarray:
    if subpop.kind == FULL_POPULATION:
        return np.ones(data.n_subjects, dtype=bool)
    col = data.covariate_column(subpop.covariate)
    vals = data.x[:, col]
    return (vals >= subpop.lower) & (vals <= subpop.upper)


@dataclass(frozen=True)
class _ArmRows:
    """One arm's evaluation rows, cluster-sorted, with segment offsets."""

    x: np.ndarray  # (M, P) design rows to evaluate
    clusters: np.ndarray  # (M,) cluster index per row
    starts: np.ndarray  # reduceat offsets, one per present cluster
    counts: np.ndarray  # rows per present cluster


def _segments(cluster_rows: np.ndarray, n_clusters: int):
    counts = np.bincount(cluster_rows, minlength=n_clusters)
    present = np.flatnonzero(counts)
    starts = np.searchsorted(cluster_rows, present)
    return present, starts, counts[present].astype(float)


def _value_rows(data: ClusteredDataset, subpop: SubpopulationSpec, arm: int) -> np.ndarray:
    # synthetic row per cluster at the covariate value; any other
    # covariates are held at their sample means
    base = data.x.mean(axis=0)
    col = data.covariate_column(subpop.covariate)
    rows = np.tile(base, (data.n_clusters, 1))
    rows[:, col] = subpop.value
    for idx, role in enumerate(data.roles):
        if role.kind == TREATMENT:
            rows[:, idx] = arm
        elif role.kind == INTERACTION:
            rows[:, idx] = rows[:, role.covariate_column] * arm
    return rows


def _prepare_rows(data, subpop, counterfactual):
    """Evaluation rows per arm, the shared present-cluster set, and
    pooling weights aligned with it."""
    n_clusters = data.n_clusters
    if subpop.kind == VALUE:
        idx = np.arange(n_clusters)
        arms = [
            _ArmRows(_value_rows(data, subpop, arm), idx, idx, np.ones(n_clusters))
            for arm in (0, 1)
        ]
        return arms, idx, data.cluster_sizes.astype(float)

    mask = qualifying_mask(data, subpop)
    if not mask.any():
        raise EmptySubpopulationError(
            f"no subject qualifies for {subpop.label!r} in any cluster"
        )
    if counterfactual:
        rows = np.flatnonzero(mask)
        cluster_rows = data.cluster[rows]
        present, starts, counts = _segments(cluster_rows, n_clusters)
        arms = [
            _ArmRows(data.counterfactual_x(arm, rows), cluster_rows, starts, counts)
            for arm in (0, 1)
        ]
        return arms, present, counts

    per_arm_rows = [np.flatnonzero(mask & (data.treatment == arm)) for arm in (0, 1)]
    have = [
        np.bincount(data.cluster[r], minlength=n_clusters) > 0 for r in per_arm_rows
    ]
    valid = have[0] & have[1]
    if not valid.any():
        raise EmptySubpopulationError(
            f"no cluster has both arms represented in {subpop.label!r}"
        )
    arms = []
    for r in per_arm_rows:
        r = r[valid[data.cluster[r]]]
        cluster_rows = data.cluster[r]
        _, starts, counts = _segments(cluster_rows, n_clusters)
        arms.append(_ArmRows(data.x[r], cluster_rows, starts, counts))
    weights = np.bincount(data.cluster[mask], minlength=n_clusters).astype(float)
    return arms, np.flatnonzero(valid), weights[valid]


def subpopulation_effect(
    chains: PosteriorChains,
    data: ClusteredDataset,
    subpop: SubpopulationSpec,
    thin: int = 10,
    counterfactual: bool = True,
    keep_per_cluster: bool = False,
) -> EffectDraws:
    """Pooled treatment-difference draws for a (sub)population.

    Thinning (default factor 10) is applied per chain before the
    transformation to keep its cost down; the retained draws are an
    exact sub-sequence of the unthinned transformation.
    """
    model = chains.model
    design = build_response_design(model.n_outcomes)
    h = design.patterns.astype(float)
    gj, beta = _thinned_flat(chains, thin)
    n_draws = gj.shape[0]

    arms, present, pooled_weights = _prepare_rows(data, subpop, counterfactual)
    if pooled_weights.sum() <= 0:
        raise EmptySubpopulationError(f"all cluster weights are zero for {subpop.label!r}")

    pr = len(model.random_columns)
    pf = len(model.fixed_columns)
    q_free = gj.shape[1] if pr else beta.shape[1]
    x_random = [np.ascontiguousarray(a.x[:, list(model.random_columns)]) for a in arms]
    x_fixed = [np.ascontiguousarray(a.x[:, list(model.fixed_columns)]) for a in arms]

    delta = np.empty((n_draws, design.n_outcomes))
    per_cluster = (
        np.empty((n_draws, present.shape[0], design.n_outcomes))
        if keep_per_cluster
        else None
    )
    wsum = pooled_weights.sum()

    for l in range(n_draws):
        theta = []
        for a in (0, 1):
            arm = arms[a]
            if pf:
                psi = x_fixed[a] @ beta[l].T
            else:
                psi = np.zeros((arm.x.shape[0], q_free))
            if pr:
                psi = psi + np.einsum("mp,qmp->mq", x_random[a], gj[l][:, arm.clusters, :])
            phi = multinomial_logistic(psi)
            sums = np.add.reduceat(phi, arm.starts, axis=0)
            theta.append((sums / arm.counts[:, None]) @ h)
        dj = theta[1] - theta[0]
        if keep_per_cluster:
            per_cluster[l] = dj
        delta[l] = pooled_weights @ dj / wsum

    return EffectDraws(
        delta=delta,
        per_cluster=per_cluster,
        cluster_weights=pooled_weights if keep_per_cluster else None,
    )


def bernoulli_effect_draws(
    posterior: BmbPosterior,
    n_draws: int,
    stream,
) -> EffectDraws:
    """Effect draws for the conjugate model: per-arm Dirichlet draws of the
    joint probabilities, differenced on the success-probability scale."""
    design = build_response_design(posterior.n_outcomes)
    h = design.patterns.astype(float)
    joint1 = posterior.sample_joint(1, n_draws, stream)
    joint0 = posterior.sample_joint(0, n_draws, stream)
    return EffectDraws(delta=(joint1 - joint0) @ h)
