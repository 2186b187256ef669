"""Model fitting: the three Gibbs-sampled regression variants and the
conjugate multivariate-Bernoulli model.

Model kinds
-----------
``bmmlr-random``
    All coefficients vary by cluster around common means.
``bmmlr-mixed``
    A cluster-varying block plus a shared block (the usual choice:
    random intercept and treatment, shared covariate effects).
``bmlr``
    Single level; every coefficient shared, clustering ignored.
``bmb``
    No regression at all: per-arm joint category counts with a
    conjugate Dirichlet prior, sampled in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import gibbs, samplers
from .data import ClusteredDataset
from .exceptions import DimensionError, InvalidParameterError
from .mvb import build_response_design, encode_outcomes

BMMLR_RANDOM = "bmmlr-random"
BMMLR_MIXED = "bmmlr-mixed"
BMLR = "bmlr"
BMB = "bmb"
MODEL_KINDS = (BMMLR_RANDOM, BMMLR_MIXED, BMLR, BMB)


@dataclass(frozen=True)
class ModelSpec:
    """Which model to fit, and how design columns split into blocks."""

    kind: str
    n_outcomes: int
    random_columns: tuple[int, ...] = ()
    fixed_columns: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidParameterError(
                f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}"
            )
        if self.kind == BMMLR_MIXED and not self.random_columns:
            raise InvalidParameterError(
                "mixed model requires a non-empty cluster-varying block"
            )
        if self.kind == BMMLR_RANDOM and self.fixed_columns:
            raise InvalidParameterError("random-effects model takes no shared block")
        if self.kind == BMLR and self.random_columns:
            raise InvalidParameterError("single-level model takes no cluster-varying block")
        overlap = set(self.random_columns) & set(self.fixed_columns)
        if overlap:
            raise InvalidParameterError(f"columns {sorted(overlap)} assigned to both blocks")

    def validate_against(self, data: ClusteredDataset) -> None:
        if self.kind == BMB:
            return
        used = sorted(self.random_columns) + sorted(self.fixed_columns)
        expected = list(range(data.n_columns))
        if sorted(used) != expected:
            raise DimensionError(
                f"model columns {used} must partition the {data.n_columns} design columns"
            )


def random_effects_model(n_outcomes: int, n_columns: int) -> ModelSpec:
    return ModelSpec(BMMLR_RANDOM, n_outcomes, tuple(range(n_columns)), ())


def mixed_effects_model(n_outcomes: int, n_columns: int, random_columns=(0, 1)) -> ModelSpec:
    random_columns = tuple(random_columns)
    fixed = tuple(c for c in range(n_columns) if c not in random_columns)
    return ModelSpec(BMMLR_MIXED, n_outcomes, random_columns, fixed)


def single_level_model(n_outcomes: int, n_columns: int) -> ModelSpec:
    return ModelSpec(BMLR, n_outcomes, (), tuple(range(n_columns)))


def bernoulli_model(n_outcomes: int) -> ModelSpec:
    return ModelSpec(BMB, n_outcomes)


@dataclass(frozen=True)
class PriorSpec:
    """Priors per free category (arrays broadcast over categories).

    Precisions, not covariances: a N(0, 10 I) coefficient prior is
    ``coef_precision = I / 10``.  ``iw_df``/``iw_scale`` parametrize the
    inverse-Wishart on the random-effect covariance; ``dirichlet`` is
    the per-category concentration for the conjugate model.
    """

    coef_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    coef_precision: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    fixed_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fixed_precision: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    iw_df: float = 0.0
    iw_scale: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    dirichlet: np.ndarray = field(default_factory=lambda: np.full(4, 0.01))


def default_priors(
    model: ModelSpec,
    coefficient_variance: float = 10.0,
    iw_scale_diag: float = 0.1,
    dirichlet_concentration: float = 0.01,
) -> PriorSpec:
    """Diffuse defaults: N(0, 10) coefficients, invW(P_R, 0.1 I) covariance,
    Dirichlet(0.01) for the conjugate model."""
    pr = len(model.random_columns)
    pf = len(model.fixed_columns)
    q = 2 ** model.n_outcomes
    return PriorSpec(
        coef_mean=np.zeros(pr),
        coef_precision=np.eye(pr) / coefficient_variance,
        fixed_mean=np.zeros(pf),
        fixed_precision=np.eye(pf) / coefficient_variance,
        iw_df=float(max(pr, 2)) if pr else 0.0,
        iw_scale=iw_scale_diag * np.eye(pr),
        dirichlet=np.full(q, dirichlet_concentration),
    )


@dataclass(frozen=True)
class McmcConfig:
    """Chain configuration; `iterations` counts post-burn-in sweeps."""

    iterations: int = 50_000
    burnin: int = 10_000
    chains: int = 2
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidParameterError("iterations must be >= 1")
        if self.burnin < 0:
            raise InvalidParameterError("burnin must be >= 0")
        if self.chains < 1:
            raise InvalidParameterError("need at least one chain")
        if not (1 <= self.thin <= self.iterations):
            raise InvalidParameterError("thin must be in [1, iterations]")


@dataclass(frozen=True)
class PosteriorChains:
    """Stored posterior draws; leading axes are (chain, draw).

    gamma_j: (C, L, Q-1, J, P_R)   cluster coefficient blocks
    gamma:   (C, L, Q-1, P_R)      coefficient means
    sigma:   (C, L, Q-1, P_R, P_R) random-effect covariances
    beta:    (C, L, Q-1, P_F)      shared coefficients
    """

    gamma_j: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    model: ModelSpec = None
    config: McmcConfig = None

    @property
    def n_chains(self) -> int:
        return self.gamma.shape[0]

    @property
    def n_draws(self) -> int:
        return self.gamma.shape[1]

    def parameter_chains(self) -> dict[str, np.ndarray]:
        """Scalar (C, L) chains for every stored parameter, by name."""
        out = {}
        c, l, qf, pr = self.gamma.shape
        pf = self.beta.shape[-1]
        for q in range(qf):
            for p in range(pf):
                out[f"beta[q{q + 1},{self.model.fixed_columns[p]}]"] = self.beta[:, :, q, p]
            for p in range(pr):
                col = self.model.random_columns[p]
                out[f"gamma_mean[q{q + 1},{col}]"] = self.gamma[:, :, q, p]
            for a in range(pr):
                for b in range(a + 1):
                    out[f"sigma[q{q + 1},{a},{b}]"] = self.sigma[:, :, q, a, b]
        return out


@dataclass(frozen=True)
class BmbPosterior:
    """Closed-form per-arm Dirichlet posteriors for the conjugate model."""

    alpha_control: np.ndarray  # (Q,)
    alpha_treated: np.ndarray  # (Q,)
    n_control: int
    n_treated: int
    n_outcomes: int

    def sample_joint(self, arm: int, n_draws: int, stream) -> np.ndarray:
        alpha = self.alpha_treated if arm == 1 else self.alpha_control
        return np.stack([samplers.sample_dirichlet(alpha, stream) for _ in range(n_draws)])


def posterior_bmb(
    data: ClusteredDataset, alpha0=None, rows=None
) -> BmbPosterior:
    """Conjugate update: per-arm category counts plus the prior concentration.

    ``rows`` restricts the update to a subject subset (used for
    covariate-defined subpopulations, where this model subsamples).
    """
    design = build_response_design(data.n_outcomes)
    alpha0 = np.asarray(
        alpha0 if alpha0 is not None else np.full(design.n_categories, 0.01), dtype=float
    )
    if alpha0.shape != (design.n_categories,) or not (alpha0 > 0).all():
        raise InvalidParameterError(
            f"prior concentration must be {design.n_categories} positive values"
        )
    codes = encode_outcomes(data.outcomes, design)
    treatment = data.treatment
    if rows is not None:
        codes = codes[rows]
        treatment = treatment[rows]
    counts = np.zeros((2, design.n_categories))
    for arm in (0, 1):
        counts[arm] = np.bincount(
            codes[treatment == arm], minlength=design.n_categories
        )
    return BmbPosterior(
        alpha_control=counts[0] + alpha0,
        alpha_treated=counts[1] + alpha0,
        n_control=int((treatment == 0).sum()),
        n_treated=int((treatment == 1).sum()),
        n_outcomes=data.n_outcomes,
    )


def _chain_task(problem, config: McmcConfig, chain_index: int):
    stream = samplers.substreams(config.seed, config.chains, key=(0,))[chain_index]
    return gibbs.run_chain(
        problem, config.iterations, config.burnin, config.thin, stream, chain_index
    )


def fit(
    data: ClusteredDataset,
    model: ModelSpec,
    prior: PriorSpec | None = None,
    config: McmcConfig | None = None,
    workers: int = 1,
):
    """Fit a model; returns `PosteriorChains`, or `BmbPosterior` for the
    conjugate kind (closed form, no iterations).

    ``workers`` > 1 runs chains in separate processes; each chain owns
    an independently derived stream, so results are identical to the
    sequential run.
    """
    if prior is None:
        prior = default_priors(model)
    if model.kind == BMB:
        return posterior_bmb(data, prior.dirichlet)
    if config is None:
        config = McmcConfig()
    model.validate_against(data)
    problem = gibbs.build_problem(data, model, prior)
    if workers > 1 and config.chains > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(workers, config.chains)) as pool:
            stores = list(
                pool.map(
                    _chain_task,
                    [problem] * config.chains,
                    [config] * config.chains,
                    range(config.chains),
                )
            )
    else:
        stores = [_chain_task(problem, config, c) for c in range(config.chains)]
    return PosteriorChains(
        gamma_j=np.stack([s.gamma_j for s in stores]),
        gamma=np.stack([s.gamma for s in stores]),
        sigma=np.stack([s.sigma for s in stores]),
        beta=np.stack([s.beta for s in stores]),
        model=model,
        config=config,
    )
