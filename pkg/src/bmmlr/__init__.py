"""Bayesian multilevel multivariate logistic regression (BMMLR).

Treatment-effect estimation and superiority decision-making for
multiple correlated binary outcomes in clustered randomized trials:
Polya-Gamma Gibbs sampling for multilevel multinomial logistic models,
transformation of coefficients to the probability scale, configurable
decision rules, chain diagnostics, and a simulation harness for
decision error rates.
"""

__version__ = "0.1.0"

from .data import ClusteredDataset, build_dataset
from .decision import (
    DecisionOutcome,
    DecisionRule,
    all_rule,
    any_rule,
    compensatory_rule,
    cutoff,
    decide,
    region_probability,
    single_rule,
)
from .diagnostics import (
    ChainSummary,
    autocorrelation,
    effective_sample_size,
    max_psrf,
    psrf,
    summarize,
    thin,
)
from .effects import (
    CompositeWeights,
    EffectDraws,
    SubpopulationSpec,
    bernoulli_effect_draws,
    composite,
    covariate_interval,
    covariate_value,
    full_population,
    pool_over_clusters,
    subject_joint_probability,
    subpopulation_effect,
)
from .exceptions import (
    BmmlrError,
    ChainDivergenceError,
    DataError,
    DimensionError,
    EmptySubpopulationError,
    InvalidParameterError,
    NotSPDError,
    NumericInputError,
)
from .inference import (
    BMB,
    BMLR,
    BMMLR_MIXED,
    BMMLR_RANDOM,
    BmbPosterior,
    McmcConfig,
    ModelSpec,
    PosteriorChains,
    PriorSpec,
    bernoulli_model,
    default_priors,
    fit,
    mixed_effects_model,
    posterior_bmb,
    random_effects_model,
    single_level_model,
)
from .mvb import (
    ResponseDesign,
    build_response_design,
    encode_outcome,
    encode_outcomes,
    joint_to_success,
    multinomial_logistic,
)
from .samplers import (
    sample_categories,
    sample_category,
    sample_dirichlet,
    sample_inverse_wishart,
    sample_mvn,
    sample_polya_gamma,
    stream,
    substreams,
)
from .simulate import (
    ErrorRateTable,
    ScenarioSpec,
    desk_mcmc,
    generate_dataset,
    mc_true_effects,
    paper_mcmc,
    run_scenario,
)
