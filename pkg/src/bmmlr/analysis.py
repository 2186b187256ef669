"""End-to-end analysis: fit, transform, decide, diagnose.

`analyze` drives the whole pipeline for one dataset and one declarative
configuration, producing a JSON-ready result document with, per
subpopulation and rule: point estimates of the treatment differences
and weighted composites, credible intervals, posterior region
probabilities, verdicts, convergence diagnostics and run metadata.
Identical config, data and seed give a byte-identical document.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from . import decision as decision_mod
from . import diagnostics as diag_mod
from . import effects as effects_mod
from .data import ClusteredDataset
from .exceptions import InvalidParameterError
from .inference import (
    BMB,
    BMLR,
    BMMLR_MIXED,
    BMMLR_RANDOM,
    McmcConfig,
    ModelSpec,
    PosteriorChains,
    default_priors,
    fit,
    mixed_effects_model,
    posterior_bmb,
    random_effects_model,
    single_level_model,
)
from .io import ColumnBindings
from .mvb import build_response_design


@dataclass(frozen=True)
class AnalysisConfig:
    """Declarative analysis description (usually loaded from YAML)."""

    bindings: ColumnBindings
    model_kind: str = BMMLR_MIXED
    random_effects: tuple = ("intercept", "treatment")
    interactions: bool = True
    coefficient_variance: float = 10.0
    iw_scale_diag: float = 0.1
    iw_df: float | None = None
    dirichlet_concentration: float = 0.01
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    subpopulations: tuple = ()
    rules: tuple = ()
    transform_thin: int = 10
    counterfactual: bool = True


_PRESET_MCMC = {
    # chain settings by named preset; "ist3-scale" mirrors the long-run
    # re-analysis configuration
    "default": dict(iterations=50_000, burnin=10_000, chains=2, thin=1),
    "desk": dict(iterations=10_000, burnin=2_000, chains=2, thin=1),
    "ist3-scale": dict(iterations=500_000, burnin=10_000, chains=2, thin=1),
}


def config_from_dict(doc: dict) -> AnalysisConfig:
    """Build an `AnalysisConfig` from a parsed YAML/JSON mapping."""
    try:
        columns = doc["columns"]
        bindings = ColumnBindings(
            cluster=columns["cluster"],
            treatment=columns["treatment"],
            outcomes=tuple(columns["outcomes"]),
            covariates=tuple(columns.get("covariates", ())),
        )
    except KeyError as err:
        raise InvalidParameterError(f"config is missing required key: {err}") from None

    model = doc.get("model", {})
    prior = doc.get("prior", {})
    mcmc_doc = dict(_PRESET_MCMC[doc.get("preset", "default")])
    mcmc_doc.update(doc.get("mcmc", {}))
    mcmc_doc.setdefault("seed", 0)
    mcmc = McmcConfig(**mcmc_doc)

    subpops = []
    for item in doc.get("subpopulations", []):
        kind = item.get("kind", "full")
        if kind == "full":
            subpops.append(effects_mod.full_population(name=item.get("name", "")))
        elif kind == "interval":
            subpops.append(
                effects_mod.covariate_interval(
                    item["covariate"],
                    item.get("lower", -np.inf),
                    item.get("upper", np.inf),
                    name=item.get("name", ""),
                )
            )
        elif kind == "value":
            subpops.append(
                effects_mod.covariate_value(
                    item["covariate"], item["value"], name=item.get("name", "")
                )
            )
        else:
            raise InvalidParameterError(f"unknown subpopulation kind {kind!r}")
    if not subpops:
        subpops = [effects_mod.full_population(name="ate")]

    rules = []
    for item in doc.get("rules", []):
        kind = item["kind"]
        sided = item.get("sided", "right")
        alpha = float(item.get("alpha", 0.05))
        if kind == "compensatory":
            rules.append(decision_mod.compensatory_rule(item["weights"], sided, alpha))
        elif kind == "single":
            outcome = item["outcome"]
            if isinstance(outcome, str):
                outcome = bindings.outcomes.index(outcome) + 1
            rules.append(decision_mod.single_rule(int(outcome) - 1, sided, alpha))
        elif kind == "any":
            rules.append(decision_mod.any_rule(sided, alpha))
        elif kind == "all":
            rules.append(decision_mod.all_rule(sided, alpha))
        else:
            raise InvalidParameterError(f"unknown rule kind {kind!r}")

    transform = doc.get("transform", {})
    return AnalysisConfig(
        bindings=bindings,
        model_kind=model.get("kind", BMMLR_MIXED),
        random_effects=tuple(model.get("random", ("intercept", "treatment"))),
        interactions=bool(doc.get("interactions", True)),
        coefficient_variance=float(prior.get("coefficient_variance", 10.0)),
        iw_scale_diag=float(prior.get("iw_scale", 0.1)),
        iw_df=prior.get("iw_df"),
        dirichlet_concentration=float(prior.get("dirichlet", 0.01)),
        mcmc=mcmc,
        subpopulations=tuple(subpops),
        rules=tuple(rules),
        transform_thin=int(transform.get("thin", 10)),
        counterfactual=bool(transform.get("counterfactual", True)),
    )


def _resolve_random_columns(config: AnalysisConfig, data: ClusteredDataset) -> tuple:
    cols = []
    names = {role.name: idx for idx, role in enumerate(data.roles)}
    for ref in config.random_effects:
        if isinstance(ref, int):
            cols.append(ref)
        elif ref in names:
            cols.append(names[ref])
        else:
            raise InvalidParameterError(f"unknown design column {ref!r}")
    return tuple(sorted(cols))


def build_model(config: AnalysisConfig, data: ClusteredDataset) -> ModelSpec:
    kind = config.model_kind
    if kind == BMMLR_MIXED:
        return mixed_effects_model(
            data.n_outcomes, data.n_columns, _resolve_random_columns(config, data)
        )
    if kind == BMMLR_RANDOM:
        return random_effects_model(data.n_outcomes, data.n_columns)
    if kind == BMLR:
        return single_level_model(data.n_outcomes, data.n_columns)
    if kind == BMB:
        return ModelSpec(BMB, data.n_outcomes)
    raise InvalidParameterError(f"unknown model kind {kind!r}")


@dataclass
class AnalysisResult:
    document: dict
    draws: dict  # subpopulation label -> EffectDraws


def _interval(values: np.ndarray, level: float = 0.95):
    lo, hi = np.quantile(values, [(1 - level) / 2, 1 - (1 - level) / 2])
    return [float(lo), float(hi)]


def analyze(
    config: AnalysisConfig,
    data: ClusteredDataset,
    workers: int = 1,
    seed: int | None = None,
) -> AnalysisResult:
    """Run the configured analysis on an ingested dataset."""
    mcmc = config.mcmc if seed is None else replace(config.mcmc, seed=seed)
    model = build_model(config, data)
    prior = default_priors(
        model,
        coefficient_variance=config.coefficient_variance,
        iw_scale_diag=config.iw_scale_diag,
        dirichlet_concentration=config.dirichlet_concentration,
    )
    if config.iw_df is not None:
        prior = replace(prior, iw_df=float(config.iw_df))
    design = build_response_design(data.n_outcomes)

    diagnostics_doc: dict = {"warnings": []}
    if model.kind == BMB:
        posterior = posterior_bmb(data, prior.dirichlet)
        n_draws = mcmc.chains * len(
            range(0, len(range(0, mcmc.iterations, mcmc.thin)), config.transform_thin)
        )
        draw_stream = np.random.default_rng(np.random.SeedSequence(mcmc.seed, spawn_key=(2,)))

        def effect_for(subpop):
            if subpop.kind == effects_mod.VALUE:
                raise InvalidParameterError(
                    "the conjugate count model cannot condition on a covariate value"
                )
            rows = None
            if subpop.kind == effects_mod.INTERVAL:
                rows = effects_mod.qualifying_mask(data, subpop)
            sub_posterior = posterior_bmb(data, prior.dirichlet, rows=rows)
            return effects_mod.bernoulli_effect_draws(sub_posterior, n_draws, draw_stream), rows

        diagnostics_doc["note"] = "closed-form conjugate posterior; no chains to diagnose"
        chains = None
    else:
        chains = fit(data, model, prior, mcmc, workers=workers)
        named = chains.parameter_chains()
        summaries = diag_mod.summarize(named)
        max_rhat = diag_mod.max_psrf(named)
        min_ess = min(s.ess for s in summaries.values())
        diagnostics_doc.update(
            {
                "max_psrf": round(float(max_rhat), 6),
                "min_ess": round(float(min_ess), 2),
                "parameters": {
                    name: {
                        "mean": round(s.mean, 6),
                        "sd": round(s.sd, 6),
                        "psrf": None if s.psrf is None else round(s.psrf, 6),
                        "ess": round(s.ess, 2),
                        "lag1_autocorr": round(s.lag1, 4),
                    }
                    for name, s in sorted(summaries.items())
                },
            }
        )
        if max_rhat > diag_mod.PSRF_ALARM:
            diagnostics_doc["warnings"].append(
                f"max split-R-hat {max_rhat:.3f} exceeds {diag_mod.PSRF_ALARM}; "
                "chains may not have converged"
            )

        def effect_for(subpop):
            draws = effects_mod.subpopulation_effect(
                chains,
                data,
                subpop,
                thin=config.transform_thin,
                counterfactual=config.counterfactual,
            )
            rows = (
                effects_mod.qualifying_mask(data, subpop)
                if subpop.kind != effects_mod.VALUE
                else None
            )
            return draws, rows

    subpop_docs = []
    draws_by_label = {}
    for subpop in config.subpopulations:
        draws, rows = effect_for(subpop)
        draws_by_label[subpop.label] = draws
        delta = draws.delta
        entry = {
            "name": subpop.label,
            "kind": subpop.kind,
            "delta_mean": [round(float(v), 6) for v in delta.mean(axis=0)],
            "delta_sd": [round(float(v), 6) for v in delta.std(axis=0, ddof=1)],
            "delta_ci95": [
                [round(v, 6) for v in _interval(delta[:, k])]
                for k in range(delta.shape[1])
            ],
            "n_draws": int(delta.shape[0]),
        }
        if rows is not None:
            entry["n_treated"] = int((data.treatment[rows] == 1).sum())
            entry["n_control"] = int((data.treatment[rows] == 0).sum())
        rule_docs = {}
        for rule in config.rules:
            outcome = decision_mod.decide(draws, rule, design.n_outcomes)
            doc = {
                "probabilities": [round(float(p), 6) for p in outcome.probabilities],
                "cutoff": round(outcome.cutoff, 6),
                "verdict": outcome.verdict,
                "sided": rule.sided,
                "alpha": rule.alpha,
            }
            if rule.kind == decision_mod.COMPENSATORY:
                comp = effects_mod.composite(delta, rule.weights)
                doc["weights"] = [round(float(w), 6) for w in rule.weights.weights]
                doc["composite_mean"] = round(float(comp.mean()), 6)
                doc["composite_ci95"] = [round(v, 6) for v in _interval(comp)]
            if rule.kind == decision_mod.SINGLE:
                doc["outcome"] = rule.outcome + 1
            rule_docs[rule.label] = doc
        entry["rules"] = rule_docs
        subpop_docs.append(entry)

    document = {
        "meta": {
            "package": "bmmlr",
            "version": __version__,
            "model": model.kind,
            "seed": mcmc.seed,
            "mcmc": {
                "iterations": mcmc.iterations,
                "burnin": mcmc.burnin,
                "chains": mcmc.chains,
                "thin": mcmc.thin,
            },
            "transform_thin": config.transform_thin,
            "counterfactual": config.counterfactual,
            "n_subjects": data.n_subjects,
            "n_clusters": data.n_clusters,
            "n_outcomes": data.n_outcomes,
        },
        "diagnostics": diagnostics_doc,
        "subpopulations": subpop_docs,
    }
    return AnalysisResult(document=document, draws=draws_by_label)
