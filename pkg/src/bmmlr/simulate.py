"""Decision error-rate study: clustered data generation under a known
truth, repeated fitting, and tabulation of superiority proportions.

The default truth is a heterogeneous treatment effect on two negatively
correlated binary outcomes with one standard-normal covariate: the
average treatment difference over the whole population is (0, 0) (a
Type I error scenario for compensatory/any decisions), while the
conditional difference on the covariate interval [-1, 0] is about
(0.116, 0.069) (a power scenario).  Cluster heterogeneity enters
through random intercept and treatment effects with covariance
0.1 * I per category.

Replications are independent work items: each derives its own random
streams from the master seed and its index, so results are bit-identical
for any worker count, and aggregation is order-independent.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import decision as decision_mod
from . import effects as effects_mod
from .data import ClusteredDataset, build_dataset
from .exceptions import ChainDivergenceError, InvalidParameterError
from .inference import (
    BMB,
    BMLR,
    BMMLR_MIXED,
    BMMLR_RANDOM,
    McmcConfig,
    ModelSpec,
    default_priors,
    fit,
    mixed_effects_model,
    posterior_bmb,
    random_effects_model,
    single_level_model,
)
from .mvb import build_response_design, multinomial_logistic
from .samplers import sample_categories

# Coefficients used for data generation, rows = (intercept, treatment,
# covariate, covariate x treatment), columns = the three free joint
# categories.  Zero treatment row makes the population-average effect
# zero; the interaction flips the covariate effect in the treated arm.
DEFAULT_TRUE_COEFFICIENTS = np.array(
    [
        [0.000, 0.433, 0.433],
        [0.000, 0.000, 0.000],
        [1.027, 0.601, 0.427],
        [-2.055, -1.201, -0.854],
    ]
)

#: random intercept / treatment-effect covariance per category
DEFAULT_RANDOM_EFFECT_COV = 0.1 * np.eye(2)

FITTER_LABELS = {
    BMMLR_MIXED: "BMMLR",
    BMMLR_RANDOM: "BMMLR-RE",
    BMLR: "BMLR",
    BMB: "BMB",
}


def desk_mcmc(seed: int = 0) -> McmcConfig:
    """Reduced-scale chain settings usable on a workstation."""
    return McmcConfig(iterations=10_000, burnin=2_000, chains=2, thin=1, seed=seed)


def paper_mcmc(seed: int = 0) -> McmcConfig:
    """Full-scale chain settings of the original error-rate study."""
    return McmcConfig(iterations=50_000, burnin=10_000, chains=2, thin=1, seed=seed)


def default_effects() -> tuple:
    return (
        effects_mod.full_population(name="ate"),
        effects_mod.covariate_interval("w", -1.0, 0.0, name="cate"),
    )


def default_rules() -> tuple:
    return (
        decision_mod.any_rule(),
        decision_mod.all_rule(),
        decision_mod.compensatory_rule([0.5, 0.5]),
    )


@dataclass(frozen=True)
class ScenarioSpec:
    """One cell of the error-rate study."""

    n_clusters: int
    n_per_arm: int
    replications: int
    seed: int = 0
    label: str = ""
    true_coefficients: np.ndarray = field(default_factory=lambda: DEFAULT_TRUE_COEFFICIENTS.copy())
    random_effect_cov: np.ndarray = field(default_factory=lambda: DEFAULT_RANDOM_EFFECT_COV.copy())
    fitters: tuple = (BMMLR_MIXED, BMLR, BMB)
    effects: tuple = field(default_factory=default_effects)
    rules: tuple = field(default_factory=default_rules)
    mcmc: McmcConfig = field(default_factory=desk_mcmc)
    transform_thin: int = 10
    exclusion_limit: float = 0.01

    def __post_init__(self):
        if self.replications < 1:
            raise InvalidParameterError("need at least one replication")
        if self.n_clusters < 1 or self.n_per_arm < 1:
            raise InvalidParameterError("cluster count and per-arm size must be >= 1")

    @property
    def scenario_label(self) -> str:
        return self.label or f"J={self.n_clusters},n={self.n_per_arm}"


def generate_dataset(spec: ScenarioSpec, replication: int, stream=None) -> ClusteredDataset:
    """One synthetic clustered trial under the scenario truth.

    Per cluster, each free category gets its own random intercept and
    treatment deviation; each arm receives ``n_per_arm`` subjects with a
    standard-normal covariate; outcomes are drawn from the joint
    category probabilities implied by the linear predictor.  Without an
    explicit stream, draws derive from (spec.seed, replication), so the
    same pair always yields the same dataset.
    """
    if stream is None:
        stream = np.random.default_rng(
            np.random.SeedSequence(spec.seed, spawn_key=(replication, 1_000_000))
        )
    coef = np.asarray(spec.true_coefficients, dtype=float)
    q_free = coef.shape[1]
    j = spec.n_clusters
    n = 2 * spec.n_per_arm * j
    cov = np.asarray(spec.random_effect_cov, dtype=float)
    # (J, q_free, 2): per-cluster deviations for (intercept, treatment);
    # an all-zero covariance (degenerate, for testing) disables them
    if np.any(cov):
        u = stream.standard_normal((j, q_free, 2)) @ np.linalg.cholesky(cov).T
    else:
        u = np.zeros((j, q_free, 2))
    covariate = stream.standard_normal(n)

    per_cluster = 2 * spec.n_per_arm
    cluster = np.repeat(np.arange(j), per_cluster)
    treatment = np.tile(
        np.concatenate([np.ones(spec.n_per_arm), np.zeros(spec.n_per_arm)]), j
    ).astype(np.int8)

    intercept = coef[0][None, :] + u[cluster, :, 0]
    trt_slope = coef[1][None, :] + u[cluster, :, 1]
    t = treatment[:, None].astype(float)
    w = covariate[:, None]
    psi = intercept + trt_slope * t + coef[2][None, :] * w + coef[3][None, :] * (w * t)
    phi = multinomial_logistic(psi)
    design = build_response_design(int(np.log2(q_free + 1)))
    codes = sample_categories(phi, stream)
    outcomes = design.patterns[codes]
    return build_dataset(cluster, treatment, covariate, outcomes, covariate_names=["w"])


def mc_true_effects(
    spec: ScenarioSpec, stream, n_samples: int = 1_000_000
) -> dict[str, np.ndarray]:
    """Monte Carlo oracle for the scenario's true pooled effects.

    Integrates the treatment difference over the covariate and
    random-effect distributions; the superpopulation limit of the
    cluster-size-weighted pooled estimand.
    """
    coef = np.asarray(spec.true_coefficients, dtype=float)
    q_free = coef.shape[1]
    design = build_response_design(int(np.log2(q_free + 1)))
    h = design.patterns.astype(float)
    cov = np.asarray(spec.random_effect_cov, dtype=float)
    if np.any(cov):
        u = stream.standard_normal((n_samples, q_free, 2)) @ np.linalg.cholesky(cov).T
    else:
        u = np.zeros((n_samples, q_free, 2))
    w = stream.standard_normal(n_samples)

    def theta(arm: int, w_vals: np.ndarray, u_vals: np.ndarray) -> np.ndarray:
        wv = w_vals[:, None]
        psi = (
            coef[0][None, :]
            + u_vals[:, :, 0]
            + (coef[1][None, :] + u_vals[:, :, 1]) * arm
            + coef[2][None, :] * wv
            + coef[3][None, :] * (wv * arm)
        )
        return multinomial_logistic(psi) @ h

    delta = theta(1, w, u) - theta(0, w, u)
    out = {}
    for subpop in spec.effects:
        if subpop.kind == effects_mod.FULL_POPULATION:
            out[subpop.label] = delta.mean(axis=0)
        elif subpop.kind == effects_mod.INTERVAL:
            mask = (w >= subpop.lower) & (w <= subpop.upper)
            out[subpop.label] = delta[mask].mean(axis=0)
        else:
            wv = np.full(n_samples, subpop.value)
            out[subpop.label] = (theta(1, wv, u) - theta(0, wv, u)).mean(axis=0)
    return out


def _fit_seed(master: int, replication: int, fitter_index: int) -> int:
    return int(
        np.random.SeedSequence(master, spawn_key=(replication, fitter_index)).generate_state(1)[0]
    )


def _model_for(kind: str, data: ClusteredDataset) -> ModelSpec:
    if kind == BMMLR_MIXED:
        return mixed_effects_model(data.n_outcomes, data.n_columns, random_columns=(0, 1))
    if kind == BMMLR_RANDOM:
        return random_effects_model(data.n_outcomes, data.n_columns)
    if kind == BMLR:
        return single_level_model(data.n_outcomes, data.n_columns)
    return ModelSpec(BMB, data.n_outcomes)


def _effect_draw_count(spec: ScenarioSpec) -> int:
    stored = len(range(0, spec.mcmc.iterations, spec.mcmc.thin))
    return spec.mcmc.chains * len(range(0, stored, spec.transform_thin))


def run_replication(spec: ScenarioSpec, replication: int) -> dict:
    """Generate, fit, transform and decide for one replication index."""
    data = generate_dataset(spec, replication)
    design = build_response_design(data.n_outcomes)
    result = {"replication": replication, "fitters": {}}
    for fidx, kind in enumerate(spec.fitters):
        label = FITTER_LABELS.get(kind, kind)
        entry = {"excluded": False, "error": None, "effects": {}}
        result["fitters"][label] = entry
        model = _model_for(kind, data)
        try:
            if kind == BMB:
                prior = default_priors(model)
                for subpop in spec.effects:
                    if subpop.kind == effects_mod.VALUE:
                        continue  # count-based model cannot condition on a value
                    rows = None
                    if subpop.kind == effects_mod.INTERVAL:
                        rows = effects_mod.qualifying_mask(data, subpop)
                    posterior = posterior_bmb(data, prior.dirichlet, rows=rows)
                    rng = np.random.default_rng(
                        np.random.SeedSequence(spec.seed, spawn_key=(replication, 2, fidx))
                    )
                    draws = effects_mod.bernoulli_effect_draws(
                        posterior, _effect_draw_count(spec), rng
                    )
                    entry["effects"][subpop.label] = _decide_all(draws, spec, design)
            else:
                config = replace(spec.mcmc, seed=_fit_seed(spec.seed, replication, fidx))
                chains = fit(data, model, default_priors(model), config)
                for subpop in spec.effects:
                    draws = effects_mod.subpopulation_effect(
                        chains, data, subpop, thin=spec.transform_thin
                    )
                    entry["effects"][subpop.label] = _decide_all(draws, spec, design)
        except ChainDivergenceError as err:
            entry["excluded"] = True
            entry["error"] = str(err)
    return result


def _decide_all(draws, spec: ScenarioSpec, design) -> dict:
    rules = {}
    for rule in spec.rules:
        outcome = decision_mod.decide(draws, rule, design.n_outcomes)
        rules[rule.label] = {
            "superior": bool(outcome.superiority),
            "verdict": outcome.verdict,
        }
    return {"delta": draws.delta.mean(axis=0).tolist(), "rules": rules}


@dataclass
class ErrorRateTable:
    """Superiority proportions with binomial standard errors.

    ``rows`` carry exactly the columns (scenario, fitter, rule, effect,
    p, se, n_excluded); ``estimates`` holds per-replication posterior
    mean differences keyed fitter -> effect (NaN rows for exclusions).
    """

    rows: list
    estimates: dict
    n_replications: int
    excluded: dict

    COLUMNS = ("scenario", "fitter", "rule", "effect", "p", "se", "n_excluded")

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as handle:
                handle.write(text)
        return text

    def to_json(self, path=None) -> str:
        doc = {
            "rows": self.rows,
            "n_replications": self.n_replications,
            "excluded": self.excluded,
            "estimates": {
                fitter: {eff: arr.tolist() for eff, arr in per.items()}
                for fitter, per in self.estimates.items()
            },
        }
        text = json.dumps(doc, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as handle:
                handle.write(text)
        return text


def run_scenario(spec: ScenarioSpec, workers: int = 1) -> ErrorRateTable:
    """Execute all replications (optionally in a process pool) and tabulate."""
    reps = list(range(spec.replications))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_replication, [spec] * len(reps), reps))
    else:
        results = [run_replication(spec, r) for r in reps]
    results.sort(key=lambda r: r["replication"])
    return tabulate(spec, results)


def tabulate(spec: ScenarioSpec, results: list) -> ErrorRateTable:
    scenario = spec.scenario_label
    rows = []
    estimates: dict = {}
    excluded: dict = {}
    r_total = spec.replications
    for kind in spec.fitters:
        label = FITTER_LABELS.get(kind, kind)
        n_excl = sum(1 for res in results if res["fitters"][label]["excluded"])
        excluded[label] = n_excl
        if n_excl > spec.exclusion_limit * r_total:
            raise ChainDivergenceError(
                f"{label}: {n_excl}/{r_total} replications excluded, above the "
                f"{spec.exclusion_limit:.0%} limit"
            )
        est_per_effect: dict = {}
        estimates[label] = est_per_effect
        for subpop in spec.effects:
            eff = subpop.label
            per_rep = []
            for res in results:
                entry = res["fitters"][label]
                if entry["excluded"] or eff not in entry["effects"]:
                    per_rep.append(None)
                else:
                    per_rep.append(entry["effects"][eff])
            if all(v is None for v in per_rep):
                continue
            k = len(next(v for v in per_rep if v is not None)["delta"])
            est = np.full((r_total, k), np.nan)
            for r, v in enumerate(per_rep):
                if v is not None:
                    est[r] = v["delta"]
            est_per_effect[eff] = est
            for rule in spec.rules:
                indicators = [
                    v["rules"][rule.label]["superior"] for v in per_rep if v is not None
                ]
                n_inc = len(indicators)
                p = float(np.mean(indicators)) if n_inc else float("nan")
                se = float(np.sqrt(p * (1.0 - p) / n_inc)) if n_inc else float("nan")
                rows.append(
                    {
                        "scenario": scenario,
                        "fitter": label,
                        "rule": rule.label,
                        "effect": eff,
                        "p": round(p, 10),
                        "se": round(se, 10),
                        "n_excluded": r_total - n_inc,
                    }
                )
    return ErrorRateTable(
        rows=rows, estimates=estimates, n_replications=r_total, excluded=excluded
    )
