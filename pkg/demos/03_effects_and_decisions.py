"""Subpopulation effects and superiority decisions.

One fit, three (sub)populations, four decision rules.  The conditional
effect on the covariate interval [-1, 0] is positive under this truth,
while the population average is null, so the same trial can be
inconclusive on average yet superior within the subpopulation.
"""

import numpy as np

import bmmlr

spec = bmmlr.ScenarioSpec(n_clusters=10, n_per_arm=60, replications=1, seed=21)
data = bmmlr.generate_dataset(spec, 0)
model = bmmlr.mixed_effects_model(data.n_outcomes, data.n_columns, (0, 1))
chains = bmmlr.fit(
    data, model, config=bmmlr.McmcConfig(iterations=4_000, burnin=1_000, chains=2, seed=2)
)

subpopulations = [
    bmmlr.full_population(name="whole population"),
    bmmlr.covariate_interval("w", -1.0, 0.0, name="below-average w"),
    bmmlr.covariate_value("w", -1.0, name="w = -1 exactly"),
]
rules = [
    bmmlr.any_rule(),
    bmmlr.all_rule(),
    bmmlr.compensatory_rule([0.5, 0.5]),
    bmmlr.single_rule(0),
]

for subpop in subpopulations:
    draws = bmmlr.subpopulation_effect(chains, data, subpop, thin=10)
    mean = draws.delta.mean(axis=0)
    comp = bmmlr.composite(draws.delta, bmmlr.CompositeWeights([0.5, 0.5])).mean()
    print(f"\n{subpop.name}: delta {mean.round(3)}, weighted composite {comp:+.3f}")
    for rule in rules:
        outcome = bmmlr.decide(draws, rule, data.n_outcomes)
        probs = np.round(outcome.probabilities, 3)
        print(f"  {rule.kind:13s} p={probs} cutoff={outcome.cutoff:.4f} -> {outcome.verdict}")
