"""Miniature decision error-rate study.

Twelve replications at a small size, just to show the machinery: per
replication the harness generates a clustered dataset under the known
truth, fits the requested models, transforms to pooled treatment
differences for each target (sub)population, applies each decision
rule, and tabulates superiority proportions with binomial standard
errors.  The desk preset (R=200, 10k+2k iterations) gives usable error
rates in hours; this demo uses toy settings and takes about a minute.
"""

import bmmlr
from bmmlr import ScenarioSpec
from bmmlr.simulate import run_scenario

spec = ScenarioSpec(
    n_clusters=6,
    n_per_arm=15,
    replications=12,
    seed=5,
    label="demo",
    mcmc=bmmlr.McmcConfig(iterations=1_500, burnin=300, chains=2, seed=0),
    transform_thin=5,
)

table = run_scenario(spec, workers=2)
print(table.to_csv())
print("replications:", table.n_replications, "excluded:", table.excluded)

truth = bmmlr.mc_true_effects(spec, bmmlr.stream(1), n_samples=200_000)
for effect, target in truth.items():
    print(f"true pooled difference ({effect}): {target.round(3)}")
