"""Chain health: scale reduction, effective sample size, autocorrelation.

Random-effect parameters mix slowest in multilevel logistic models;
the summary makes that visible and the max split-R-hat is the one
number to watch (alarm above 1.1).
"""

import bmmlr
from bmmlr.diagnostics import PSRF_ALARM

spec = bmmlr.ScenarioSpec(n_clusters=6, n_per_arm=30, replications=1, seed=31)
data = bmmlr.generate_dataset(spec, 0)
model = bmmlr.mixed_effects_model(data.n_outcomes, data.n_columns, (0, 1))
chains = bmmlr.fit(
    data, model, config=bmmlr.McmcConfig(iterations=4_000, burnin=1_000, chains=2, seed=7)
)

named = chains.parameter_chains()
summaries = bmmlr.summarize(named)

print(f"{'parameter':24s} {'mean':>8s} {'sd':>7s} {'R-hat':>7s} {'ESS':>8s} {'lag-1':>6s}")
for name, s in sorted(summaries.items()):
    print(
        f"{name:24s} {s.mean:8.3f} {s.sd:7.3f} {s.psrf:7.3f} {s.ess:8.0f} {s.lag1:6.2f}"
    )

worst = bmmlr.max_psrf(named)
status = "ok" if worst < PSRF_ALARM else "NOT CONVERGED"
print(f"\nmax split-R-hat: {worst:.4f} ({status}); thinning by 10 keeps "
      f"{bmmlr.thin(next(iter(named.values())), 10).shape[1]} draws per chain")
