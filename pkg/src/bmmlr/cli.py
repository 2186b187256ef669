"""Command-line interface.

Subcommands: ``analyze`` (fit -> transform -> decide -> diagnose on a
CSV), ``simulate`` (error-rate study), ``diagnose`` (re-emit the
diagnostics of a stored result).  Exit codes: 0 success, 1 usage or
configuration error, 2 data error, 3 chain divergence.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from . import decision as decision_mod
from . import effects as effects_mod
from .analysis import analyze as run_analysis
from .analysis import config_from_dict
from .exceptions import BmmlrError, ChainDivergenceError, DataError
from .inference import McmcConfig
from .io import ingest_csv, load_yaml, write_draws_csv, write_json
from .simulate import ScenarioSpec, desk_mcmc, paper_mcmc, run_scenario

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGENCE = 3


@click.group()
def cli():
    """Multilevel multivariate logistic treatment-effect analysis."""


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path(), help="input CSV")
@click.option("--config", "config_path", required=True, type=click.Path(), help="analysis YAML")
@click.option("--out", "out_path", required=True, type=click.Path(), help="result JSON path")
@click.option("--seed", type=int, default=None, help="override the configured seed")
@click.option("--workers", type=int, default=os.cpu_count, help="max parallel workers")
@click.option("--draws-csv", type=click.Path(), default=None, help="also write draw-level deltas")
@click.option("--draws-limit", type=int, default=None, help="cap rows per subpopulation in --draws-csv")
def analyze(data_path, config_path, out_path, seed, workers, draws_csv, draws_limit):
    """Fit, transform, decide and diagnose one dataset."""
    config = config_from_dict(load_yaml(config_path))
    dataset, report = ingest_csv(data_path, config.bindings, config.interactions)
    result = run_analysis(config, dataset, workers=workers, seed=seed)
    result.document["meta"]["data"] = {
        "path": os.path.basename(data_path),
        "rows_read": report.n_rows,
        "rows_kept": report.n_kept,
        "rows_dropped": list(report.dropped_rows),
    }
    write_json(result.document, out_path)
    if draws_csv:
        write_draws_csv(result.draws, draws_csv, limit=draws_limit)
    for warning in result.document["diagnostics"].get("warnings", []):
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"wrote {out_path}")


def _scenario_from_dict(doc: dict, preset: str, seed: int | None) -> ScenarioSpec:
    mcmc = desk_mcmc() if preset == "desk" else paper_mcmc()
    if "mcmc" in doc:
        mcmc = McmcConfig(**{**mcmc.__dict__, **doc["mcmc"]})
    effects = []
    for item in doc.get("effects", [{"kind": "full", "name": "ate"}]):
        kind = item.get("kind", "full")
        if kind == "full":
            effects.append(effects_mod.full_population(name=item.get("name", "ate")))
        elif kind == "interval":
            effects.append(
                effects_mod.covariate_interval(
                    item.get("covariate", "w"),
                    item.get("lower", -np.inf),
                    item.get("upper", np.inf),
                    name=item.get("name", ""),
                )
            )
        else:
            effects.append(
                effects_mod.covariate_value(
                    item.get("covariate", "w"), item["value"], name=item.get("name", "")
                )
            )
    rules = []
    for item in doc.get(
        "rules",
        [{"kind": "any"}, {"kind": "all"}, {"kind": "compensatory", "weights": [0.5, 0.5]}],
    ):
        kind = item["kind"]
        sided = item.get("sided", "right")
        alpha = float(item.get("alpha", 0.05))
        if kind == "compensatory":
            rules.append(decision_mod.compensatory_rule(item["weights"], sided, alpha))
        elif kind == "single":
            rules.append(decision_mod.single_rule(int(item["outcome"]) - 1, sided, alpha))
        elif kind == "any":
            rules.append(decision_mod.any_rule(sided, alpha))
        elif kind == "all":
            rules.append(decision_mod.all_rule(sided, alpha))
        else:
            raise DataError(f"unknown rule kind {kind!r} in scenario")
    kwargs = dict(
        n_clusters=int(doc["n_clusters"]),
        n_per_arm=int(doc["n_per_arm"]),
        replications=int(doc["replications"]),
        seed=int(doc.get("seed", 0)) if seed is None else seed,
        label=doc.get("label", ""),
        mcmc=mcmc,
        effects=tuple(effects),
        rules=tuple(rules),
        transform_thin=int(doc.get("transform_thin", 10)),
    )
    if "fitters" in doc:
        kwargs["fitters"] = tuple(doc["fitters"])
    if "true_coefficients" in doc:
        kwargs["true_coefficients"] = np.asarray(doc["true_coefficients"], dtype=float)
    if "random_effect_cov" in doc:
        kwargs["random_effect_cov"] = np.asarray(doc["random_effect_cov"], dtype=float)
    return ScenarioSpec(**kwargs)


@cli.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path(), help="scenario YAML")
@click.option("--out", "out_prefix", required=True, type=click.Path(), help="output prefix (.csv/.json added)")
@click.option("--seed", type=int, default=None, help="override the scenario seed")
@click.option("--workers", type=int, default=os.cpu_count, help="max parallel workers")
@click.option("--preset", type=click.Choice(["desk", "paper"]), default="desk", show_default=True)
def simulate(scenario_path, out_prefix, seed, workers, preset):
    """Run a decision error-rate scenario and emit its table."""
    spec = _scenario_from_dict(load_yaml(scenario_path), preset, seed)
    table = run_scenario(spec, workers=workers)
    table.to_csv(out_prefix + ".csv")
    table.to_json(out_prefix + ".json")
    click.echo(f"wrote {out_prefix}.csv and {out_prefix}.json")


@cli.command()
@click.option("--result", "result_path", required=True, type=click.Path(), help="analysis result JSON")
def diagnose(result_path):
    """Re-emit the diagnostics block of a stored analysis result."""
    import json

    if not os.path.exists(result_path):
        raise DataError(f"result file not found: {result_path}")
    with open(result_path) as handle:
        doc = json.load(handle)
    if "diagnostics" not in doc:
        raise DataError(f"{result_path} does not look like an analysis result")
    click.echo(write_json(doc["diagnostics"]))
    for warning in doc["diagnostics"].get("warnings", []):
        click.echo(f"warning: {warning}", err=True)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.UsageError as err:
        err.show()
        return EXIT_USAGE
    except click.ClickException as err:
        err.show()
        return EXIT_USAGE
    except ChainDivergenceError as err:
        click.echo(f"error: {err}", err=True)
        return EXIT_DIVERGENCE
    except DataError as err:
        click.echo(f"error: {err}", err=True)
        return EXIT_DATA
    except BmmlrError as err:
        click.echo(f"error: {err}", err=True)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
