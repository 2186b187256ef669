"""CSV ingestion and configuration files.

The data file is a plain CSV with a header row; column bindings name
the cluster-id column, the treatment column, the binary outcome
columns, and any covariate columns.  Rows with missing values in bound
columns are dropped and reported; malformed values fail loudly with
their row number (the header is row 1).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np
import yaml

from .data import ClusteredDataset, build_dataset
from .exceptions import DataError


@dataclass(frozen=True)
class ColumnBindings:
    cluster: str
    treatment: str
    outcomes: tuple
    covariates: tuple = ()

    def __post_init__(self):
        if not self.outcomes:
            raise DataError("at least one outcome column must be bound")


@dataclass(frozen=True)
class IngestReport:
    n_rows: int
    n_kept: int
    dropped_rows: tuple  # row numbers dropped for missing values


def _parse_binary(value: str, column: str, row_number: int) -> int:
    v = value.strip()
    if v in ("0", "1"):
        return int(v)
    raise DataError(
        f"column {column!r} must be 0/1 but row {row_number} has {value!r}"
    )


def _parse_float(value: str, column: str, row_number: int) -> float:
    try:
        out = float(value)
    except ValueError:
        raise DataError(
            f"column {column!r} must be numeric but row {row_number} has {value!r}"
        ) from None
    if not np.isfinite(out):
        raise DataError(f"column {column!r} has non-finite value in row {row_number}")
    return out


def ingest_csv(path, bindings: ColumnBindings, interactions: bool = True):
    """Read a clustered-trial CSV into a dataset.

    Returns ``(dataset, report)``.  Cluster ids become contiguous
    indices in order of first appearance (original labels are kept on
    the dataset).  Single-subject clusters are fine.
    """
    if not os.path.exists(path):
        raise DataError(f"data file not found: {path}")
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise DataError(f"{path} is empty (no header row)")
        needed = [bindings.cluster, bindings.treatment, *bindings.outcomes, *bindings.covariates]
        missing = [c for c in needed if c not in reader.fieldnames]
        if missing:
            raise DataError(f"missing column(s) {missing} in {path}")

        clusters, treatment, outcomes, covariates, dropped = [], [], [], [], []
        n_rows = 0
        for row_number, row in enumerate(reader, start=2):
            n_rows += 1
            values = [row.get(c) for c in needed]
            if any(v is None or str(v).strip() == "" for v in values):
                dropped.append(row_number)
                continue
            clusters.append(row[bindings.cluster].strip())
            treatment.append(_parse_binary(row[bindings.treatment], bindings.treatment, row_number))
            outcomes.append(
                [_parse_binary(row[c], c, row_number) for c in bindings.outcomes]
            )
            covariates.append(
                [_parse_float(row[c], c, row_number) for c in bindings.covariates]
            )
    if not clusters:
        raise DataError(f"{path} contains no usable data rows")
    covariate_matrix = (
        np.asarray(covariates, dtype=float)
        if bindings.covariates
        else np.empty((len(clusters), 0))
    )
    dataset = build_dataset(
        clusters,
        np.asarray(treatment),
        covariate_matrix,
        np.asarray(outcomes),
        covariate_names=list(bindings.covariates),
        interactions=interactions and bool(bindings.covariates),
    )
    report = IngestReport(n_rows=n_rows, n_kept=len(clusters), dropped_rows=tuple(dropped))
    return dataset, report


def export_csv(dataset: ClusteredDataset, bindings: ColumnBindings, path) -> None:
    """Write retained rows back out (inverse of `ingest_csv` for kept rows)."""
    header = [bindings.cluster, bindings.treatment, *bindings.outcomes, *bindings.covariates]
    cov_cols = [dataset.covariate_column(name) for name in bindings.covariates]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for i in range(dataset.n_subjects):
            row = [dataset.cluster_labels[dataset.cluster[i]], int(dataset.treatment[i])]
            row += [int(v) for v in dataset.outcomes[i]]
            row += [repr(float(dataset.x[i, c])) for c in cov_cols]
            writer.writerow(row)


def load_yaml(path) -> dict:
    if not os.path.exists(path):
        raise DataError(f"config file not found: {path}")
    with open(path) as handle:
        doc = yaml.safe_load(handle)
    if not isinstance(doc, dict):
        raise DataError(f"{path} must contain a mapping at the top level")
    return doc


def write_json(document: dict, path=None) -> str:
    """Canonical JSON serialization: sorted keys, stable float repr."""
    text = json.dumps(document, indent=2, sort_keys=True, allow_nan=True)
    if path is not None:
        with open(path, "w") as handle:
            handle.write(text)
            handle.write("\n")
    return text


def write_draws_csv(draws_by_subpopulation: dict, path, limit: int | None = None) -> None:
    """Long-format draw-level treatment differences (plot-ready)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["subpopulation", "draw", "outcome", "delta"])
        for label, draws in draws_by_subpopulation.items():
            delta = draws.delta
            n = delta.shape[0] if limit is None else min(limit, delta.shape[0])
            for l in range(n):
                for k in range(delta.shape[1]):
                    writer.writerow([label, l, k + 1, repr(float(delta[l, k]))])
