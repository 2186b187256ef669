"""Clustered trial data: subjects nested in clusters.

A dataset carries, per subject, a treatment arm indicator, a covariate
row (intercept first), and K binary outcomes.  Rows are stored sorted
by cluster with a pointer array, which is what the Gibbs kernels
consume.  Column roles record how the design matrix was built from the
raw covariates so that treatment can be overridden counterfactually
(including its interaction columns) when computing subpopulation
effects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError, DimensionError

INTERCEPT = "intercept"
TREATMENT = "treatment"
COVARIATE = "covariate"
INTERACTION = "interaction"


@dataclass(frozen=True)
class ColumnRole:
    """Role of one design-matrix column."""

    kind: str
    name: str
    covariate_column: int | None = None  # for interactions: base column index


@dataclass(frozen=True)
class ClusteredDataset:
    outcomes: np.ndarray = field(repr=False)  # (N, K) 0/1
    x: np.ndarray = field(repr=False)  # (N, P), column 0 all ones
    treatment: np.ndarray = field(repr=False)  # (N,) 0/1
    cluster: np.ndarray = field(repr=False)  # (N,) contiguous, sorted ascending
    cluster_ptr: np.ndarray = field(repr=False)  # (J+1,)
    roles: tuple[ColumnRole, ...]
    cluster_labels: tuple = ()

    @property
    def n_subjects(self) -> int:
        return self.x.shape[0]

    @property
    def n_clusters(self) -> int:
        return self.cluster_ptr.shape[0] - 1

    @property
    def n_outcomes(self) -> int:
        return self.outcomes.shape[1]

    @property
    def n_columns(self) -> int:
        return self.x.shape[1]

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.diff(self.cluster_ptr)

    @property
    def treatment_column(self) -> int:
        for idx, role in enumerate(self.roles):
            if role.kind == TREATMENT:
                return idx
        raise DimensionError("dataset has no treatment column")

    def counterfactual_x(self, arm: int, rows=None) -> np.ndarray:
        """Design matrix with the treatment (and its interactions) set to ``arm``."""
        out = self.x[rows].copy() if rows is not None else self.x.copy()
        for idx, role in enumerate(self.roles):
            if role.kind == TREATMENT:
                out[:, idx] = arm
            elif role.kind == INTERACTION:
                out[:, idx] = out[:, role.covariate_column] * arm
        return out

    def covariate_column(self, name_or_index) -> int:
        """Resolve a covariate reference (name or design-column index)."""
        if isinstance(name_or_index, str):
            for idx, role in enumerate(self.roles):
                if role.kind == COVARIATE and role.name == name_or_index:
                    return idx
            raise DimensionError(f"no covariate named {name_or_index!r}")
        idx = int(name_or_index)
        if not (0 <= idx < len(self.roles)) or self.roles[idx].kind != COVARIATE:
            raise DimensionError(f"column {idx} is not a covariate column")
        return idx


def build_dataset(
    cluster_ids,
    treatment,
    covariates,
    outcomes,
    covariate_names=None,
    interactions: bool = True,
) -> ClusteredDataset:
    """Assemble a `ClusteredDataset` from raw columns.

    The design matrix is built as ``[1, T, covariates..., covariates x T...]``
    (interaction columns only when ``interactions`` is true).  Cluster
    ids may be arbitrary hashables; they are re-indexed contiguously in
    order of first appearance and rows are sorted by cluster.
    """
    treatment = np.asarray(treatment)
    outcomes = np.atleast_2d(np.asarray(outcomes))
    covariates = np.asarray(covariates, dtype=float)
    if covariates.ndim == 1:
        covariates = covariates[:, None]
    n = treatment.shape[0]
    if outcomes.shape[0] != n or covariates.shape[0] != n or len(cluster_ids) != n:
        raise DimensionError("cluster_ids, treatment, covariates and outcomes must align")
    if n == 0:
        raise DataError("dataset is empty")
    if not np.isin(treatment, (0, 1)).all():
        raise DataError("treatment indicator must be 0/1")
    if not np.isin(outcomes, (0, 1)).all():
        raise DataError("outcomes must be 0/1")
    if not np.isfinite(covariates).all():
        raise DataError("covariates must be finite")

    labels: list = []
    index_of = {}
    cluster = np.empty(n, dtype=np.int64)
    for i, cid in enumerate(cluster_ids):
        if cid not in index_of:
            index_of[cid] = len(labels)
            labels.append(cid)
        cluster[i] = index_of[cid]

    order = np.argsort(cluster, kind="stable")
    cluster = cluster[order]
    treatment = treatment[order].astype(np.int8)
    covariates = covariates[order]
    outcomes = outcomes[order].astype(np.int8)

    n_clusters = len(labels)
    counts = np.bincount(cluster, minlength=n_clusters)
    cluster_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    if covariate_names is None:
        covariate_names = [f"x{i + 1}" for i in range(covariates.shape[1])]
    if len(covariate_names) != covariates.shape[1]:
        raise DimensionError("covariate_names does not match covariate count")

    cols = [np.ones(n), treatment.astype(float)]
    roles = [ColumnRole(INTERCEPT, "intercept"), ColumnRole(TREATMENT, "treatment")]
    for j, name in enumerate(covariate_names):
        cols.append(covariates[:, j])
        roles.append(ColumnRole(COVARIATE, name))
    if interactions:
        for j, name in enumerate(covariate_names):
            cols.append(covariates[:, j] * treatment)
            roles.append(ColumnRole(INTERACTION, f"{name}:treatment", covariate_column=2 + j))
    x = np.column_stack(cols)

    return ClusteredDataset(
        outcomes=outcomes,
        x=np.ascontiguousarray(x),
        treatment=treatment,
        cluster=cluster,
        cluster_ptr=cluster_ptr,
        roles=tuple(roles),
        cluster_labels=tuple(labels),
    )
