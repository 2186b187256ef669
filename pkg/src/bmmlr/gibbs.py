"""Polya-Gamma-augmented Gibbs updates for multinomial logistic models.

One engine covers the three regression variants: coefficients are split
into a cluster-varying block (columns in ``ModelSpec.random_columns``)
and a shared block (``fixed_columns``); either block may be empty.  Per
category q (reference category fixed at zero and never stored) one
sweep runs, in order:

    [shared coefficients]  ->  coefficient means  ->  random-effect
    covariance  ->  cluster coefficients  ->  Polya-Gamma variables

skipping the blocks a model does not have.  Every step conditions on
the current value of all other blocks.

The augmentation turns the category-q likelihood into a Gaussian in the
working variable kappa = (indicator - 1/2) / omega with precision
diag(omega), after offsetting the linear predictor by the
cross-category term C = log(sum_{m != q} exp(psi_m)), where the sum
runs over every other category including the reference's exp(0) = 1.
The updates never materialize kappa or a dense Omega: products
Omega @ (kappa + offset) reduce to (indicator - 1/2) + omega * offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import ClusteredDataset
from .exceptions import (
    ChainDivergenceError,
    DimensionError,
    InvalidParameterError,
    NotSPDError,
)
from .mvb import encode_outcomes


@dataclass(frozen=True)
class GibbsProblem:
    """Immutable per-fit arrays: data views, encoded outcomes, priors."""

    x_random: np.ndarray  # (N, PR), PR may be 0
    x_fixed: np.ndarray  # (N, PF), PF may be 0
    cluster: np.ndarray  # (N,)
    cluster_ptr: np.ndarray  # (J+1,)
    kappa_num: np.ndarray  # (Qm1, N): indicator(y == h^q) - 1/2
    coef_mean_shift: np.ndarray  # (Qm1, PR): G^q @ g^q
    coef_precision: np.ndarray  # (Qm1, PR, PR)
    fixed_shift: np.ndarray  # (Qm1, PF): B^q @ b^q
    fixed_precision: np.ndarray  # (Qm1, PF, PF)
    iw_df: float
    iw_scale: np.ndarray  # (Qm1, PR, PR)

    @property
    def n_subjects(self) -> int:
        return self.kappa_num.shape[1]

    @property
    def n_free_categories(self) -> int:
        return self.kappa_num.shape[0]

    @property
    def n_clusters(self) -> int:
        return self.cluster_ptr.shape[0] - 1


@dataclass
class GibbsState:
    """Mutable chain state for categories 1..Q-1."""

    gamma_j: np.ndarray  # (Qm1, J, PR)
    gamma: np.ndarray  # (Qm1, PR)
    sigma: np.ndarray  # (Qm1, PR, PR)
    beta: np.ndarray  # (Qm1, PF)
    omega: np.ndarray  # (Qm1, N)
    psi: np.ndarray  # (Qm1, N) current linear predictors

    def small_blocks_finite(self) -> bool:
        return (
            np.isfinite(self.gamma_j).all()
            and np.isfinite(self.gamma).all()
            and np.isfinite(self.sigma).all()
            and np.isfinite(self.beta).all()
        )


class _Workspace:
    """Preallocated per-chain scratch arrays (length N each)."""

    def __init__(self, n: int):
        self.cross = np.empty(n)
        self.offset = np.zeros(n)
        self.resid = np.empty(n)
        self.eta = np.empty(n)


def build_problem(data: ClusteredDataset, model, prior) -> GibbsProblem:
    from .mvb import build_response_design

    design = build_response_design(model.n_outcomes)
    if data.n_outcomes != model.n_outcomes:
        raise DimensionError(
            f"model expects {model.n_outcomes} outcomes, data has {data.n_outcomes}"
        )
    codes = encode_outcomes(data.outcomes, design)
    q_free = design.n_categories - 1
    kappa_num = np.empty((q_free, data.n_subjects))
    for q in range(q_free):
        kappa_num[q] = (codes == q) - 0.5

    pr = len(model.random_columns)
    pf = len(model.fixed_columns)
    x_random = np.ascontiguousarray(data.x[:, list(model.random_columns)])
    x_fixed = np.ascontiguousarray(data.x[:, list(model.fixed_columns)])

    coef_prec = np.ascontiguousarray(np.broadcast_to(prior.coef_precision, (q_free, pr, pr)))
    coef_mean = np.ascontiguousarray(np.broadcast_to(prior.coef_mean, (q_free, pr)))
    fixed_prec = np.ascontiguousarray(np.broadcast_to(prior.fixed_precision, (q_free, pf, pf)))
    fixed_mean = np.ascontiguousarray(np.broadcast_to(prior.fixed_mean, (q_free, pf)))
    iw_scale = np.ascontiguousarray(np.broadcast_to(prior.iw_scale, (q_free, pr, pr)))
    coef_shift = np.einsum("qij,qj->qi", coef_prec, coef_mean)
    fixed_shift = np.einsum("qij,qj->qi", fixed_prec, fixed_mean)

    if pr and not prior.iw_df >= pr:
        raise InvalidParameterError(
            f"covariance prior degrees of freedom must be >= {pr}, got {prior.iw_df}"
        )

    return GibbsProblem(
        x_random=x_random,
        x_fixed=x_fixed,
        cluster=data.cluster,
        cluster_ptr=data.cluster_ptr,
        kappa_num=kappa_num,
        coef_mean_shift=coef_shift,
        coef_precision=coef_prec,
        fixed_shift=fixed_shift,
        fixed_precision=fixed_prec,
        iw_df=float(prior.iw_df),
        iw_scale=iw_scale,
    )


def initial_state(problem: GibbsProblem, stream) -> GibbsState:
    """Zero coefficients, identity covariances, omega drawn at that state."""
    q_free = problem.n_free_categories
    n = problem.n_subjects
    j = problem.n_clusters
    pr = problem.x_random.shape[1]
    pf = problem.x_fixed.shape[1]
    state = GibbsState(
        gamma_j=np.zeros((q_free, j, pr)),
        gamma=np.zeros((q_free, pr)),
        sigma=np.ascontiguousarray(np.tile(np.eye(pr), (q_free, 1, 1))),
        beta=np.zeros((q_free, pf)),
        omega=np.empty((q_free, n)),
        psi=np.zeros((q_free, n)),
    )
    for q in range(q_free):
        update_polya_gamma(state, problem, q, stream)
    return state


def cross_category_logsumexp(psi: np.ndarray, q: int) -> np.ndarray:
    """C^q = log(1 + sum_{m != q, m < Q} exp(psi_m)), stable for any finite psi."""
    out = np.empty(psi.shape[1])
    _cross_into(psi, q, out)
    return out


def _cross_into(psi: np.ndarray, q: int, out: np.ndarray) -> None:
    # vectorized log-sum-exp over the other categories plus the implicit
    # reference zero, with max subtraction
    qm1 = psi.shape[0]
    if qm1 == 1:
        out[:] = 0.0
        return
    rows = [psi[m] for m in range(qm1) if m != q]
    mx = np.maximum(rows[0], 0.0) if len(rows) == 1 else np.maximum(
        np.maximum.reduce(rows), 0.0
    )
    acc = np.exp(-mx)
    for row in rows:
        acc += np.exp(row - mx)
    np.log(acc, out=out)
    out += mx


def _refresh_psi(state: GibbsState, problem: GibbsProblem, q: int) -> None:
    _kernels.linear_predictor(
        problem.x_fixed,
        state.beta[q],
        problem.x_random,
        state.gamma_j[q],
        problem.cluster_ptr,
        state.psi[q],
    )


def _update_fixed(state, problem, q, stream, ws: _Workspace) -> None:
    if problem.x_random.shape[1]:
        _kernels.random_part(
            problem.x_random, state.gamma_j[q], problem.cluster_ptr, ws.offset
        )
    else:
        ws.offset[:] = 0.0
    _kernels.augmented_residual(
        problem.kappa_num[q], state.omega[q], ws.cross, ws.offset, ws.resid
    )
    out = np.empty(problem.x_fixed.shape[1])
    status = _kernels.update_fixed_coefficients(
        problem.x_fixed,
        ws.resid,
        state.omega[q],
        problem.fixed_precision[q],
        problem.fixed_shift[q],
        stream,
        out,
    )
    if status != 0:
        raise NotSPDError(
            "shared-coefficient posterior precision failed",
            context=f"category {q + 1}",
        )
    state.beta[q] = out
    _refresh_psi(state, problem, q)


def _update_means(state, problem, q, stream) -> None:
    out = np.empty(state.gamma.shape[1])
    status = _kernels.update_coefficient_means(
        state.gamma_j[q],
        state.sigma[q],
        problem.coef_precision[q],
        problem.coef_mean_shift[q],
        stream,
        out,
    )
    if status != 0:
        raise NotSPDError(
            "coefficient-mean posterior precision failed",
            min_eigenvalue=float(np.linalg.eigvalsh(state.sigma[q]).min()),
            context=f"category {q + 1}",
        )
    state.gamma[q] = out


def _update_covariance(state, problem, q, stream) -> None:
    out = np.empty_like(state.sigma[q])
    status = _kernels.update_covariance(
        state.gamma_j[q],
        state.gamma[q],
        problem.iw_df,
        problem.iw_scale[q],
        stream,
        out,
    )
    if status != 0:
        raise NotSPDError(
            "covariance posterior scale failed", context=f"category {q + 1}"
        )
    state.sigma[q] = out


def _update_clusters(state, problem, q, stream, ws: _Workspace) -> None:
    if problem.x_fixed.shape[1]:
        _kernels.linear_predictor(
            problem.x_fixed,
            state.beta[q],
            problem.x_random[:, :0],
            state.gamma_j[q][:, :0],
            problem.cluster_ptr,
            ws.offset,
        )
    else:
        ws.offset[:] = 0.0
    _kernels.augmented_residual(
        problem.kappa_num[q], state.omega[q], ws.cross, ws.offset, ws.resid
    )
    status = _kernels.update_cluster_coefficients(
        problem.x_random,
        problem.cluster_ptr,
        ws.resid,
        state.omega[q],
        state.sigma[q],
        state.gamma[q],
        stream,
        state.gamma_j[q],
    )
    if status != 0:
        context = f"category {q + 1}" + (f", cluster {status}" if status > 0 else "")
        raise NotSPDError(
            "cluster-coefficient posterior precision failed", context=context
        )
    _refresh_psi(state, problem, q)


def _update_pg(state, problem, q, stream, ws: _Workspace) -> None:
    if not _kernels.tilt_and_check(state.psi[q], ws.cross, ws.eta):
        raise ChainDivergenceError("non-finite Polya-Gamma tilt eta")
    _kernels.pg_fill(state.omega[q], ws.eta, stream)


def _fresh_workspace(state: GibbsState) -> _Workspace:
    return _Workspace(state.psi.shape[1])


# -- public single-step entry points (each recomputes the cross-category
#    term, so they compose into a sweep or run standalone in tests) ----


def update_fixed_coefficients(state, problem, q, stream) -> None:
    if not problem.x_fixed.shape[1]:
        raise DimensionError("model has no shared-coefficient block")
    ws = _fresh_workspace(state)
    _cross_into(state.psi, q, ws.cross)
    _update_fixed(state, problem, q, stream, ws)


def update_coefficient_means(state, problem, q, stream) -> None:
    if not problem.x_random.shape[1]:
        raise DimensionError("model has no cluster-varying block")
    _update_means(state, problem, q, stream)


def update_covariance(state, problem, q, stream) -> None:
    if not problem.x_random.shape[1]:
        raise DimensionError("model has no cluster-varying block")
    _update_covariance(state, problem, q, stream)


def update_cluster_coefficients(state, problem, q, stream) -> None:
    if not problem.x_random.shape[1]:
        raise DimensionError("model has no cluster-varying block")
    ws = _fresh_workspace(state)
    _cross_into(state.psi, q, ws.cross)
    _update_clusters(state, problem, q, stream, ws)


def update_polya_gamma(state, problem, q, stream) -> None:
    ws = _fresh_workspace(state)
    _cross_into(state.psi, q, ws.cross)
    _update_pg(state, problem, q, stream, ws)


def polya_gamma_tilt(state: GibbsState, q: int) -> np.ndarray:
    """eta for category q at the current state (exposed for testing)."""
    return state.psi[q] - cross_category_logsumexp(state.psi, q)


def sweep_category(state, problem, q, stream, ws: _Workspace | None = None) -> None:
    """One full Gibbs cycle for category q at the current state."""
    if ws is None:
        ws = _fresh_workspace(state)
    _cross_into(state.psi, q, ws.cross)
    if problem.x_fixed.shape[1]:
        _update_fixed(state, problem, q, stream, ws)
    if problem.x_random.shape[1]:
        _update_means(state, problem, q, stream)
        _update_covariance(state, problem, q, stream)
        _update_clusters(state, problem, q, stream, ws)
    _update_pg(state, problem, q, stream, ws)


@dataclass
class ChainStorage:
    gamma_j: np.ndarray  # (L, Qm1, J, PR)
    gamma: np.ndarray  # (L, Qm1, PR)
    sigma: np.ndarray  # (L, Qm1, PR, PR)
    beta: np.ndarray  # (L, Qm1, PF)


def run_chain(
    problem: GibbsProblem,
    iterations: int,
    burnin: int,
    thin: int,
    stream,
    chain_index: int = 0,
) -> ChainStorage:
    """Run one chain; store every ``thin``-th post-burn-in state."""
    q_free = problem.n_free_categories
    state = initial_state(problem, stream)
    ws = _fresh_workspace(state)
    kept = len(range(0, iterations, thin))
    store = ChainStorage(
        gamma_j=np.empty((kept,) + state.gamma_j.shape),
        gamma=np.empty((kept,) + state.gamma.shape),
        sigma=np.empty((kept,) + state.sigma.shape),
        beta=np.empty((kept,) + state.beta.shape),
    )
    slot = 0
    for it in range(burnin + iterations):
        try:
            for q in range(q_free):
                sweep_category(state, problem, q, stream, ws)
        except (NotSPDError, ChainDivergenceError) as err:
            raise ChainDivergenceError(
                f"chain aborted: {err}", iteration=it, chain=chain_index
            ) from err
        if not state.small_blocks_finite():
            raise ChainDivergenceError(
                "non-finite coefficient state", iteration=it, chain=chain_index
            )
        post = it - burnin
        if post >= 0 and post % thin == 0:
            store.gamma_j[slot] = state.gamma_j
            store.gamma[slot] = state.gamma
            store.sigma[slot] = state.sigma
            store.beta[slot] = state.beta
            slot += 1
    return store
