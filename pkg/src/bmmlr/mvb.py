"""Multivariate-Bernoulli / multinomial parametrization.

A vector of K correlated binary outcomes is modelled through its
Q = 2^K joint response categories.  The response design matrix ``H``
enumerates the categories as bit patterns in binary countdown order:
row 1 is all ones, row Q is all zeros.  Joint category probabilities
``phi`` (a Q-simplex) map to marginal success probabilities ``theta``
(one per outcome) by summing the categories in which that outcome is 1,
i.e. ``theta = phi @ H``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, NumericInputError

#: hard cap on the number of outcomes (Q = 2^K categories)
MAX_OUTCOMES = 10

#: warn about category sparsity from this many outcomes on
SPARSITY_WARN_OUTCOMES = 4


@dataclass(frozen=True)
class ResponseDesign:
    """Joint response category layout for K binary outcomes.

    Attributes
    ----------
    n_outcomes : int
        K, the number of binary outcomes.
    patterns : ndarray of shape (Q, K)
        The matrix H.  Row q holds the outcome pattern of category q
        (0-based), in binary countdown order.
    """

    n_outcomes: int
    patterns: np.ndarray = field(repr=False)

    @property
    def n_categories(self) -> int:
        return self.patterns.shape[0]


def build_response_design(n_outcomes: int) -> ResponseDesign:
    """Build the Q x K category pattern matrix in binary countdown order.

    Parameters
    ----------
    n_outcomes : int
        Number of binary outcomes K, 1 <= K <= 10.

    Returns
    -------
    ResponseDesign

    Raises
    ------
    DimensionError
        If ``n_outcomes`` is not an integer in [1, 10].
    """
    if int(n_outcomes) != n_outcomes or not (1 <= int(n_outcomes) <= MAX_OUTCOMES):
        raise DimensionError(
            f"number of outcomes must be an integer in [1, {MAX_OUTCOMES}], "
            f"got {n_outcomes!r}"
        )
    k = int(n_outcomes)
    if k >= SPARSITY_WARN_OUTCOMES:
        warnings.warn(
            f"{k} outcomes give {2 ** k} joint categories; expect sparse "
            "category counts unless the sample is very large",
            stacklevel=2,
        )
    q = 2 ** k
    # row for category index i (0-based) is the K-bit pattern of (Q-1-i)
    codes = np.arange(q - 1, -1, -1, dtype=np.int64)
    patterns = (codes[:, None] >> np.arange(k - 1, -1, -1)[None, :]) & 1
    return ResponseDesign(n_outcomes=k, patterns=patterns.astype(np.int8))


def encode_outcome(outcome, design: ResponseDesign) -> int:
    """Category index (0-based) of a K-bit outcome vector.

    Inverse of ``design.patterns[q]``: ``encode_outcome(H[q], design) == q``.
    """
    y = np.asarray(outcome)
    if y.shape != (design.n_outcomes,):
        raise DimensionError(
            f"outcome vector has shape {y.shape}, expected ({design.n_outcomes},)"
        )
    if not np.isin(y, (0, 1)).all():
        raise DimensionError("outcome entries must be 0 or 1")
    weights = 1 << np.arange(design.n_outcomes - 1, -1, -1)
    return int(design.n_categories - 1 - int((y * weights).sum()))


def encode_outcomes(outcomes, design: ResponseDesign) -> np.ndarray:
    """Vectorized ``encode_outcome`` for an (n, K) array of outcome rows."""
    y = np.asarray(outcomes)
    if y.ndim != 2 or y.shape[1] != design.n_outcomes:
        raise DimensionError(
            f"outcome array has shape {y.shape}, expected (n, {design.n_outcomes})"
        )
    weights = 1 << np.arange(design.n_outcomes - 1, -1, -1)
    return (design.n_categories - 1 - y @ weights).astype(np.int64)


def multinomial_logistic(linear_predictors) -> np.ndarray:
    """Map linear predictors for categories 1..Q-1 to the Q-simplex.

    Category Q's predictor is fixed at zero for identifiability.  The
    softmax is evaluated in log space with max subtraction, so any
    finite predictors are safe (naive exponentiation overflows for
    |psi| > ~700).

    Parameters
    ----------
    linear_predictors : array_like, shape (Q-1,) or (n, Q-1)
        Linear predictors psi for the non-reference categories.

    Returns
    -------
    ndarray, shape (Q,) or (n, Q)
        Joint category probabilities; strictly positive, rows sum to 1.
    """
    psi = np.asarray(linear_predictors, dtype=float)
    if not np.isfinite(psi).all():
        raise NumericInputError("linear predictors must be finite")
    squeeze = psi.ndim == 1
    psi = np.atleast_2d(psi)
    full = np.concatenate([psi, np.zeros((psi.shape[0], 1))], axis=1)
    full -= full.max(axis=1, keepdims=True)
    np.exp(full, out=full)
    full /= full.sum(axis=1, keepdims=True)
    return full[0] if squeeze else full


def joint_to_success(joint_probabilities, design: ResponseDesign) -> np.ndarray:
    """Marginal success probabilities theta from joint probabilities phi.

    ``theta[k] = sum_q phi[q] * H[q, k]``.  Accepts a single simplex or
    an (n, Q) stack of simplexes.
    """
    phi = np.asarray(joint_probabilities, dtype=float)
    if phi.shape[-1] != design.n_categories:
        raise DimensionError(
            f"expected {design.n_categories} joint probabilities, got {phi.shape[-1]}"
        )
    # subset sums of a unit simplex can overshoot 1 by an ulp; clip the spill
    return np.clip(phi @ design.patterns.astype(float), 0.0, 1.0)
