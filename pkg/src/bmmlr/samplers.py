"""Random-variate kernels for the Gibbs sampler.

All samplers draw from an explicit ``numpy.random.Generator`` stream:
identical seed plus identical call sequence gives bit-identical draws.
Parallel chains and simulation replications each get an independently
derived stream (`substreams`), so results do not depend on scheduling.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .exceptions import InvalidParameterError, NotSPDError, NumericInputError


def stream(seed) -> np.random.Generator:
    """A seeded random stream."""
    return np.random.default_rng(seed)


def substreams(seed, n, key=()) -> list[np.random.Generator]:
    """``n`` independent streams derived from ``seed``.

    ``key`` namespaces the family (e.g. per replication index) so that
    different consumers of the same master seed never collide.
    """
    root = np.random.SeedSequence(seed, spawn_key=tuple(key))
    return [np.random.default_rng(child) for child in root.spawn(n)]


def sample_polya_gamma(tilt, stream: np.random.Generator):
    """Exact draw(s) from the Polya-Gamma distribution PG(1, tilt).

    The mean is tanh(tilt/2) / (2 tilt), with limit 1/4 at tilt = 0.
    Scalar input gives a scalar, array input an array of the same shape.

    Raises
    ------
    NumericInputError
        If any tilt value is not finite.
    """
    c = np.asarray(tilt, dtype=float)
    if not np.isfinite(c).all():
        raise NumericInputError("Polya-Gamma tilt must be finite")
    if c.ndim == 0:
        return float(_kernels.pg_draw(float(c), stream))
    flat = np.ascontiguousarray(c.reshape(-1))
    out = np.empty_like(flat)
    _kernels.pg_fill(out, flat, stream)
    return out.reshape(c.shape)


def sample_mvn(mean, covariance, stream: np.random.Generator, ridge: float = 0.0):
    """Draw from N(mean, covariance) through a Cholesky factor.

    ``ridge`` (default 0) is added to the diagonal before factorizing;
    it exists for near-singular posteriors and is never applied
    silently.  A failed factorization raises `NotSPDError` carrying the
    matrix's smallest-eigenvalue estimate.
    """
    mu = np.asarray(mean, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    if cov.shape != (mu.size, mu.size):
        raise InvalidParameterError(
            f"covariance shape {cov.shape} does not match mean of length {mu.size}"
        )
    if ridge:
        cov = cov + ridge * np.eye(mu.size)
    try:
        lower = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        min_eig = float(np.linalg.eigvalsh(cov).min())
        raise NotSPDError("covariance is not SPD", min_eigenvalue=min_eig) from None
    return mu + lower @ stream.standard_normal(mu.size)


def sample_inverse_wishart(df, scale, stream: np.random.Generator) -> np.ndarray:
    """Draw from inverse-Wishart(df, scale) via Bartlett decomposition.

    Requires ``df > d - 1`` for a d x d scale matrix.  The draw is SPD
    and exactly symmetric.
    """
    s = np.ascontiguousarray(scale, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise InvalidParameterError(f"scale must be square, got shape {s.shape}")
    d = s.shape[0]
    if not df > d - 1:
        raise InvalidParameterError(
            f"inverse-Wishart needs df > d - 1 = {d - 1}, got df = {df}"
        )
    out = np.empty((d, d))
    if not _kernels.invwishart_draw(float(df), s, stream, out):
        min_eig = float(np.linalg.eigvalsh(s).min())
        raise NotSPDError("inverse-Wishart scale is not SPD", min_eigenvalue=min_eig)
    return out


def sample_dirichlet(alpha, stream: np.random.Generator) -> np.ndarray:
    """Draw from Dirichlet(alpha); all concentrations must be positive."""
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 1 or a.size < 2 or not (a > 0).all():
        raise InvalidParameterError(
            "Dirichlet concentration must be a vector of positive reals"
        )
    return stream.dirichlet(a)


def sample_category(probabilities, stream: np.random.Generator) -> int:
    """Sample a category index (0-based) from a probability simplex."""
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or not np.isfinite(p).all() or (p < 0).any():
        raise InvalidParameterError("probabilities must be a nonnegative vector")
    total = p.sum()
    if abs(total - 1.0) > 1e-8:
        raise InvalidParameterError(f"probabilities sum to {total}, not 1")
    return int(np.searchsorted(np.cumsum(p), stream.random() * total, side="right"))


def sample_categories(probability_rows, stream: np.random.Generator) -> np.ndarray:
    """Row-wise categorical draws for an (n, Q) array of simplexes."""
    p = np.asarray(probability_rows, dtype=float)
    cdf = np.cumsum(p, axis=1)
    u = stream.random(p.shape[0]) * cdf[:, -1]
    return (u[:, None] >= cdf).sum(axis=1).astype(np.int64)
