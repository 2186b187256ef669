"""Chain health checks and posterior summaries.

Split-R-hat follows the between/within variance comparison on
half-chains; values near 1 indicate mixing and the conventional alarm
threshold is 1.1.  The effective sample size uses the initial-positive-
sequence truncation of the pooled autocorrelation.  The "multivariate"
convergence report is the maximum split-R-hat across parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, InvalidParameterError, NumericInputError

PSRF_ALARM = 1.1


def _as_chain_matrix(chains) -> np.ndarray:
    x = np.asarray(chains, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise DimensionError("expected a (chains, draws) array")
    return x


def psrf(chains) -> float:
    """Split potential scale reduction factor over >= 2 equal-length chains."""
    x = _as_chain_matrix(chains)
    if x.shape[0] < 2:
        raise DimensionError("potential scale reduction needs at least two chains")
    if x.shape[1] < 10:
        raise DimensionError("chains shorter than 10 draws cannot be diagnosed")
    half = x.shape[1] // 2
    splits = np.concatenate([x[:, :half], x[:, half : 2 * half]], axis=0)
    m, n = splits.shape
    within = splits.var(axis=1, ddof=1)
    w = within.mean()
    if w == 0.0:
        raise NumericInputError("constant chains have no within-chain variance")
    means = splits.mean(axis=1)
    b = n * means.var(ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def autocorrelation(chain, lag: int) -> float:
    """Sample autocorrelation of a single chain at a given lag."""
    x = np.asarray(chain, dtype=float)
    if x.ndim != 1:
        raise DimensionError("autocorrelation expects a single chain")
    if not 0 <= lag < x.shape[0]:
        raise InvalidParameterError(f"lag must be in [0, {x.shape[0] - 1}]")
    centered = x - x.mean()
    denom = (centered ** 2).sum()
    if denom == 0.0:
        raise NumericInputError("constant chain has undefined autocorrelation")
    if lag == 0:
        return 1.0
    return float((centered[:-lag] * centered[lag:]).sum() / denom)


def effective_sample_size(chains) -> float:
    """Effective sample size of one or more chains of one parameter.

    Pools chains a la split-ESS: autocovariances are averaged across
    chains against the pooled variance estimate, and the
    autocorrelation sum is truncated at the first negative even/odd
    pair.  Capped at the total number of draws.
    """
    x = _as_chain_matrix(chains)
    m, n = x.shape
    if n < 4:
        raise DimensionError("need at least 4 draws for an ESS estimate")
    within = x.var(axis=1, ddof=1)
    w = within.mean()
    if w == 0.0:
        raise NumericInputError("constant chains have no ESS")
    if m > 1:
        b = n * x.mean(axis=1).var(ddof=1)
    else:
        b = 0.0
    var_plus = (n - 1) / n * w + b / n

    centered = x - x.mean(axis=1, keepdims=True)
    max_lag = n - 1
    rho_sum = 0.0
    prev_pair = np.inf
    t = 1
    while t < max_lag:
        pair = 0.0
        ok = True
        for lag in (t, t + 1):
            if lag >= max_lag:
                ok = False
                break
            acov = (centered[:, :-lag] * centered[:, lag:]).sum(axis=1) / n
            rho = 1.0 - (w - acov.mean()) / var_plus
            pair += rho
        if not ok or pair < 0.0:
            break
        pair = min(pair, prev_pair)  # enforce monotone decrease
        rho_sum += pair
        prev_pair = pair
        t += 2
    ess = m * n / (1.0 + 2.0 * rho_sum)
    return float(min(ess, m * n))


def thin(chains, factor: int):
    """Keep draw indices 0, factor, 2*factor, ... along the draw axis.

    Accepts a 1-D chain or a (chains, draws, ...) array; the draw axis is
    the last for 1-D input and the second otherwise.
    """
    x = np.asarray(chains)
    length = x.shape[0] if x.ndim == 1 else x.shape[1]
    if factor < 1:
        raise InvalidParameterError("thinning factor must be >= 1")
    if factor != 1 and factor >= length:
        raise InvalidParameterError("thinning factor must be smaller than the chain length")
    if x.ndim == 1:
        return x[::factor]
    return x[:, ::factor]


@dataclass(frozen=True)
class ChainSummary:
    """Posterior summary of one scalar parameter."""

    mean: float
    sd: float
    ci_lower: float
    ci_upper: float
    psrf: float | None
    ess: float
    lag1: float
    lag10: float | None


def summarize_parameter(chains, level: float = 0.95) -> ChainSummary:
    x = _as_chain_matrix(chains)
    flat = x.reshape(-1)
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(flat, [tail, 1.0 - tail])
    pooled = x.mean(axis=0) if x.shape[0] > 1 else x[0]
    return ChainSummary(
        mean=float(flat.mean()),
        sd=float(flat.std(ddof=1)),
        ci_lower=float(lo),
        ci_upper=float(hi),
        psrf=psrf(x) if x.shape[0] >= 2 else None,
        ess=effective_sample_size(x),
        lag1=autocorrelation(x[0], 1),
        lag10=autocorrelation(x[0], 10) if x.shape[1] > 10 else None,
    )


def summarize(named_chains: dict, level: float = 0.95) -> dict[str, ChainSummary]:
    """Summaries for a mapping of parameter name -> (chains, draws) array."""
    return {name: summarize_parameter(arr, level) for name, arr in named_chains.items()}


def max_psrf(named_chains: dict) -> float:
    """Conservative multivariate convergence proxy: max split-R-hat."""
    vals = []
    for arr in named_chains.values():
        try:
            vals.append(psrf(arr))
        except NumericInputError:
            continue  # constant parameter chains carry no convergence signal
    if not vals:
        raise NumericInputError("no parameter had a defined scale reduction factor")
    return float(max(vals))
