"""Superiority / inferiority decisions from treatment-difference draws.

A rule defines an acceptance region over the K-vector of treatment
differences; the posterior probability of the region is the fraction of
draws falling inside it (strict inequalities, so a draw exactly at zero
is not in the region).  Superiority is concluded when that probability
exceeds the cutoff, inferiority when it falls below one minus the
cutoff.

The ``any`` rule is evaluated as K per-outcome tests against a
Bonferroni-corrected cutoff, so it can conclude superiority on one
outcome and inferiority on another (verdict "both").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effects import CompositeWeights, EffectDraws, composite
from .exceptions import DimensionError, InvalidParameterError

SINGLE = "single"
ANY = "any"
ALL = "all"
COMPENSATORY = "compensatory"
RULE_KINDS = (SINGLE, ANY, ALL, COMPENSATORY)

RIGHT_SIDED = "right"
TWO_SIDED = "two"

SUPERIOR = "superior"
INFERIOR = "inferior"
BOTH = "both"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DecisionRule:
    """A superiority criterion: rule kind, sidedness and target alpha."""

    kind: str
    sided: str = RIGHT_SIDED
    alpha: float = 0.05
    weights: CompositeWeights | None = None  # compensatory only
    outcome: int | None = None  # single only, 0-based

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise InvalidParameterError(f"unknown rule kind {self.kind!r}")
        if self.sided not in (RIGHT_SIDED, TWO_SIDED):
            raise InvalidParameterError(f"sidedness must be 'right' or 'two'")
        if not 0.0 < self.alpha < 0.5:
            raise InvalidParameterError("alpha must lie in (0, 0.5)")
        if self.kind == COMPENSATORY and self.weights is None:
            raise InvalidParameterError("compensatory rule needs weights")
        if self.kind == SINGLE and self.outcome is None:
            raise InvalidParameterError("single rule needs an outcome index")

    @property
    def label(self) -> str:
        return self.kind


def single_rule(outcome: int, sided=RIGHT_SIDED, alpha=0.05) -> DecisionRule:
    return DecisionRule(SINGLE, sided, alpha, outcome=outcome)


def any_rule(sided=RIGHT_SIDED, alpha=0.05) -> DecisionRule:
    return DecisionRule(ANY, sided, alpha)


def all_rule(sided=RIGHT_SIDED, alpha=0.05) -> DecisionRule:
    return DecisionRule(ALL, sided, alpha)


def compensatory_rule(weights, sided=RIGHT_SIDED, alpha=0.05) -> DecisionRule:
    if not isinstance(weights, CompositeWeights):
        weights = CompositeWeights(weights)
    return DecisionRule(COMPENSATORY, sided, alpha, weights=weights)


def cutoff(rule: DecisionRule, n_outcomes: int) -> float:
    """Decision threshold p_cut for the rule at K outcomes.

    Right-sided: 1 - alpha, Bonferroni-corrected to 1 - alpha/K for the
    ``any`` rule.  Two-sided halves alpha: 1 - alpha/2 and 1 - alpha/(2K).
    """
    alpha = rule.alpha
    if rule.sided == TWO_SIDED:
        alpha = alpha / 2.0
    if rule.kind == ANY:
        alpha = alpha / n_outcomes
    return 1.0 - alpha


def _delta_matrix(draws) -> np.ndarray:
    delta = draws.delta if isinstance(draws, EffectDraws) else np.asarray(draws, float)
    if delta.ndim != 2 or delta.shape[0] < 1:
        raise DimensionError("need a non-empty (draws, outcomes) matrix")
    return delta


def region_probability(draws, rule: DecisionRule):
    """Posterior mass of the rule's superiority region.

    Returns a scalar for ``all``/``compensatory``/``single`` and a
    per-outcome vector for ``any``.
    """
    delta = _delta_matrix(draws)
    if rule.kind == ALL:
        return float((delta.min(axis=1) > 0.0).mean())
    if rule.kind == COMPENSATORY:
        return float((composite(delta, rule.weights) > 0.0).mean())
    if rule.kind == SINGLE:
        if not 0 <= rule.outcome < delta.shape[1]:
            raise DimensionError(f"outcome index {rule.outcome} out of range")
        return float((delta[:, rule.outcome] > 0.0).mean())
    return (delta > 0.0).mean(axis=0)


@dataclass(frozen=True)
class DecisionOutcome:
    """Verdict with the probabilities and cutoff that produced it."""

    rule: DecisionRule
    probabilities: np.ndarray  # per tested region (length K for any, else 1)
    cutoff: float
    verdict: str

    @property
    def superiority(self) -> bool:
        """Whether a superiority conclusion was reached (on any tested region)."""
        return self.verdict in (SUPERIOR, BOTH)


def verdict_from_probabilities(probabilities, p_cut: float) -> str:
    """Pure verdict logic; re-running it on stored probabilities is exact."""
    p = np.atleast_1d(np.asarray(probabilities, dtype=float))
    sup = p > p_cut
    inf = p < 1.0 - p_cut
    if sup.any() and inf.any():
        return BOTH
    if sup.any():
        return SUPERIOR
    if inf.any():
        return INFERIOR
    return INCONCLUSIVE


def decide(draws, rule: DecisionRule, n_outcomes: int | None = None) -> DecisionOutcome:
    """Evaluate a rule on effect draws and assemble the outcome."""
    delta = _delta_matrix(draws)
    k = n_outcomes if n_outcomes is not None else delta.shape[1]
    p_cut = cutoff(rule, k)
    probs = np.atleast_1d(region_probability(delta, rule))
    return DecisionOutcome(
        rule=rule,
        probabilities=probs,
        cutoff=p_cut,
        verdict=verdict_from_probabilities(probs, p_cut),
    )
