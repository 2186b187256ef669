"""Exception types raised across the package."""


class BmmlrError(Exception):
    """Base class for all package errors."""


class DimensionError(BmmlrError, ValueError):
    """Invalid dimension (outcome count, mismatched shapes, bad indices)."""


class NumericInputError(BmmlrError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class InvalidParameterError(BmmlrError, ValueError):
    """Parameter outside its admissible range (degrees of freedom, alpha, ...)."""


class NotSPDError(BmmlrError, ValueError):
    """A matrix required to be symmetric positive definite is not.

    Carries an estimate of the smallest eigenvalue of the offending
    matrix and, when raised inside the Gibbs sampler, the context
    (category, cluster, iteration) of the failure.
    """

    def __init__(self, message, min_eigenvalue=None, context=None):
        if min_eigenvalue is not None:
            message = f"{message} (min eigenvalue ~ {min_eigenvalue:.3e})"
        if context:
            message = f"{message} [{context}]"
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.context = context


class ChainDivergenceError(BmmlrError, RuntimeError):
    """The Gibbs chain produced a non-finite state and was aborted."""

    def __init__(self, message, iteration=None, chain=None):
        if iteration is not None:
            message = f"{message} (chain {chain}, iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration
        self.chain = chain


class EmptySubpopulationError(BmmlrError, ValueError):
    """No subject in any cluster qualifies for the requested subpopulation."""


class DataError(BmmlrError, ValueError):
    """Malformed input data (bad CSV rows, non-binary outcomes, missing columns)."""
