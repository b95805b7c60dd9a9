"""Exception types raised across the package."""


class LassoSIError(Exception):
    """Base class for all package-specific failures."""


class SingularMatrix(LassoSIError):
    """A Cholesky pivot fell below threshold: the active Gram matrix is
    numerically singular (design not in general position)."""


class DegenerateSupport(LassoSIError):
    """Truncation support carries no representable Gaussian mass."""


class NoConvergence(LassoSIError):
    """Solver failed to close the duality gap within the sweep budget."""


class ZeroLambda(LassoSIError):
    """lambda = 0 with p > n: the inactive subgradient is undefined."""


class StalledPath(LassoSIError):
    """Two consecutive sub-minimum homotopy steps at the same point."""


class EmptyRegion(LassoSIError):
    """No path segment satisfies the selection predicate."""


class RankDeficient(LassoSIError):
    """Design restriction lacks full column rank for the requested target."""


class BracketFailure(LassoSIError):
    """Confidence-bound bracketing exceeded its expansion budget."""


class SelectionMismatch(LassoSIError):
    """Configured selected lambda does not reproduce at the observed data."""


class TooManySigns(LassoSIError):
    """Sign enumeration requested above the 2^12 cap."""


class NonConvergentQuadrature(LassoSIError):
    """Adaptive quadrature hit its recursion limit."""
