"""Exception and warning types shared across the package."""


class FidGaussError(Exception):
    """Base class for all package errors."""


class NotPermissible(FidGaussError):
    """The orthogonal matrix has -1 as a (numerical) characteristic root."""


class NotPositiveDefinite(FidGaussError, ValueError):
    pass


class DimensionMismatch(FidGaussError, ValueError):
    pass


class MissingSites(FidGaussError, ValueError):
    pass


class DomainError(FidGaussError, ValueError):
    pass


class SingularGradH(FidGaussError):
    """The Jacobian of the (A, Lambda) -> Sigma map is numerically singular."""


class SingularCross(FidGaussError):
    """X^T X is singular within tolerance in the D functional."""


class RankDeficientG(FidGaussError):
    """grad_theta G has rank below p: the parameterization is not identifiable here."""


class EnumerationTooLarge(FidGaussError):
    pass


class InitFailed(FidGaussError):
    """No permissible signature set was found for the starting value."""


class WindowTooLarge(FidGaussError, ValueError):
    pass


class ConfigError(FidGaussError, ValueError):
    pass


class DegenerateEigenvaluesWarning(RuntimeWarning):
    """Adjacent eigenvalues of a covariance matrix are (nearly) tied."""


class DegenerateTermWarning(RuntimeWarning):
    """A permissible signature matrix was dropped because of a singular Jacobian."""


class NoConvergenceWarning(RuntimeWarning):
    pass
