"""Exception types shared across the package."""


class CfmimoError(Exception):
    """Base class for all package errors."""


class ConfigError(CfmimoError):
    """Invalid scenario configuration."""


class DimensionError(CfmimoError):
    """Matrix dimensions do not conform."""


class NumericError(CfmimoError):
    """Non-finite values or imaginary residue beyond tolerance."""


class NotPositiveDefiniteError(NumericError):
    """Cholesky pivot <= 0 on a matrix required to be Hermitian PD."""


class BracketError(CfmimoError):
    """Root bracket does not separate signs."""


class ConvergenceError(CfmimoError):
    """Iteration cap exceeded."""


class StalenessError(CfmimoError):
    """A cross-O-DU cache entry required by the coupling term is missing."""


class InvariantViolationError(CfmimoError):
    """A runtime invariant (power budget, objective monotonicity) failed."""


class ProtocolError(CfmimoError):
    """Malformed or out-of-order message on the environment bridge."""


class ModelFormatError(CfmimoError):
    """Malformed neural-surrogate model file."""


class DegenerateChannelError(CfmimoError):
    """All-zero channel where a precoder needs a direction."""
