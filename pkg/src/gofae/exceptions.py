"""Exception types shared across the package.

Every error raised on purpose by this library derives from GofaeError so
callers can catch the whole family with one clause.  The CLI maps these to
exit codes (see gofae.cli).
"""


class GofaeError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateSample(GofaeError):
    """Sample variance is (numerically) zero; test statistics are undefined."""


class UnsupportedSize(GofaeError):
    """Sample size outside the validity range of a p-value approximation."""


class DimensionMismatch(GofaeError):
    """Operands have incompatible shapes."""


class ShapeMismatch(DimensionMismatch):
    """Batch or parameter shapes are inconsistent with the model."""


class RankDeficient(GofaeError):
    """Matrix has (numerically) deficient column rank; retraction undefined."""


class EmptyInput(GofaeError):
    """An operation that needs at least one element received none."""


class NonFiniteActivation(GofaeError):
    """Forward pass produced NaN or infinity."""


class NonFiniteLoss(GofaeError):
    """Training loss became NaN or infinite.

    Carries a diagnostic dict (batch norm, parameter norms, gradient norms)
    so the failure site can be reconstructed post mortem.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class StaleCache(GofaeError):
    """backward() called with a forward cache from different parameters."""


class InsufficientSamples(GofaeError):
    """Too few samples for the requested moment estimate."""


class SingularJointCovariance(GofaeError):
    """Joint covariance is singular even after ridge regularization."""


class BadDims(GofaeError):
    """Generator dimensions violate their preconditions."""


class MalformedFile(GofaeError):
    """An input file does not conform to its format.

    byte_offset points at the first offending byte where that is knowable.
    """

    def __init__(self, message, byte_offset=None):
        super().__init__(message)
        self.byte_offset = byte_offset


class ConfigError(GofaeError):
    """A run configuration failed schema validation."""
