"""Exception hierarchy shared across the package."""


class AmortizedShapError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolationError(AmortizedShapError, ValueError):
    """An argument broke a documented precondition (dimension, alphabet, range)."""


class CapacityError(AmortizedShapError):
    """A dense or oracle-scale computation was requested beyond its size guard."""


class FormatError(AmortizedShapError):
    """A serialized artifact has the wrong version or a malformed layout."""


class ConfigurationError(AmortizedShapError):
    """Two components disagree on configuration (e.g. handshake q/n mismatch)."""


class BridgeIOError(AmortizedShapError, OSError):
    """Transport-level failure talking to an external model process; retryable."""


class ProtocolError(AmortizedShapError):
    """The external model process answered with a malformed or invalid message."""


class NumericalConsistencyError(AmortizedShapError):
    """A numerical invariant failed badly enough to indicate corrupted input."""


class UndefinedCorrelationError(AmortizedShapError):
    """Correlation requested on a zero-variance input."""
