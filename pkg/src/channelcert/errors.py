"""Exception types shared across the package."""


class ChannelCertError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(ChannelCertError, ValueError):
    """Matrix/vector dimensions are inconsistent with the operation."""


class DomainError(ChannelCertError, ValueError):
    """An argument is outside the operation's valid domain."""


class InvalidInputError(ChannelCertError, ValueError):
    """Input contains non-finite entries or violates a structural invariant."""


class InvalidChoiError(ChannelCertError, ValueError):
    """Matrix fails the Choi-state conditions (PSD, reduced trace = I/d_in)."""


class SamplingExhaustedError(ChannelCertError, RuntimeError):
    """Rejection sampling failed to hit the acceptance event within the retry budget."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = dict(stats or {})


class InsufficientSamplesError(ChannelCertError, ValueError):
    """Fewer samples were supplied than the tester requires."""

    def __init__(self, message, required):
        super().__init__(message)
        self.required = required


class UnsupportedOrderError(ChannelCertError, ValueError):
    """Moment order outside the supported range."""


class TooLargeError(ChannelCertError, ValueError):
    """Problem size exceeds the guard for a dense evaluation."""


class ConfigError(ChannelCertError, ValueError):
    """Experiment configuration is invalid; carries the offending field name."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
