"""Exception hierarchy for the quantized massive MIMO library."""


class QuantizedMimoError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(QuantizedMimoError, ValueError):
    """Invalid parameter, configuration file or sweep description."""


class SolverError(QuantizedMimoError, RuntimeError):
    """A numerical solver did not converge or failed a consistency check."""


class SingularChannelError(QuantizedMimoError, RuntimeError):
    """The channel Gram matrix cannot be inverted (ZF on a rank-deficient H)."""


class DegenerateInputError(QuantizedMimoError, ValueError):
    """The objective is identically zero over the search interval."""


class ExperimentError(QuantizedMimoError):
    """Raised when an experiment cannot be completed."""
