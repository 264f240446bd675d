"""Exception hierarchy shared by every module."""


class AdaVawError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(AdaVawError, ValueError):
    """An input vector or matrix has an unusable length or shape."""


class ConfigurationError(AdaVawError, ValueError):
    """A parameter is outside its admissible range."""


class ProtocolError(AdaVawError, RuntimeError):
    """The predict/observe interleaving of the online protocol was violated."""


class HorizonExhausted(ProtocolError):
    """A step was requested past the declared horizon ``n``."""


class GenerationError(AdaVawError, ValueError):
    """A generator spec is infeasible or produced a series outside its class."""
