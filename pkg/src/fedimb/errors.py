"""Exception hierarchy shared by every fedimb module."""


class FedimbError(Exception):
    """Base class for all errors raised by this package."""


class InputError(FedimbError):
    """A value passed to an operation violates its precondition."""


class ConfigError(FedimbError):
    """A scenario or experiment configuration is infeasible."""


class FormatError(FedimbError):
    """A file (IDX, CIFAR binary, plan JSON, checkpoint) is malformed."""


class IntegrityError(FedimbError):
    """A fingerprint or stored-versus-recomputed value does not match."""


class NumericError(FedimbError):
    """Training produced a non-finite loss or parameter value."""
