"""Exception types shared across the package."""


class RepairError(Exception):
    """Base class for errors raised by provable_repair."""


class InputError(RepairError, ValueError):
    """Malformed input: wrong dimensions, non-finite values, bad indices."""


class UnsupportedActivationError(RepairError):
    """An operation that needs a piecewise-linear network got a non-PWL one."""


class FormatError(InputError):
    """A network, spec, or dataset file could not be parsed or validated."""


class IterationLimitError(RepairError):
    """The simplex solver hit its pivot cap."""


class RepairTimeoutError(RepairError):
    """The wall-clock budget for a repair pipeline was exhausted."""


class SolverUnavailableError(RepairError):
    """The requested external LP solver is not registered or not installed."""


class SolverProtocolError(RepairError):
    """An external solver returned something that violates the LP contract."""
