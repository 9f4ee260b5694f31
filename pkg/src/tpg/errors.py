"""Exception types shared across the library."""


class TpgError(Exception):
    """Base class for all library faults."""


class OperandUnavailableError(TpgError):
    """A program requested data a source cannot provide at that address."""


class RegisterRangeError(TpgError):
    """Register index outside the register file."""


class SignatureMismatchError(TpgError):
    """Operand list does not match an instruction's declared signature."""


class GraphInvariantError(TpgError):
    """A structural invariant of the graph was violated."""


class ParamError(TpgError):
    """Invalid meta-parameter value."""


class ConfigError(TpgError):
    """Malformed or out-of-range run configuration."""


class DotFormatError(TpgError):
    """Unparseable or invalid serialized graph."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EnvironmentFault(TpgError):
    """Learning-environment misuse (e.g. stepping a terminal episode)."""


class WorkerError(TpgError):
    """A parallel worker failed; carries the remote diagnostic."""
