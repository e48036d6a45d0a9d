"""Exception hierarchy shared by all engine modules."""


class MRRPAError(Exception):
    """Base class for engine errors."""


class UsageError(MRRPAError, ValueError):
    """Invalid arguments or inconsistent inputs."""


class ParseError(MRRPAError):
    """Malformed FCIDUMP or configuration input."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class CapacityError(MRRPAError):
    """Problem size above a configured cap."""


class DegeneracyError(MRRPAError):
    """Degenerate zeroth-order ground state or vanishing excitation energy."""


class InstabilityError(MRRPAError):
    """Complex RPA frequencies or a non-positive determinant on the frequency grid."""

    def __init__(self, message, modes=None):
        self.modes = [] if modes is None else list(modes)
        super().__init__(message)
