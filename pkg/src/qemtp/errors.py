"""Exception hierarchy shared by the library and the CLI."""


class QemtpError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(QemtpError, ValueError):
    """A numeric parameter is out of its admissible range."""


class DimensionError(QemtpError, ValueError):
    """Array shapes do not match what an operation requires."""


class AssemblyError(QemtpError):
    """The nodal admittance matrix could not be formed or is singular."""


class SolverError(QemtpError):
    """A linear solve failed (singular or too ill-conditioned)."""


class DegenerateStateError(QemtpError):
    """A variational state produced a zero-norm image under the system matrix."""


class ConvergenceError(QemtpError):
    """An iterative procedure ran out of budget above its tolerance."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ConfigError(QemtpError, ValueError):
    """A configuration or data file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.path = path
