"""Exception types shared across the package."""


class DpscanError(ValueError):
    """Base class for all errors raised by this package."""


class DimensionError(DpscanError):
    """Operands have incompatible shapes or lengths."""


class ValidationError(DpscanError):
    """An object violates its structural invariants."""


class GridError(DpscanError):
    """Gridded CDFs live on different grids."""


class ConfigError(DpscanError):
    """A parameter is outside its admissible range."""


class InputError(DpscanError):
    """A data file could not be parsed.

    Carries the path and 1-based line number of the offending row when
    known, so command-line diagnostics can point at the exact line.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
