"""Exception types shared across the library and mapped to CLI exit codes."""


class ConfigError(Exception):
    """Bad, unknown, or inconsistent configuration (CLI exit code 2)."""


class DataError(Exception):
    """Unreadable or malformed input data (CLI exit code 3)."""


class FormatError(DataError):
    """Malformed binary file; carries the byte offset of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ManifestError(DataError):
    """Bad manifest record; carries the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"manifest line {line}: {message}"
        super().__init__(message)
        self.line = line


class CacheInvalidError(DataError):
    """Cached descriptor exists but does not match the expected shape."""


class DegenerateSampleError(ValueError):
    """A sample with zero self-similarity; carries its index."""

    def __init__(self, index, message=None):
        super().__init__(message or f"degenerate sample at index {index}")
        self.index = index


class ConvergenceError(RuntimeError):
    """Solver ran out of iterations; carries the best iterate found."""

    def __init__(self, message, model=None, kkt_residual=None):
        super().__init__(message)
        self.model = model
        self.kkt_residual = kkt_residual
