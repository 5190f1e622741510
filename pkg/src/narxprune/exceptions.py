"""Exception hierarchy.

Errors split into two families so callers (and the command line) can tell
bad input apart from numerical breakdown.
"""


class NarxPruneError(Exception):
    """Base class for all package errors."""


class DataError(NarxPruneError, ValueError):
    """Input data is malformed, too short or inconsistent."""


class ParseError(DataError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}parse error: {message}")


class NonUniformSamplingError(DataError):
    pass


class InsufficientSamplesError(DataError):
    pass


class NumericalError(NarxPruneError, ArithmeticError):
    """A computation broke down (rank loss, divergence, degenerate input)."""


class RankExhaustedError(NumericalError):
    def __init__(self, message, step=None, batch=None):
        self.step = step
        self.batch = batch
        super().__init__(message)


class DegenerateTargetError(NumericalError):
    pass


class RankDeficientError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass


class EmptyClusterError(NumericalError):
    pass
