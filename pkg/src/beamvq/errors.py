"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class BeamVQError(Exception):
    """Base class for all package errors."""


class ConfigError(BeamVQError):
    pass


class DataError(BeamVQError):
    pass


class FormatError(DataError):
    """Bad magic, unsupported version or truncated binary file."""


class NumericError(BeamVQError):
    pass


class NonFiniteError(NumericError):
    pass


class CFLError(NumericError):
    def __init__(self, cfl: float, limit: float):
        super().__init__(f"CFL number {cfl:.4f} exceeds limit {limit}")
        self.cfl = cfl
        self.limit = limit


class ShapeError(BeamVQError, ValueError):
    def __init__(self, op: str, a, b):
        super().__init__(f"{op}: incompatible shapes {tuple(a)} and {tuple(b)}")
        self.op = op
        self.shapes = (tuple(a), tuple(b))
