"""Custom exceptions"""
from typing import Optional


class DSDException(Exception):
    """Base exception for dsdkit"""
    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InputError(DSDException):
    """Input file or argument is invalid"""
    exit_code = 1

    def __init__(self, detail: str = "Invalid input"):
        super().__init__(detail)


class SchemaError(InputError):
    """CSV header does not match the schema"""
    def __init__(self, column: str, detail: Optional[str] = None):
        self.column = column
        super().__init__(detail or f"schema error: column '{column}'")


class ParseError(InputError):
    """Cell could not be parsed as a number"""
    def __init__(self, row: int, column: str, value: str, source: str = "<input>"):
        self.row = row
        self.column = column
        super().__init__(f"{source}: row {row}, column '{column}': cannot parse {value!r}")


class DatasetValidationError(InputError):
    """Record violates a dataset invariant"""
    def __init__(self, detail: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column '{column}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {detail}" if prefix else detail)


class UnitError(InputError):
    """Unit is undeclared or cannot be converted"""
    def __init__(self, column: str, unit: Optional[str] = None):
        self.column = column
        self.unit = unit
        if unit is None:
            detail = f"unit error: no unit declared for column '{column}'"
        else:
            detail = f"unit error: column '{column}' has unconvertible unit '{unit}'"
        super().__init__(detail)


class YearRangeError(InputError):
    """Requested years are not covered by the dataset"""
    def __init__(self, detail: str = "Year out of range"):
        super().__init__(detail)


class PreconditionError(InputError):
    """Operation precondition violated"""
    def __init__(self, detail: str = "Precondition violated"):
        super().__init__(detail)


class DegenerateStateError(InputError):
    """Factor state cannot be derived"""
    def __init__(self, year: Optional[int], detail: str = "total active end-use energy is zero"):
        self.year = year
        super().__init__(f"degenerate record (year {year}): {detail}")


class ActiveSetMismatchError(InputError):
    """Endpoints disagree on the active end uses"""
    def __init__(self, detail: str = "start and end states have different active end uses"):
        super().__init__(detail)


class ShareRangeError(InputError):
    """Share path leaves [0, 1] during a scenario"""
    def __init__(self, segment: int, end_use: str, value: float):
        self.segment = segment
        self.end_use = end_use
        self.value = value
        super().__init__(
            f"share of '{end_use}' leaves [0, 1] at segment {segment} (value {value:.6g})"
        )


class UnsupportedScaleError(InputError):
    """Requested decarbonization scale cannot be computed"""
    def __init__(self, scale: str, detail: str = "required denominator is absent"):
        self.scale = scale
        super().__init__(f"unsupported scale '{scale}': {detail}")


class FixtureError(InputError):
    """Bundled fixture unavailable"""
    def __init__(self, detail: str = "Bundled fixtures are disabled (set DSD_SEED_FIXTURES=1)"):
        super().__init__(detail)


class NumericError(DSDException):
    """Numeric failure during integration"""
    exit_code = 3

    def __init__(self, detail: str = "Numeric failure"):
        super().__init__(detail)


class NonFiniteStateError(NumericError):
    """Integration produced a non-finite value"""
    def __init__(self, segment: int, detail: str = "non-finite intermediate state"):
        self.segment = segment
        super().__init__(f"{detail} at segment {segment}")


class SingularSystemError(NumericError):
    """System matrix A is singular"""
    def __init__(self, segment: int, determinant: float):
        self.segment = segment
        super().__init__(f"singular system at segment {segment} (det={determinant:.3g})")
