"""Exception hierarchy.

Every error raised deliberately by the package derives from :class:`CmifsError`;
the CLI maps the three families below onto its exit codes.
"""


class CmifsError(Exception):
    """Base class for all package errors."""


class DataError(CmifsError, ValueError):
    """Bad input data or arguments (CLI exit code 4)."""


class GenerationError(CmifsError):
    """A synthetic generator could not produce a sample (CLI exit code 3)."""


class PropertyViolation(CmifsError):
    """A checked invariant does not hold (CLI exit code 1)."""


class MissingColumn(DataError):
    pass


class NonNumericCell(DataError):
    def __init__(self, row: int, col: str, value: str):
        super().__init__(f"non-numeric cell at row {row}, column {col!r}: {value!r}")
        self.row = row
        self.col = col
        self.value = value


class EmptyFile(DataError):
    pass


class TargetBoundViolated(DataError):
    pass


class IndexOutOfRange(DataError, IndexError):
    pass


class DegenerateSplit(DataError):
    pass


class NonPositiveArgument(DataError):
    pass


class TooFewSamples(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class WrongTaskKind(DataError):
    pass


class OutOfRange(DataError):
    pass


class NegativeInput(DataError):
    pass


class SingularCovariance(DataError):
    pass


class ZeroVarianceColumn(DataError):
    def __init__(self, columns):
        self.columns = tuple(int(c) for c in columns)
        super().__init__(f"zero-variance columns: {list(self.columns)}")


class WrongRuleVariant(DataError):
    pass


class EmptyFeatureSet(DataError):
    pass


class NormalizationError(PropertyViolation, ValueError):
    """A probability table does not sum to one."""


class RejectionStall(GenerationError):
    pass
