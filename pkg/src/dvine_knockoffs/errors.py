"""Exception and warning types shared across the package."""


class DvineKnockoffsError(Exception):
    """Base class for all package errors."""


class DomainError(DvineKnockoffsError):
    """An input lies outside the mathematically valid domain."""


class InvalidParameter(DvineKnockoffsError):
    """A copula parameter lies outside the family's admissible domain."""


class UnattainableTau(DvineKnockoffsError):
    """No parameter of the requested family/rotation achieves the target tau."""


class ConvergenceError(DvineKnockoffsError):
    """An iterative solver exhausted its budget without converging."""


class DegenerateData(DvineKnockoffsError):
    """Data unusable for estimation (e.g. a constant column)."""


class DimensionError(DvineKnockoffsError):
    """Array dimensions incompatible with the requested operation."""


class SingularCovariance(DvineKnockoffsError):
    """Covariance estimate not invertible even after ridge repair."""


class TooFewMinoritySamples(DvineKnockoffsError):
    """Minority class too small for the requested oversampling."""


class ParseError(DvineKnockoffsError):
    """Malformed input file."""


class RaggedRows(ParseError):
    """CSV rows have inconsistent lengths."""


class NonNumericCell(ParseError):
    """A CSV cell could not be parsed as a number."""

    def __init__(self, row, col, value):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"non-numeric cell at row {row}, column {col}: {value!r}")


class RowFailure(DvineKnockoffsError):
    """Per-row knockoff sampling failed after retry."""

    def __init__(self, rows):
        self.rows = list(rows)
        super().__init__(f"inverse transform failed for rows {self.rows}")


class SeparationWarning(UserWarning):
    """Logistic fit hit the coefficient cap (likely perfect separation)."""
