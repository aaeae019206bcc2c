"""Exception and warning types shared across the toolkit."""

from __future__ import annotations


class MfgpkitError(Exception):
    """Base class for all toolkit errors."""


class DataError(MfgpkitError):
    """Malformed input data or an unusable configuration of it."""


class MissingColumnError(DataError):
    def __init__(self, column: str) -> None:
        super().__init__(f"column {column!r} not found in header")
        self.column = column


class NonNumericCellError(DataError):
    """A cell that should hold a real number does not parse as one.

    ``row`` is the 0-based data-row index (the header is not counted),
    ``column`` is the column name.
    """

    def __init__(self, row: int, column: str, value: str) -> None:
        super().__init__(f"non-numeric value {value!r} at row {row}, column {column!r}")
        self.row = row
        self.column = column
        self.value = value


class EmptyFileError(DataError):
    def __init__(self, path: str) -> None:
        super().__init__(f"{path}: no header row found")
        self.path = path


class EmptyReferenceError(DataError):
    """The normalization reference subset contains no rows."""


class NumericalError(MfgpkitError):
    """A model could not be computed for numerical reasons."""


class NotPositiveDefiniteError(NumericalError):
    def __init__(self, jitter_cap: float) -> None:
        super().__init__(
            f"matrix is not positive definite even with jitter {jitter_cap:g} on the diagonal"
        )
        self.jitter_cap = jitter_cap


class AllRestartsFailedError(NumericalError):
    def __init__(self, n_restarts: int) -> None:
        super().__init__(f"all {n_restarts} optimizer restarts failed")
        self.n_restarts = n_restarts


class NotNestedError(NumericalError):
    """A fidelity level contains inputs with no exact lower-level counterpart."""

    def __init__(self, level_index: int, n_missing: int) -> None:
        super().__init__(
            f"level {level_index} has {n_missing} training input(s) missing from the level "
            f"below; run ensure_nested first"
        )
        self.level_index = level_index
        self.n_missing = n_missing


class ConstantColumnWarning(UserWarning):
    """A column with a single distinct value was mapped to one bin / zero."""


class ZeroRangeWarning(UserWarning):
    """A normalized column had max == min and was mapped to 0.0."""


class UnnormalizedFeaturesWarning(UserWarning):
    """Training features stray well outside the expected [0, 1] range."""


class ClampedVarianceWarning(UserWarning):
    """A predictive variance was negative beyond roundoff and clamped to 0."""
