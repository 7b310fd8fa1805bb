"""Exception hierarchy shared across the toolkit.

Two families matter for exit-code mapping: :class:`InputError` covers
anything a caller could have prevented (bad arguments, malformed files,
invalid configuration) and maps to exit code 1; :class:`ComputeError`
covers numerical failures on well-formed input (degenerate geometry,
no overlap) and maps to exit code 2.
"""


class InputError(ValueError):
    """Invalid argument, configuration value or file content."""


class ConstraintError(InputError):
    """A value violates a structural constraint (e.g. non-unit dual quaternion)."""


class EmptyTrajectoryError(InputError):
    """A sampling configuration produced no poses."""


class ParseError(InputError):
    """A file could not be parsed; message carries byte offset or row number."""

    def __init__(self, message: str, *, offset: int | None = None, row: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.offset = offset
        self.row = row


class ComputeError(RuntimeError):
    """Numerical failure on structurally valid input."""


class RankDeficiencyError(ComputeError):
    """A linear system is rank deficient (degenerate point/motion configuration)."""


class NoOverlapError(ComputeError):
    """Registration found no correspondences within the search distance."""
