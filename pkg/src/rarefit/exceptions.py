"""Exception types raised across the package."""


class DataError(ValueError):
    """Input data violates a structural requirement (shapes, types, classes)."""


class RankDeficiencyError(DataError):
    """The design matrix is not of full column rank.

    Carries the zero-based indices of the redundant columns in
    ``columns`` so callers can name them.
    """

    def __init__(self, columns, message=None):
        self.columns = tuple(int(c) for c in columns)
        if message is None:
            message = (
                "design matrix is rank deficient; redundant column indices: "
                f"{list(self.columns)}"
            )
        super().__init__(message)


class SingularInformationError(ValueError):
    """The Fisher information matrix has a non-positive pivot.

    Distinguishes genuine rank problems from probabilities drifting to the
    boundary of the unit interval.
    """


class ConvergenceError(RuntimeError):
    """An iterative fit did not meet its tolerance within the allowed steps."""
