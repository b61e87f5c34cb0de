"""Exception types shared across the package."""


class MrQuantileError(Exception):
    """Base class for all mrquantile errors."""


class MissingColumnError(MrQuantileError):
    """A required column is absent from an input file header."""


class MalformedRowError(MrQuantileError):
    """A data row failed validation; carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class EmptyFileError(MrQuantileError):
    """An input file contains no data rows."""


class NoOverlapError(MrQuantileError):
    """Harmonization retained zero variants."""


class AllInstrumentsDroppedError(MrQuantileError):
    """Every instrument was removed by the ratio-stage filters."""


class EmptyInputError(MrQuantileError):
    """An operation received an empty vector."""


class NonPositiveWeightError(MrQuantileError):
    """Weights must be strictly positive and finite."""


class DegenerateFitError(MrQuantileError):
    """The weighted check-loss sum collapsed to zero (inverse scale diverges)."""


class TooFewInstrumentsError(MrQuantileError):
    """An estimator was given fewer instruments than it requires."""


class TooFewBootstrapReplicatesError(MrQuantileError):
    """A bootstrap standard error needs at least two replicates."""


class TooManyFailedReplicatesError(MrQuantileError):
    """More than 5% of bootstrap replicates failed to fit."""
