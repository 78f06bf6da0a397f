"""Exception types shared across the package.

Grouped by where they surface so the CLI can map them to exit codes:
data/format problems -> exit 3, numeric/infeasibility problems -> exit 4.
"""


class DagselError(Exception):
    """Base class for all package errors."""


# ---- graph construction ----

class CycleError(DagselError):
    """Graph contains a cycle; message names one offending edge."""


class DanglingEdgeError(DagselError):
    """Edge references a node index outside the graph."""


class NoObservationError(DagselError):
    """A per-sample statistic was requested but no entry is observed."""


# ---- program parsing ----

class ProgramSyntaxError(DagselError):
    """Malformed program text; carries 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, col {column}: {message}")
        self.line = line
        self.column = column


class UnknownFunctionError(DagselError):
    """Program line calls a function that is not a zoo subtask type."""


class UndefinedReferenceError(DagselError):
    """Program line references an output name not defined earlier."""


# ---- feature / parameter I/O ----

class FormatError(DagselError):
    """File content does not match the expected schema."""


class DimensionMismatchError(FormatError):
    """Vectors in one store do not share a dimension."""


class DuplicateIdError(FormatError):
    """The same sample id appears twice."""


class MissingFeatureError(DagselError):
    """A sample's feature vector is absent from the store."""


class JoinError(DagselError):
    """Dataset files disagree on which samples exist."""


class SpecError(DagselError):
    """Invalid synthetic-benchmark specification."""


class VersionError(DagselError):
    """Checkpoint was written by an incompatible format version."""


# ---- numerics / selection ----

class ShapeError(DagselError):
    """Array arguments have inconsistent shapes."""


class NonFiniteLossError(DagselError):
    """Training produced a NaN or infinite loss."""


class InvalidChoiceError(DagselError):
    """A joint assignment is out of range for the zoo."""


class InfeasibleBudgetError(DagselError):
    """A time budget leaves some subtask type with no candidate model."""


class NoDataError(DagselError):
    """An estimator needs observed outcomes but none exist."""


class UnobservedOutcomeError(DagselError):
    """Evaluation needs the outcome of a choice that was never recorded."""
