"""Semantic exception hierarchy shared by all vdpt modules."""


class VdptError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(VdptError):
    """Operand dimensions are incompatible."""


class NotPositiveDefinite(VdptError):
    """A Cholesky pivot was non-positive; caller should increase jitter."""


class DegenerateInput(VdptError):
    """Input has no variation (constant vector, zero spread, ...)."""


class NonFiniteGradient(VdptError):
    """A gradient contained NaN or Inf; the step was aborted."""


class ParseError(VdptError):
    """CSV cell failed to parse; carries row/column location."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class MissingLabel(ParseError):
    """Label cell is empty."""


class InvalidLabel(MissingLabel):
    """Label cell is present but not binary 0/1."""


class AllMissingFeature(VdptError):
    """A feature has no observed values; imputation cannot proceed."""


class InvalidSpec(VdptError):
    """A shift spec names an unknown feature or has out-of-range values."""


class TooFewMinority(VdptError):
    """SMOTE requires more minority samples than neighbours."""


class NotFitted(VdptError):
    """Standardization (or another fitted transform) was applied before fit."""


class NotTrained(VdptError):
    """Operation requires a trained model."""


class MaxIterExceeded(VdptError):
    """Iterative solver hit its iteration cap (result still attached)."""


class EmptySubsample(VdptError):
    """Influence aggregation subsample is empty."""


class TooFewSamples(VdptError):
    """Statistical test needs more observations."""


class ZeroExpected(VdptError):
    """Chi-square expected count is zero."""


class SchemaMismatch(VdptError):
    """Cohorts do not share compatible feature schemas."""


class SingleClass(VdptError):
    """AUC metrics need both classes present."""


class TooFewPerClass(VdptError):
    """Stratified folding needs at least k instances per class."""
