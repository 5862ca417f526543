"""Exception types shared across the package.

Every error raised by otrom derives from :class:`OtromError`, so callers can
catch the package family with one clause.  The CLI maps subfamilies to exit
codes (config 2, missing artifact 3, numerical 4).
"""


class OtromError(Exception):
    """Base class for all otrom errors."""


# --- measure / field conversion ---------------------------------------------

class AllZeroField(OtromError):
    """Snapshot has zero L1 mass and cannot be converted to measures."""


class IndexOutOfGrid(OtromError):
    """A support index does not address a cell of the target grid."""


# --- transport ----------------------------------------------------------------

class ShapeMismatch(OtromError):
    """Operand shapes are inconsistent."""


class NotConverged(OtromError):
    """Sinkhorn exhausted its iteration budget at the final epsilon level.

    Carries the best plan found and its marginal violation.
    """

    def __init__(self, message, plan=None, violation=None):
        super().__init__(message)
        self.plan = plan
        self.violation = violation


class NumericalOverflow(OtromError):
    """A dual potential or plan entry became non-finite."""


class TooLarge(OtromError):
    """Instance exceeds the desk-scale bound of the exact LP oracle."""


# --- interpolation ------------------------------------------------------------

class InvalidAlpha(OtromError):
    """Interpolation parameter outside [0, 1]."""


class IntervalOutOfRange(OtromError):
    """Interval index outside [0, N_c - 2]."""


# --- pod ------------------------------------------------------------------------

class EmptyMatrix(OtromError):
    """Snapshot matrix has no columns (or rows)."""


class ZeroNorm(OtromError):
    """Reference vector has zero norm where a relative error is requested."""


# --- gpr ------------------------------------------------------------------------

class DegenerateData(OtromError):
    """Training inputs do not contain at least two distinct points."""


class CholeskyFailure(OtromError):
    """Kernel matrix not positive definite after maximal jitter escalation."""


# --- rom ------------------------------------------------------------------------

class TimeOutOfDomain(OtromError):
    """Query time outside [0, t_f]."""


class TooFewSnapshots(OtromError):
    """Checkpoint rounding produced duplicate indices."""


class InvalidCounts(OtromError):
    """Inconsistent snapshot/checkpoint counts."""


class EmptyDictionary(OtromError):
    """MinL2 fitting found no dictionary entries to match against."""


class NoCorrector(OtromError):
    """Corrected inference requested on a model trained without correction."""


class ZeroReferenceNorm(OtromError):
    """Error metric requested against a zero reference snapshot."""


class InvalidFieldSign(OtromError):
    """Field violates the configured sign-handling strategy."""


# --- fomgen ---------------------------------------------------------------------

class CflViolation(OtromError):
    """Advective or diffusive stability bound violated."""


class UnsupportedSpec(OtromError):
    """Requested configuration not supported by this generator."""


# --- io -------------------------------------------------------------------------

class IoError(OtromError):
    """Underlying file operation failed."""


class BadMagic(IoError):
    """File does not start with the expected magic bytes."""


class VersionMismatch(IoError):
    """File format version not supported by this build."""


class TruncatedFile(IoError):
    """File payload shorter than its header promises."""


# --- cli ------------------------------------------------------------------------

class ConfigInvalid(OtromError):
    """Run configuration failed schema validation."""


class MissingArtifact(OtromError):
    """A required on-disk artifact from an earlier stage is absent."""
