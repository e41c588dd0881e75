"""Exception and warning types shared across the toolkit."""


class VrftLabError(Exception):
    """Base class for all toolkit errors."""


# --- transfer functions / filtering ---

class ImproperFilter(VrftLabError):
    """Numerator degree exceeds denominator degree in a causal simulation."""


class SamplePeriodMismatch(VrftLabError):
    """Two objects with different sample periods were combined."""


class PoleOnUnitCircle(VrftLabError):
    """Frequency response requested at (numerically) a pole."""


class UnstableSystem(VrftLabError):
    """Operation requires a stable transfer function."""


class ZeroDenominator(VrftLabError):
    """Denominator polynomial is identically zero."""


class UnstableInversionWarning(UserWarning):
    """Inverse filtering through a non-minimum-phase transfer function."""


# --- plant simulation ---

class StateOutOfRange(VrftLabError):
    """Plant state left the sanity bounds."""


class UnstableLoop(VrftLabError):
    """Closed-loop simulation diverged."""


class LengthTooShort(VrftLabError):
    """A signal or dataset is too short for the requested operation."""


class ParseError(VrftLabError):
    """Malformed CSV input; carries the offending row number."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class NonMonotonicTimestamps(VrftLabError):
    """Weather CSV timestamps are not strictly increasing."""


# --- synthesis ---

class DegenerateBandwidth(VrftLabError):
    """Reference-model pole collapsed onto the unit circle."""


class RankDeficient(VrftLabError):
    """Regressor is (numerically) rank deficient; data is not exciting."""


class AlreadyPrefiltered(VrftLabError):
    """Dataset has already been pre-filtered; refusing to filter twice."""


class NotPrefiltered(VrftLabError):
    """Operation requires a pre-filtered dataset."""


# --- metrics ---

class EmptySeries(VrftLabError):
    """A metric was requested on an empty series."""


class SeriesTooShort(VrftLabError):
    """Series too short for a spectral estimate."""


class TooFewRuns(VrftLabError):
    """Batch statistics need at least two runs."""


# --- CLI / orchestration ---

class ConfigError(VrftLabError):
    """Invalid configuration file or command-line arguments."""


class MissingArtifacts(VrftLabError):
    """Report generation could not find required input files."""

    def __init__(self, missing: list[str]):
        super().__init__("missing artifacts: " + ", ".join(missing))
        self.missing = list(missing)
