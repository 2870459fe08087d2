"""Exception hierarchy shared across the package.

Every error raised by the library derives from YamabeLabError so callers
(and the CLI) can distinguish library failures from programming errors.
"""


class YamabeLabError(Exception):
    """Base class for all library errors."""


# --- geometry / curvature evaluation ---------------------------------------

class OutOfSupport(YamabeLabError):
    """Requested point is outside a sampled field's usable support."""


class NonFinite(YamabeLabError):
    """A finite-difference stencil touched non-finite samples."""


class NonpositiveConformalFactor(YamabeLabError):
    """Curvature of v^-2 g requested where v <= 0."""


class PoleCollision(YamabeLabError):
    """An excised region contains the projection pole and no admissible
    rotation is configured."""


# --- closed forms ------------------------------------------------------------

class OutsideDomain(YamabeLabError):
    """Point lies outside a closed form's natural domain."""


# --- solver ------------------------------------------------------------------

class NewtonDiverged(YamabeLabError):
    """Residual failed to drop after exhausting the damping budget."""


class BracketViolation(YamabeLabError):
    """Solution left the sub/supersolution bracket; indicates a
    discretization or data bug."""


class BracketOrderViolation(YamabeLabError):
    """Supplied lower barrier exceeds the upper barrier somewhere."""


class NonConvergence(YamabeLabError):
    """Bracketing sweep stalled before reaching tolerance."""


class InvalidTube(YamabeLabError):
    """Tube codimension parameter outside the solvable window."""


class AxisSingularity(YamabeLabError):
    """Axis stencil produced non-finite values."""


# --- schedules / fits ---------------------------------------------------------

class NonMonotoneSchedule(YamabeLabError):
    """Exhaustion radii are not strictly decreasing."""


class OverlappingExclusions(YamabeLabError):
    """Excised regions overlap (or touch) for some schedule index."""


class DegenerateBasis(YamabeLabError):
    """Least-squares basis Gram matrix is numerically singular."""


# --- probes -------------------------------------------------------------------

class PathOutsideDomain(YamabeLabError):
    """Probe path never enters the solved domain."""


class InterpolationFailure(YamabeLabError):
    """Too few valid samples around a path point to interpolate."""


class RadiusTooSmall(YamabeLabError):
    """Arc radius below the 4x chord-length minimum."""


# --- scenario / io -------------------------------------------------------------

class SchemaError(YamabeLabError):
    """Scenario text violates the schema.

    Carries the full list of violations, each "key.path: reason".
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class IoError(YamabeLabError):
    """Report/cache file could not be read or written."""


class MissingReport(YamabeLabError):
    """Report requested from a directory without run.csv."""
