"""Error taxonomy shared by all layers.

Every failure raised by this package derives from :class:`RomDbError` and
carries a stable ``taxonomy`` name. The CLI prints that name on exit 1 and
the HTTP service returns it in error bodies, so the set of names below is
part of the public contract.
"""

from __future__ import annotations


class RomDbError(Exception):
    """Base class for all package errors."""

    taxonomy = "romdb_error"


class InvalidInputError(RomDbError):
    """Malformed numerical input: wrong shape, non-finite entries, broken precondition."""

    taxonomy = "invalid_input"


class NotSpdError(RomDbError):
    """Matrix is not symmetric positive definite.

    ``pivot`` is the 0-based index of the first failing Cholesky pivot.
    """

    taxonomy = "not_spd"

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class SingularMatrixError(RomDbError):
    """Matrix singular to working tolerance; carries a condition estimate."""

    taxonomy = "singular_matrix"

    def __init__(self, message, cond_estimate=None):
        super().__init__(message)
        self.cond_estimate = cond_estimate


class LogUndefinedError(RomDbError):
    """Principal matrix logarithm undefined (eigenvalue on the closed negative real axis)."""

    taxonomy = "log_undefined"


class InvalidBasisError(RomDbError):
    """Reduced-order basis violates its orthonormality contract."""

    taxonomy = "invalid_basis"


class RankDeficiencyError(RomDbError):
    """Snapshot set has lower rank than the requested basis dimension."""

    taxonomy = "rank_deficiency"

    def __init__(self, message, achievable=None):
        super().__init__(message)
        self.achievable = achievable


class ResonanceError(RomDbError):
    """Shifted operator singular at a wavenumber/frequency."""

    taxonomy = "resonance"

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class MeshMismatchError(RomDbError):
    """Records have different underlying state dimensions; use a fixed-point mode."""

    taxonomy = "mesh_mismatch"


class ManifoldViolationError(RomDbError):
    """A database entry (or interpolant) does not belong to the declared manifold."""

    taxonomy = "manifold_violation"

    def __init__(self, message, record_index=None):
        super().__init__(message)
        self.record_index = record_index


class DegenerateFactorError(RomDbError):
    """Interpolated Cholesky factor has a zero diagonal entry."""

    taxonomy = "degenerate_factor"


class ExtrapolationError(RomDbError):
    """Query target outside the interpolation stencil (extrapolation not opted in)."""

    taxonomy = "extrapolation"


class OutOfDomainError(RomDbError):
    """Parameter point outside the database domain box."""

    taxonomy = "out_of_domain"


class InconsistentDatabaseError(RomDbError):
    """Interpolation requested on a database whose records were never aligned."""

    taxonomy = "inconsistent_database"


class SlotInterpolationError(RomDbError):
    """Interpolation of one operator slot failed; wraps the underlying error."""

    def __init__(self, slot, cause):
        super().__init__(f"slot {slot}: {cause}")
        self.slot = slot
        self.cause = cause

    @property
    def taxonomy(self):
        return getattr(self.cause, "taxonomy", "slot_interpolation")


class PointBuildError(RomDbError):
    """ROM construction failed at one database point; wraps the underlying error."""

    def __init__(self, point, cause):
        super().__init__(f"build failed at point {list(point)}: {cause}")
        self.point = point
        self.cause = cause

    @property
    def taxonomy(self):
        return getattr(self.cause, "taxonomy", "point_build")


class InsufficientCoverageError(RomDbError):
    """A sub-database has fewer points than its scheme's minimum stencil."""

    taxonomy = "insufficient_coverage"


class LoadError(RomDbError):
    """Database container failed to load; ``field`` names the offending item."""

    taxonomy = "load_error"

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class InvalidSpecError(RomDbError):
    """Declarative family/problem specification is malformed."""

    taxonomy = "invalid_spec"


class InvalidDomainError(RomDbError):
    """Parameter domain malformed (e.g. zero-width axis)."""

    taxonomy = "invalid_domain"


class NoCrossingError(RomDbError):
    """Stability sweep found no sign change of the leading eigenvalue."""

    taxonomy = "no_crossing"
