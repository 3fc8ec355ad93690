"""Exception and warning types shared across the package.

The CLI maps these onto exit codes (input errors -> 2, numeric errors -> 3,
verification mismatches -> 4), so library code should raise the most specific
type that applies.
"""


class EdhamError(Exception):
    """Base class for all package errors."""


class InputError(EdhamError, ValueError):
    """Caller-supplied data violates a precondition (bad shapes, non-finite
    entries, out-of-domain parameters, malformed files)."""


class NumericError(EdhamError, RuntimeError):
    """A numerical procedure failed to converge or produced an unusable
    result."""


class IllConditionedBasisError(NumericError):
    """Gram matrix of the basis is too ill-conditioned to invert reliably."""

    def __init__(self, cond, limit=None):
        self.cond = float(cond)
        self.limit = limit
        msg = f"basis Gram matrix condition number {self.cond:.3e}"
        if limit is not None:
            msg += f" exceeds limit {limit:.3e}"
        super().__init__(msg)


class DegenerateEnergyError(InputError):
    """Two basis energies coincide; the diagonal-metric construction assumes
    a non-degenerate spectrum."""


class DegenerateChargeError(NumericError):
    """Two basis states share a charge, so off-diagonal Coulomb elements
    cannot be reconstructed from overlaps."""


class BranchRefinementError(NumericError):
    """Eigenvector overlap between consecutive grid points fell below the
    tracking threshold; carries the offending sub-interval so the caller can
    halve the step."""

    def __init__(self, z_lo, z_hi, overlap):
        self.z_lo = float(z_lo)
        self.z_hi = float(z_hi)
        self.overlap = float(overlap)
        super().__init__(
            f"branch tracking lost continuity on [{z_lo:.6g}, {z_hi:.6g}] "
            f"(min overlap {overlap:.3f}); refine the grid there"
        )


class NearPoleError(NumericError):
    """Requested evaluation point lies within the guard band of a resolvent
    pole."""


class QuadratureError(NumericError):
    """Adaptive quadrature failed to converge; the message carries the panel
    diagnostics."""


class ModelInconsistencyError(NumericError):
    """An internal consistency identity failed, signalling a bug upstream."""


class VerificationError(EdhamError):
    """Oracle cross-check requested via --verify disagreed with the primary
    computation."""


class PrecisionWarning(UserWarning):
    """Result is returned but its accuracy may be degraded."""


class BoundaryRootWarning(UserWarning):
    """A fixed point was found at the edge of the scanned grid; the search
    window may clip further roots."""
