"""Exception types shared across the package.

Every failure mode that callers are expected to handle has its own class so
tests and the command-line front end can distinguish "could not compute"
from "computed but failed verification".
"""

from __future__ import annotations


class HamforgeError(Exception):
    """Base class for all package-specific errors."""


class DegeneracyError(HamforgeError):
    """A perturbative expansion was requested at a (nearly) degenerate level.

    Carries the colliding level indices so callers can report them.
    """

    def __init__(self, level: int, colliding: list[int], gap: float):
        self.level = level
        self.colliding = list(colliding)
        self.gap = gap
        super().__init__(
            f"level {level} is degenerate with level(s) {self.colliding} "
            f"(gap {gap:.3e})"
        )


class OrderOverflowError(HamforgeError):
    """An expansion order beyond the supported maximum was requested."""

    def __init__(self, requested: int, maximum: int):
        self.requested = requested
        self.maximum = maximum
        super().__init__(
            f"expansion order {requested} exceeds the supported maximum {maximum}"
        )


class DecompositionError(HamforgeError):
    """Eigendecomposition failed to converge.

    Carries a short hash of the input matrix so the failing case can be
    located in logs without dumping the matrix itself.
    """

    def __init__(self, matrix_hash: str, detail: str = ""):
        self.matrix_hash = matrix_hash
        msg = f"eigendecomposition did not converge (matrix sha1 {matrix_hash})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class BranchTrackingError(HamforgeError):
    """Eigenvalue branch tracking lost continuity along the fit grid."""

    def __init__(self, overlap: float, radius: float):
        self.overlap = overlap
        self.radius = radius
        super().__init__(
            f"branch crossing detected (overlap {overlap:.3f} < 0.5) at grid "
            f"radius {radius:.3e}; retry with a smaller radius"
        )


class BranchIdentificationError(HamforgeError):
    """The perturbed branch of a non-Hermitian spectrum is ambiguous."""

    def __init__(self, best: float, second: float):
        self.best = best
        self.second = second
        super().__init__(
            f"branch identification ambiguous: top overlaps {best:.3f} and "
            f"{second:.3f} are within 0.1"
        )


class ConstraintShapeError(HamforgeError):
    """A coupling operator violates the structural shape of a constraint set."""


class UnsupportedDimensionError(HamforgeError):
    """An operation that needs a qubit register got a non-power-of-two dim."""


class NoiseTooLargeError(HamforgeError):
    """Monte Carlo rejection rate exceeded the supported bound."""

    def __init__(self, rejected: int, total: int):
        self.rejected = rejected
        self.total = total
        super().__init__(
            f"rejected {rejected} of {total} noise samples (> 10%); "
            f"the noise level is too large for this configuration"
        )


class ResourceLimitError(HamforgeError):
    """A requested computation exceeds the documented soft size limits."""


class ConfigError(HamforgeError):
    """A run configuration file is missing, unparseable, or invalid."""
