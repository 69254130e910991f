"""Exception types raised across the package."""


class OamCorrError(Exception):
    """Base class for all package errors."""


class GridMismatch(OamCorrError):
    """Two sampled fields live on different grids."""


class UnresolvedMode(OamCorrError):
    """Requested mode cannot be represented on the given grid."""


class CaptureTooLow(OamCorrError):
    """Output basis captures less power than the configured floor."""

    def __init__(self, captured, floor):
        super().__init__(
            f"captured power {captured:.4f} below floor {floor:.4f}; "
            "enlarge the output basis or the grid window"
        )
        self.captured = captured
        self.floor = floor


class ZeroBlock(OamCorrError):
    """Requested sub-block carries (numerically) no weight."""


class InvalidCount(OamCorrError):
    """Measurement count outside the valid range."""


class DimensionMismatch(OamCorrError):
    """Operator and state dimensions disagree."""


class AllBelowThreshold(OamCorrError):
    """No eigenvalue survives the threshold; iteration cannot proceed."""


class NotConverged(OamCorrError):
    """Reconstruction hit the iteration cap before meeting the tolerance.

    Carries the last iterate so callers can inspect or salvage it.
    """

    def __init__(self, message, iterate=None, residual=None, iterations=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual
        self.iterations = iterations


class RankAmbiguous(OamCorrError):
    """Density matrix is too far from rank one for state extraction."""


class ZeroPivot(OamCorrError):
    """No usable pivot element for column-division extraction."""


class DegenerateColumn(OamCorrError):
    """An assembled channel-matrix column has (numerically) zero norm."""


class ZeroTrace(OamCorrError):
    """Corrected state has vanishing trace; inversion is meaningless."""
