"""Exception hierarchy shared across the package."""


class StereoRectError(Exception):
    """Base class for all stereorect errors."""


class DegenerateProjection(StereoRectError):
    """3D point lies on the camera focal plane; projection undefined."""


class PointAtInfinity(StereoRectError):
    """Homogeneous point has |w| below the dehomogenization threshold."""


class SingularHomography(StereoRectError):
    """A 3x3 transform expected to be invertible is (numerically) singular."""


class RankDeficient(StereoRectError):
    """Matrix rank is lower than the operation requires."""


class ZeroDenominator(StereoRectError):
    """All denominator terms of a per-pair residual vanish."""


class ZeroLength(StereoRectError):
    """A measured segment is too short to define a direction or ratio."""


class DegenerateQuadrilateral(StereoRectError):
    """Mapped corner quadrilateral collapsed (collinear or coincident corners)."""


class DegenerateConfiguration(StereoRectError):
    """Correspondences do not constrain the fundamental matrix (collinear/duplicated)."""


class InsufficientInliers(StereoRectError):
    """RANSAC consensus is smaller than the minimal sample size."""


class NonFiniteResidual(StereoRectError):
    """Residual vector evaluated to NaN/Inf at the requested parameters."""


class TooFewVisiblePoints(StereoRectError):
    """Synthetic scene sampling could not place enough points in both frusta."""


class FocalRangeWarning(UserWarning):
    """Focal-deviation parameter was clamped to its supported range."""
