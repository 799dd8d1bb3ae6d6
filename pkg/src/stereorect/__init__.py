"""Uncalibrated stereo rectification with constrained geometric distortions."""

__version__ = "0.1.0"

from .errors import StereoRectError
from .geometry import (
    RECTIFIED_F,
    CameraIntrinsics,
    CameraPose,
    epipole,
    fundamental_from_homographies,
    project,
)
from .imaging import RasterImage, overlay_scanlines, warp
from .matching import RansacConfig, estimate_fundamental_8pt, ransac_filter
from .metrics import (
    CorrespondenceSet,
    DistortionReport,
    full_report,
    sampson_error,
    vertical_disparity,
)
from .model import HomographyPair, RectParams, RigDims, homography, induced_fundamental
from .optimizer import SolverConfig, SolveResult, Thresholds, Weights, solve
from .synthgen import RigConfig, generate, make_suite

__all__ = [
    "__version__",
    "StereoRectError",
    "RECTIFIED_F",
    "CameraIntrinsics",
    "CameraPose",
    "epipole",
    "fundamental_from_homographies",
    "project",
    "RasterImage",
    "overlay_scanlines",
    "warp",
    "RansacConfig",
    "estimate_fundamental_8pt",
    "ransac_filter",
    "CorrespondenceSet",
    "DistortionReport",
    "full_report",
    "sampson_error",
    "vertical_disparity",
    "HomographyPair",
    "RectParams",
    "RigDims",
    "homography",
    "induced_fundamental",
    "SolverConfig",
    "SolveResult",
    "Thresholds",
    "Weights",
    "solve",
    "RigConfig",
    "generate",
    "make_suite",
]
