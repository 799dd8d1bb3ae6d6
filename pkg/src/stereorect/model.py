"""Generalized 9-parameter rectifying-homography model.

Each side of a stereo pair is rectified by H = K_new T(t_y) R K_old^{-1}:
a rotation of the camera about its optical center, a vertical translation
of the center, and a focal-length change, all expressed in image space.
The left camera has no x-rotation parameter (fixed 0), and the new
intrinsics of BOTH sides copy the current left old intrinsics so the two
rectified images share a vertical focal length and principal row.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields

import numpy as np

from .errors import FocalRangeWarning, SingularHomography
from .geometry import CameraIntrinsics, fundamental_from_homographies

# alpha = (width + height) * FOCAL_BASE ** delta_f; delta_f = 0 gives a
# plausible mid-range focal and any real delta_f keeps alpha positive.
FOCAL_BASE = 3.0
DELTA_F_LIMIT = 1.5

PARAM_NAMES = (
    "theta_yl", "theta_zl",
    "theta_xr", "theta_yr", "theta_zr",
    "t_yl", "t_yr",
    "delta_fl", "delta_fr",
)


@dataclass(frozen=True)
class RigDims:
    """Pixel dimensions shared by both images of the pair."""

    width: float
    height: float

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")


@dataclass(frozen=True)
class RectParams:
    """The 9-dimensional rectification parameter vector.

    Angles are radians; t_y values are normalized vertical translations
    (pixel effect is roughly alpha * t_y); delta_f values are log-scale
    focal deviations (alpha = (w+h) * 3**delta_f).  theta_xl is
    structurally absent and fixed to zero.
    """

    theta_yl: float = 0.0
    theta_zl: float = 0.0
    theta_xr: float = 0.0
    theta_yr: float = 0.0
    theta_zr: float = 0.0
    t_yl: float = 0.0
    t_yr: float = 0.0
    delta_fl: float = 0.0
    delta_fr: float = 0.0

    def __post_init__(self) -> None:
        for f in fields(self):
            if not np.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    @staticmethod
    def from_array(values: np.ndarray) -> "RectParams":
        values = np.asarray(values, dtype=float).reshape(len(PARAM_NAMES))
        return RectParams(**{n: float(v) for n, v in zip(PARAM_NAMES, values)})

    @staticmethod
    def zero() -> "RectParams":
        return RectParams()

    def to_dict(self) -> dict:
        return {n: float(getattr(self, n)) for n in PARAM_NAMES}


def old_intrinsics(dims: RigDims, delta_f: float) -> CameraIntrinsics:
    """Intrinsics of one (virtual) original camera.

    alpha = (w + h) * 3**delta_f with the principal point at the image
    center.  delta_f outside [-1.5, 1.5] is clamped with a warning.
    """
    if abs(delta_f) > DELTA_F_LIMIT:
        warnings.warn(
            f"delta_f={delta_f:.4g} clamped to [-{DELTA_F_LIMIT}, {DELTA_F_LIMIT}]",
            FocalRangeWarning,
            stacklevel=2,
        )
        delta_f = float(np.clip(delta_f, -DELTA_F_LIMIT, DELTA_F_LIMIT))
    alpha = (dims.width + dims.height) * FOCAL_BASE ** delta_f
    return CameraIntrinsics(alpha, dims.width, dims.height)


def rotation(theta_x: float, theta_y: float, theta_z: float) -> np.ndarray:
    """Rotation matrix composed as R_x(theta_x) @ R_y(theta_y) @ R_z(theta_z)."""
    cx, sx = np.cos(theta_x), np.sin(theta_x)
    cy, sy = np.cos(theta_y), np.sin(theta_y)
    cz, sz = np.cos(theta_z), np.sin(theta_z)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    return rx @ ry @ rz


def _side_rotation(side: str, params: RectParams) -> np.ndarray:
    if side == "left":
        return rotation(0.0, params.theta_yl, params.theta_zl)
    return rotation(params.theta_xr, params.theta_yr, params.theta_zr)


def homography(side: str, params: RectParams, dims: RigDims) -> np.ndarray:
    """Rectifying homography K_new @ T(t_y) @ R @ K_old^{-1} for one side.

    K_new copies the current LEFT old intrinsics for both sides; K_old
    uses the side's own delta_f.  Zero parameters give the exact identity.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    t_y = params.t_yl if side == "left" else params.t_yr
    delta_old = params.delta_fl if side == "left" else params.delta_fr

    k_new = old_intrinsics(dims, params.delta_fl)
    k_old = old_intrinsics(dims, delta_old)

    core = _side_rotation(side, params)
    core = core.copy()
    core[1] += t_y * core[2]  # T(t_y) applied after the rotation

    # Compose (K_new @ core) @ K_old^{-1} by explicit column operations so
    # that zero parameters yield the identity matrix exactly.
    m = k_new.as_matrix() @ core
    m[:, 0] /= k_old.alpha
    m[:, 1] /= k_old.alpha
    m[:, 2] = m[:, 2] - (dims.width / 2.0) * m[:, 0] - (dims.height / 2.0) * m[:, 1]

    if abs(np.linalg.det(m)) < 1e-12:
        raise SingularHomography("rectifying homography is singular")
    return m


def homography_pair(params: RectParams, dims: RigDims) -> tuple[np.ndarray, np.ndarray]:
    return homography("left", params, dims), homography("right", params, dims)


def induced_fundamental(params: RectParams, dims: RigDims) -> np.ndarray:
    """Fundamental matrix induced by the parameterized homography pair."""
    h_left, h_right = homography_pair(params, dims)
    return fundamental_from_homographies(h_left, h_right)


@dataclass(frozen=True)
class HomographyPair:
    """Two rectifying transforms and their induced fundamental matrix."""

    h_left: np.ndarray
    h_right: np.ndarray
    fundamental: np.ndarray

    @staticmethod
    def from_params(params: RectParams, dims: RigDims) -> "HomographyPair":
        h_left, h_right = homography_pair(params, dims)
        return HomographyPair(h_left, h_right, fundamental_from_homographies(h_left, h_right))
