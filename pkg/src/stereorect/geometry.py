"""Pinhole-camera and two-view epipolar primitives.

Conventions used throughout the package:
  - image points are homogeneous 3-vectors ``(u, v, w)``, pixels after
    dehomogenization, 0-based, u right / v down;
  - matrices are ``numpy`` arrays of shape (3, 3);
  - a fundamental matrix ``F`` pairs correspondences as ``m_l^T F m_r = 0``
    with ``m_l`` in the left image and ``m_r`` in the right image.

All functions are pure; all dataclasses are frozen.  Nothing here mutates
its arguments, so everything is safe under arbitrary concurrency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjection, PointAtInfinity, RankDeficient, SingularHomography

# Homogeneous scale below which a point counts as "at infinity".
W_EPS = 1e-12

# Fundamental matrix of a perfectly rectified pair: m_l^T F m_r = v_r - v_l.
RECTIFIED_F = np.array([
    [0.0, 0.0, 0.0],
    [0.0, 0.0, -1.0],
    [0.0, 1.0, 0.0],
])


def homogenize(points: np.ndarray) -> np.ndarray:
    """Append a unit coordinate: (N, 2) pixel array -> (N, 3) homogeneous."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        return np.append(points, 1.0)
    return np.hstack([points, np.ones((points.shape[0], 1))])


def dehomogenize(v: np.ndarray) -> np.ndarray:
    """Divide out the homogeneous scale of one or many 3-vectors.

    Raises PointAtInfinity when |w| <= 1e-12 instead of silently
    producing NaN/Inf.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        if abs(v[2]) <= W_EPS:
            raise PointAtInfinity(f"homogeneous scale {v[2]!r} below threshold")
        return v[:2] / v[2]
    w = v[:, 2]
    if np.any(np.abs(w) <= W_EPS):
        raise PointAtInfinity("one or more points mapped to infinity")
    return v[:, :2] / w[:, None]


def scale_normalize(m: np.ndarray) -> np.ndarray:
    """Normalize a matrix or vector defined only up to scale.

    Divides by the entry of largest magnitude, with its sign, so two
    representatives of the same projective object compare equal.
    """
    m = np.asarray(m, dtype=float)
    flat = m.ravel()
    idx = int(np.argmax(np.abs(flat)))
    if flat[idx] == 0.0:
        return m.copy()
    return m / flat[idx]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Single-focal pinhole intrinsics with the principal point at the image center."""

    alpha: float
    width: float
    height: float

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError(f"focal length must be positive, got {self.alpha}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    def as_matrix(self) -> np.ndarray:
        return np.array([
            [self.alpha, 0.0, self.width / 2.0],
            [0.0, self.alpha, self.height / 2.0],
            [0.0, 0.0, 1.0],
        ])

    def inverse_matrix(self) -> np.ndarray:
        """Closed-form inverse of as_matrix()."""
        a = self.alpha
        return np.array([
            [1.0 / a, 0.0, -self.width / (2.0 * a)],
            [0.0, 1.0 / a, -self.height / (2.0 * a)],
            [0.0, 0.0, 1.0],
        ])


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform: x_cam = R x_world + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-10):
            raise ValueError("rotation is not orthonormal within 1e-10")

    @staticmethod
    def identity() -> "CameraPose":
        return CameraPose(np.eye(3), np.zeros(3))

    def center(self) -> np.ndarray:
        """Optical center in world coordinates.

        This is the point projecting to the zero vector, i.e. -R^{-1} t
        under the x_cam = R x + t convention.
        """
        return -self.rotation.T @ self.translation

    def matrix(self) -> np.ndarray:
        """The 3x4 extrinsic matrix [R | t]."""
        return np.hstack([self.rotation, self.translation[:, None]])


def project(intrinsics: CameraIntrinsics, pose: CameraPose, point_world: np.ndarray) -> np.ndarray:
    """Project a 3D world point to a homogeneous image point K [R|t] [x; 1].

    Raises DegenerateProjection when the point lies on the focal plane
    (third projected coordinate below 1e-12 in magnitude).
    """
    point_world = np.asarray(point_world, dtype=float).reshape(3)
    cam = pose.rotation @ point_world + pose.translation
    if abs(cam[2]) < 1e-12:
        raise DegenerateProjection("point lies on the camera focal plane")
    return intrinsics.as_matrix() @ cam


def project_pixel(intrinsics: CameraIntrinsics, pose: CameraPose, point_world: np.ndarray) -> np.ndarray:
    """Convenience wrapper returning the dehomogenized (u, v) pixel."""
    return dehomogenize(project(intrinsics, pose, point_world))


def fundamental_from_homographies(h_left: np.ndarray, h_right: np.ndarray) -> np.ndarray:
    """Fundamental matrix induced by a pair of rectifying homographies.

    Returns H_l^T @ RECTIFIED_F @ H_r, which satisfies m_l^T F m_r = 0
    whenever the transformed correspondences share an image row.
    """
    h_left = np.asarray(h_left, dtype=float)
    h_right = np.asarray(h_right, dtype=float)
    for name, h in (("left", h_left), ("right", h_right)):
        if abs(np.linalg.det(h)) < 1e-12:
            raise SingularHomography(f"{name} homography is singular")
    return h_left.T @ RECTIFIED_F @ h_right


def epipole(f: np.ndarray, side: str) -> np.ndarray:
    """Unit-norm null vector of F ('left') or of F^T ('right').

    Raises RankDeficient when rank(F) < 2, i.e. the second singular value
    is below 1e-10 times the largest.
    """
    f = np.asarray(f, dtype=float)
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    u, s, vt = np.linalg.svd(f)
    if s[1] < 1e-10 * s[0]:
        raise RankDeficient("matrix has rank < 2; epipole undefined")
    e = vt[-1] if side == "left" else u[:, -1]
    # fix an arbitrary but deterministic sign
    pivot = int(np.argmax(np.abs(e)))
    if e[pivot] < 0:
        e = -e
    return e


def epipolar_residuals(f: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Normalized algebraic residuals |m_l^T F m_r| / (|F| |m_l| |m_r|).

    ``left`` and ``right`` are (N, 2) pixel arrays.
    """
    f = np.asarray(f, dtype=float)
    ml = homogenize(left)
    mr = homogenize(right)
    raw = np.abs(np.einsum("ni,ij,nj->n", ml, f, mr))
    scale = np.linalg.norm(f) * np.linalg.norm(ml, axis=1) * np.linalg.norm(mr, axis=1)
    return raw / scale
