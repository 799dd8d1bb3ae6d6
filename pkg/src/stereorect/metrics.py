"""Scalar quality measures for rectification results.

Two families:
  - correspondence-based: Sampson error (first-order epipolar error) and
    vertical disparity (mean absolute row difference after rectification);
  - image-frame geometric distortion measures computed from how a
    homography moves the frame's corners, edge midpoints, and center:
    orthogonality, two aspect-ratio variants, skewness, rotation, size
    ratio.

The geometric measures are evaluated per side and averaged; ideal values
are E_O = 90 deg, E_A = E_AR = E_SR = 1, E_Sk = E_R = 0 deg.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateQuadrilateral, ZeroDenominator, ZeroLength
from .geometry import dehomogenize, fundamental_from_homographies, homogenize
from .model import RigDims


@dataclass(frozen=True)
class CorrespondenceSet:
    """Matched pixel pairs (ul, vl, ur, vr) plus the shared image dimensions."""

    dims: RigDims
    pairs: np.ndarray

    def __post_init__(self) -> None:
        pairs = np.asarray(self.pairs, dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 4:
            raise ValueError(f"pairs must be (N, 4), got {pairs.shape}")
        if not np.all(np.isfinite(pairs)):
            raise ValueError("correspondences must be finite")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return self.pairs.shape[0]

    @property
    def left(self) -> np.ndarray:
        return self.pairs[:, 0:2]

    @property
    def right(self) -> np.ndarray:
        return self.pairs[:, 2:4]

    def subset(self, mask: np.ndarray) -> "CorrespondenceSet":
        return CorrespondenceSet(self.dims, self.pairs[mask])


def sampson_residuals(f: np.ndarray, c: CorrespondenceSet) -> np.ndarray:
    """Signed per-pair Sampson residuals under m_l^T F m_r = 0.

    residual_j = (m_l^T F m_r) / sqrt((F m_r)_1^2 + (F m_r)_2^2
                                      + (F^T m_l)_1^2 + (F^T m_l)_2^2)

    Raises ZeroDenominator when all four denominator terms vanish for a
    pair (the point pair coincides with both epipoles).
    """
    f = np.asarray(f, dtype=float)
    ml = homogenize(c.left)
    mr = homogenize(c.right)
    lines_left = mr @ f.T        # row j: F @ m_r_j
    lines_right = ml @ f         # row j: F^T @ m_l_j
    num = np.einsum("nj,nj->n", ml, lines_left)
    den = (lines_left[:, 0] ** 2 + lines_left[:, 1] ** 2
           + lines_right[:, 0] ** 2 + lines_right[:, 1] ** 2)
    if np.any(den < 1e-300):
        raise ZeroDenominator("Sampson denominator vanished for a pair")
    return num / np.sqrt(den)


def sampson_error(f: np.ndarray, c: CorrespondenceSet) -> float:
    """Aggregate Sampson error E_s = (1/N) * sqrt(sum_j residual_j^2).

    Note the 1/N sits outside the square root (not an RMS); the aggregate
    is kept literal and only affects reporting, the optimizer works on
    the per-pair residuals.
    """
    res = sampson_residuals(f, c)
    return float(np.sqrt(np.sum(res ** 2)) / len(c))


def sampson_distances(f: np.ndarray, c: CorrespondenceSet) -> np.ndarray:
    """Unsigned per-pair Sampson distances in pixels."""
    return np.abs(sampson_residuals(f, c))


def map_points(h: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply a homography to (N, 2) pixels and dehomogenize."""
    return dehomogenize(homogenize(points) @ np.asarray(h, dtype=float).T)


def vertical_disparity(h_left: np.ndarray, h_right: np.ndarray, c: CorrespondenceSet) -> float:
    """Mean absolute row difference of transformed correspondences (pixels)."""
    yl = map_points(h_left, c.left)[:, 1]
    yr = map_points(h_right, c.right)[:, 1]
    return float(np.mean(np.abs(yl - yr)))


def _edge_midpoints(dims: RigDims) -> np.ndarray:
    w, h = dims.width, dims.height
    return np.array([
        [w / 2.0, 0.0],    # top
        [w, h / 2.0],      # right
        [w / 2.0, h],      # bottom
        [0.0, h / 2.0],    # left
    ])


def _corners(dims: RigDims) -> np.ndarray:
    w, h = dims.width, dims.height
    return np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])


def _angle_deg(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < 1e-9 or nv < 1e-9:
        raise ZeroLength("degenerate vector in angle computation")
    cosang = np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0)
    return float(np.degrees(np.arccos(cosang)))


def orthogonality(h: np.ndarray, dims: RigDims) -> float:
    """Angle in degrees between the mapped mid-edge axes (ideal 90)."""
    a, b, cc, d = map_points(h, _edge_midpoints(dims))
    return _angle_deg(b - d, cc - a)


def aspect_ratio_legacy(h: np.ndarray, dims: RigDims) -> float:
    """Transformed-to-original corner-diagonal length ratio (ideal 1)."""
    corners = _corners(dims)
    _, b_hat, _, d_hat = map_points(h, corners)
    a, _, cc, _ = corners
    orig = np.linalg.norm(cc - a)
    return float(np.linalg.norm(b_hat - d_hat) / orig)


def aspect_ratio_modified(h: np.ndarray, dims: RigDims) -> float:
    """Mean of opposing center-to-edge-midpoint length ratios (ideal 1).

    Detects asymmetric displacement of the image center that the legacy
    diagonal ratio misses.
    """
    w, hh = dims.width, dims.height
    pts = np.vstack([_edge_midpoints(dims), [w / 2.0, hh / 2.0]])
    a, b, cc, d, o = map_points(h, pts)
    top, right = np.linalg.norm(a - o), np.linalg.norm(b - o)
    bottom, left = np.linalg.norm(cc - o), np.linalg.norm(d - o)
    if bottom < 1e-9 or left < 1e-9:
        raise ZeroLength("center-to-midpoint segment collapsed")
    return float(0.5 * (top / bottom + right / left))


def skewness(h: np.ndarray, dims: RigDims) -> float:
    """Mean absolute deviation of the mapped corner angles from 90 deg."""
    quad = map_points(h, _corners(dims))
    if _shoelace_area(quad) < 1e-9:
        raise DegenerateQuadrilateral("mapped corners are collinear")
    total = 0.0
    for i in range(4):
        prev_pt = quad[(i - 1) % 4]
        here = quad[i]
        next_pt = quad[(i + 1) % 4]
        try:
            ang = _angle_deg(prev_pt - here, next_pt - here)
        except ZeroLength as exc:
            raise DegenerateQuadrilateral("coincident mapped corners") from exc
        total += abs(90.0 - ang)
    return total / 4.0


def rotation_measure(h: np.ndarray, dims: RigDims) -> float:
    """Angle in degrees between the center-to-right-edge vector and its image."""
    w, hh = dims.width, dims.height
    o = np.array([w / 2.0, hh / 2.0])
    f_pt = np.array([w, hh / 2.0])
    o_hat, f_hat = map_points(h, np.vstack([o, f_pt]))
    return _angle_deg(f_pt - o, f_hat - o_hat)


def _shoelace_area(quad: np.ndarray) -> float:
    x, y = quad[:, 0], quad[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def size_ratio(h: np.ndarray, dims: RigDims) -> float:
    """Mapped-frame area over original frame area (ideal 1)."""
    quad = map_points(h, _corners(dims))
    area = _shoelace_area(quad)
    if area < 1e-9:
        raise DegenerateQuadrilateral("mapped corners are collinear")
    return float(area / (dims.width * dims.height))


@dataclass(frozen=True)
class DistortionReport:
    """Per-side and averaged quality measures for one rectification."""

    e_s: float
    e_v: float
    e_o_left: float
    e_o_right: float
    e_a_left: float
    e_a_right: float
    e_ar_left: float
    e_ar_right: float
    e_sk_left: float
    e_sk_right: float
    e_r_left: float
    e_r_right: float
    e_sr_left: float
    e_sr_right: float

    @property
    def e_o(self) -> float:
        return 0.5 * (self.e_o_left + self.e_o_right)

    @property
    def e_a(self) -> float:
        return 0.5 * (self.e_a_left + self.e_a_right)

    @property
    def e_ar(self) -> float:
        return 0.5 * (self.e_ar_left + self.e_ar_right)

    @property
    def e_sk(self) -> float:
        return 0.5 * (self.e_sk_left + self.e_sk_right)

    @property
    def e_r(self) -> float:
        return 0.5 * (self.e_r_left + self.e_r_right)

    @property
    def e_sr(self) -> float:
        return 0.5 * (self.e_sr_left + self.e_sr_right)

    def to_dict(self) -> dict:
        d = {"e_s": self.e_s, "e_v": self.e_v}
        for key in ("e_o", "e_a", "e_ar", "e_sk", "e_r", "e_sr"):
            d[key] = getattr(self, key)
            d[f"{key}_left"] = getattr(self, f"{key}_left")
            d[f"{key}_right"] = getattr(self, f"{key}_right")
        return {k: float(v) for k, v in d.items()}


def full_report(h_left: np.ndarray, h_right: np.ndarray, c: CorrespondenceSet) -> DistortionReport:
    """Evaluate every measure for a homography pair on a correspondence set."""
    f = fundamental_from_homographies(h_left, h_right)
    values = {}
    for side, h in (("left", h_left), ("right", h_right)):
        values[f"e_o_{side}"] = orthogonality(h, c.dims)
        values[f"e_a_{side}"] = aspect_ratio_legacy(h, c.dims)
        values[f"e_ar_{side}"] = aspect_ratio_modified(h, c.dims)
        values[f"e_sk_{side}"] = skewness(h, c.dims)
        values[f"e_r_{side}"] = rotation_measure(h, c.dims)
        values[f"e_sr_{side}"] = size_ratio(h, c.dims)
    return DistortionReport(
        e_s=sampson_error(f, c),
        e_v=vertical_disparity(h_left, h_right, c),
        **values,
    )
