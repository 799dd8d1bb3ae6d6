"""Robust correspondence filtering: normalized 8-point solver plus RANSAC.

Feature extraction is out of scope; putative matches come in, an inlier
subset and a consensus fundamental matrix come out.  The inlier criterion
is the per-pair Sampson distance, the same quantity the rectification
optimizer minimizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, InsufficientInliers
from .metrics import CorrespondenceSet, sampson_distances

MIN_SAMPLE = 8


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 2000
    inlier_threshold: float = 1.5
    confidence: float = 0.999
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if not (0.0 < self.confidence < 1.0):
            raise ValueError("confidence must be in (0, 1)")


def _normalizing_transform(points: np.ndarray) -> np.ndarray:
    """Hartley normalization: centroid at origin, mean distance sqrt(2)."""
    centroid = points.mean(axis=0)
    dist = np.linalg.norm(points - centroid, axis=1).mean()
    if dist < 1e-12:
        raise DegenerateConfiguration("all points coincide")
    s = np.sqrt(2.0) / dist
    return np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])


def estimate_fundamental_8pt(c: CorrespondenceSet) -> np.ndarray:
    """Normalized 8-point estimate of F (m_l^T F m_r = 0 convention).

    Coordinates are Hartley-normalized before the linear solve and the
    smallest singular value of the result is zeroed to enforce rank 2.

    Raises DegenerateConfiguration when fewer than 8 pairs are given or
    the design matrix does not determine F up to scale (collinear or
    duplicated points).
    """
    n = len(c)
    if n < MIN_SAMPLE:
        raise DegenerateConfiguration(f"need at least 8 pairs, got {n}")

    t_left = _normalizing_transform(c.left)
    t_right = _normalizing_transform(c.right)
    ml = np.hstack([c.left, np.ones((n, 1))]) @ t_left.T
    mr = np.hstack([c.right, np.ones((n, 1))]) @ t_right.T

    # m_l^T F m_r = kron(m_l, m_r) . vec(F)  (row-major vec)
    a = np.einsum("ni,nj->nij", ml, mr).reshape(n, 9)
    _, s, vt = np.linalg.svd(a)
    if s[7] < 1e-10 * s[0]:
        raise DegenerateConfiguration("design matrix is rank deficient")

    f_norm = vt[-1].reshape(3, 3)
    u, sv, vvt = np.linalg.svd(f_norm)
    f_rank2 = u @ np.diag([sv[0], sv[1], 0.0]) @ vvt
    f = t_left.T @ f_rank2 @ t_right
    return f / np.linalg.norm(f)


def _required_iterations(inlier_ratio: float, confidence: float) -> int:
    if inlier_ratio <= 0.0:
        return np.iinfo(np.int64).max
    if inlier_ratio >= 1.0:
        return 1
    denom = np.log1p(-min(inlier_ratio ** MIN_SAMPLE, 1.0 - 1e-15))
    if denom >= 0.0:
        return np.iinfo(np.int64).max
    return int(np.ceil(np.log(1.0 - confidence) / denom))


def ransac_filter(
    c: CorrespondenceSet, cfg: RansacConfig | None = None
) -> tuple[CorrespondenceSet, np.ndarray]:
    """RANSAC over the fundamental matrix; returns (inliers, consensus F).

    Samples minimal 8-point subsets, scores hypotheses by the number of
    pairs with Sampson distance <= threshold, adapts the iteration count
    to the best consensus (capped at max_iterations), and refits F on all
    inliers of the best model.  Deterministic for a given seed.
    """
    cfg = cfg or RansacConfig()
    n = len(c)
    if n < MIN_SAMPLE:
        raise InsufficientInliers(f"need at least 8 pairs, got {n}")

    rng = np.random.default_rng(cfg.seed)
    best_mask: np.ndarray | None = None
    best_count = -1
    needed = cfg.max_iterations
    it = 0
    while it < min(needed, cfg.max_iterations):
        it += 1
        sample = rng.choice(n, size=MIN_SAMPLE, replace=False)
        try:
            f = estimate_fundamental_8pt(c.subset(sample))
        except DegenerateConfiguration:
            continue
        d = sampson_distances(f, c)
        mask = d <= cfg.inlier_threshold
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            needed = _required_iterations(count / n, cfg.confidence)

    if best_mask is None or best_count < MIN_SAMPLE:
        raise InsufficientInliers(f"best consensus has {max(best_count, 0)} pairs")

    # refit on the consensus set, then reselect inliers under the refit model
    refit = estimate_fundamental_8pt(c.subset(best_mask))
    final_mask = sampson_distances(refit, c) <= cfg.inlier_threshold
    if final_mask.sum() < MIN_SAMPLE:
        raise InsufficientInliers("consensus collapsed after refit")
    consensus = estimate_fundamental_8pt(c.subset(final_mask))
    return c.subset(final_mask), consensus
