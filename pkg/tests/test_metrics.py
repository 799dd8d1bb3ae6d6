import numpy as np
import pytest

from stereorect.errors import PointAtInfinity, ZeroDenominator
from stereorect.geometry import RECTIFIED_F
from stereorect.metrics import (
    CorrespondenceSet,
    DistortionReport,
    aspect_ratio_legacy,
    aspect_ratio_modified,
    full_report,
    orthogonality,
    rotation_measure,
    sampson_error,
    size_ratio,
    skewness,
    vertical_disparity,
)
from stereorect.model import RigDims

SQUARE = RigDims(100.0, 100.0)
WIDE = RigDims(1920.0, 1080.0)


def _pairs(dims, n=12, dv=0.0, seed=0):
    rng = np.random.default_rng(seed)
    ul = rng.uniform(5, dims.width - 5, n)
    vl = rng.uniform(5, dims.height - 5, n)
    return CorrespondenceSet(dims, np.column_stack([ul, vl, ul + 3.0, vl - dv]))


def _shift(dy):
    h = np.eye(3)
    h[1, 2] = dy
    return h


def _rot(deg, dims):
    t = np.radians(deg)
    c, s = np.cos(t), np.sin(t)
    cx, cy = dims.width / 2.0, dims.height / 2.0
    r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    pre = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    post = np.array([[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]])
    return post @ r @ pre


def _scale_about_center(s, dims):
    cx, cy = dims.width / 2.0, dims.height / 2.0
    return np.array([[s, 0.0, cx * (1 - s)], [0.0, s, cy * (1 - s)], [0.0, 0.0, 1.0]])


SHEAR_X = np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
SHEAR_Y = np.array([[1.0, 0.0, 0.0], [0.2, 1.0, 0.0], [0.0, 0.0, 1.0]])


# ---------------------------------------------------------------- sampson


def test_sampson_zero_on_equal_rows():
    c = _pairs(WIDE, dv=0.0)
    assert sampson_error(RECTIFIED_F, c) == pytest.approx(0.0, abs=1e-15)


def test_sampson_single_pair_hand_value():
    c = CorrespondenceSet(WIDE, np.array([[0.0, 0.0, 0.0, 1.0]]))
    assert sampson_error(RECTIFIED_F, c) == pytest.approx(np.sqrt(0.5), abs=1e-12)


def test_sampson_scale_invariant():
    c = _pairs(WIDE, dv=2.0)
    base = sampson_error(RECTIFIED_F, c)
    assert sampson_error(10.0 * RECTIFIED_F, c) == pytest.approx(base, rel=1e-12)


def test_sampson_zero_denominator_raises():
    c = CorrespondenceSet(WIDE, np.array([[1.0, 2.0, 3.0, 4.0]]))
    with pytest.raises(ZeroDenominator):
        sampson_error(np.zeros((3, 3)), c)


# ---------------------------------------------------- vertical disparity


def test_vertical_disparity_constant_offset():
    c = _pairs(WIDE, dv=2.0)
    assert vertical_disparity(np.eye(3), np.eye(3), c) == pytest.approx(2.0)


def test_vertical_disparity_shifted_homography():
    c = _pairs(WIDE, dv=0.0)
    assert vertical_disparity(_shift(3.0), np.eye(3), c) == pytest.approx(3.0)


def test_vertical_disparity_invariant_to_common_shift():
    c = _pairs(WIDE, dv=1.0, seed=3)
    base = vertical_disparity(np.eye(3), np.eye(3), c)
    for dy in (-40.0, 12.5, 300.0):
        assert vertical_disparity(_shift(dy), _shift(dy), c) == pytest.approx(base, abs=1e-12)


def test_vertical_disparity_point_at_infinity():
    c = CorrespondenceSet(WIDE, np.array([[1.0, 1.0, 1.0, 1.0]]))
    h = np.eye(3)
    h[2] = [-1.0, 0.0, 1.0]  # sends u=1 to infinity
    with pytest.raises(PointAtInfinity):
        vertical_disparity(h, np.eye(3), c)


# ------------------------------------------------------------- geometry


def test_orthogonality_identity_and_rotation():
    assert orthogonality(np.eye(3), WIDE) == pytest.approx(90.0, abs=1e-9)
    assert orthogonality(_rot(17.0, WIDE), WIDE) == pytest.approx(90.0, abs=1e-9)


def test_orthogonality_shear():
    expected = 90.0 - np.degrees(np.arctan(0.5))
    assert orthogonality(SHEAR_X, SQUARE) == pytest.approx(expected, abs=1e-9)


def test_aspect_legacy_identity_scale_rotation():
    assert aspect_ratio_legacy(np.eye(3), SQUARE) == pytest.approx(1.0, abs=1e-12)
    assert aspect_ratio_legacy(np.diag([2.0, 1.0, 1.0]), SQUARE) == pytest.approx(
        np.sqrt(2.5), abs=1e-9
    )
    assert aspect_ratio_legacy(_rot(33.0, SQUARE), SQUARE) == pytest.approx(1.0, abs=1e-9)


def test_aspect_modified_identity_shift_vertical_scale():
    assert aspect_ratio_modified(np.eye(3), WIDE) == pytest.approx(1.0, abs=1e-12)
    assert aspect_ratio_modified(_shift(25.0), WIDE) == pytest.approx(1.0, abs=1e-12)
    h = np.diag([1.0, 2.0, 1.0])
    assert aspect_ratio_modified(h, SQUARE) == pytest.approx(1.0, abs=1e-12)


def test_skewness_identity_rotation_shear():
    assert skewness(np.eye(3), WIDE) == pytest.approx(0.0, abs=1e-9)
    assert skewness(_rot(21.0, WIDE), WIDE) == pytest.approx(0.0, abs=1e-9)
    expected = np.degrees(np.arctan(0.5))
    assert skewness(SHEAR_X, SQUARE) == pytest.approx(expected, abs=1e-9)


def test_rotation_measure_identity_rotation_shear():
    assert rotation_measure(np.eye(3), WIDE) == pytest.approx(0.0, abs=1e-9)
    assert rotation_measure(_rot(10.0, WIDE), WIDE) == pytest.approx(10.0, abs=1e-9)
    expected = np.degrees(np.arctan(0.2))
    assert rotation_measure(SHEAR_Y, SQUARE) == pytest.approx(expected, abs=1e-9)


def test_size_ratio_identity_scale_rotation():
    assert size_ratio(np.eye(3), WIDE) == pytest.approx(1.0, abs=1e-12)
    assert size_ratio(_scale_about_center(0.7, WIDE), WIDE) == pytest.approx(0.49, abs=1e-9)
    assert size_ratio(_rot(45.0, WIDE), WIDE) == pytest.approx(1.0, abs=1e-9)


def test_similarity_invariance_property():
    rng = np.random.default_rng(9)
    for _ in range(20):
        h = _rot(rng.uniform(-180, 180, 1)[0], WIDE)
        h[0, 2] += rng.uniform(-50, 50)
        h[1, 2] += rng.uniform(-50, 50)
        assert skewness(h, WIDE) == pytest.approx(0.0, abs=1e-9)
        assert aspect_ratio_modified(h, WIDE) == pytest.approx(1.0, abs=1e-9)
        assert size_ratio(h, WIDE) == pytest.approx(1.0, abs=1e-9)
        assert orthogonality(h, WIDE) == pytest.approx(90.0, abs=1e-9)


def test_angles_in_range_ratios_positive():
    rng = np.random.default_rng(13)
    for _ in range(30):
        h = np.eye(3) + 0.2 * rng.standard_normal((3, 3))
        h[2, 0:2] *= 1e-4
        if abs(np.linalg.det(h)) < 1e-6:
            continue
        assert 0.0 <= orthogonality(h, WIDE) <= 180.0
        assert 0.0 <= rotation_measure(h, WIDE) <= 180.0
        assert 0.0 <= skewness(h, WIDE) <= 180.0
        assert aspect_ratio_legacy(h, WIDE) > 0
        assert aspect_ratio_modified(h, WIDE) > 0
        assert size_ratio(h, WIDE) > 0


# ------------------------------------------------------------ reporting


def test_full_report_identity_is_ideal():
    c = _pairs(WIDE, dv=0.0)
    rep = full_report(np.eye(3), np.eye(3), c)
    assert rep.e_s == pytest.approx(0.0, abs=1e-12)
    assert rep.e_v == pytest.approx(0.0, abs=1e-12)
    assert rep.e_o == pytest.approx(90.0, abs=1e-9)
    assert rep.e_a == pytest.approx(1.0, abs=1e-12)
    assert rep.e_ar == pytest.approx(1.0, abs=1e-12)
    assert rep.e_sk == pytest.approx(0.0, abs=1e-12)
    assert rep.e_r == pytest.approx(0.0, abs=1e-12)
    assert rep.e_sr == pytest.approx(1.0, abs=1e-12)


def test_full_report_matches_individual_measures():
    c = _pairs(SQUARE, dv=0.0)
    rep = full_report(SHEAR_X, np.eye(3), c)
    assert rep.e_sk_left == pytest.approx(skewness(SHEAR_X, SQUARE), abs=1e-12)
    assert rep.e_sk_right == pytest.approx(0.0, abs=1e-12)
    assert rep.e_sk == pytest.approx(0.5 * skewness(SHEAR_X, SQUARE), abs=1e-12)
    assert rep.e_o_left == pytest.approx(orthogonality(SHEAR_X, SQUARE), abs=1e-12)
    assert rep.e_sr_left == pytest.approx(size_ratio(SHEAR_X, SQUARE), abs=1e-12)


def test_report_serialization_keys():
    c = _pairs(WIDE)
    rep = full_report(np.eye(3), np.eye(3), c)
    d = rep.to_dict()
    for key in ("e_s", "e_v", "e_o", "e_a", "e_ar", "e_sk", "e_r", "e_sr"):
        assert key in d
    assert "e_o_left" in d and "e_o_right" in d
    assert isinstance(d["e_v"], float)


def test_correspondence_set_validation():
    with pytest.raises(ValueError):
        CorrespondenceSet(WIDE, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        CorrespondenceSet(WIDE, np.array([[np.inf, 0.0, 0.0, 0.0]]))
