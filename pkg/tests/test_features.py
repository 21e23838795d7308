"""Landmark feature vectors for the gaze regressor, including ablations."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gazefit import FEATURE_CONFIGS, EyeLandmarks, Point2, build_features, feature_dim


def landmarks_from_arrays(inner, outer, eyelid, iris, ic, ec=(75.0, 45.0), radius=60.0):
    return EyeLandmarks(
        inner_corner=Point2(*inner),
        outer_corner=Point2(*outer),
        eyelid=tuple(Point2(*p) for p in eyelid),
        iris_edges=tuple(Point2(*p) for p in iris),
        iris_center=Point2(*ic),
        eyeball_center=Point2(*ec),
        radius=radius,
    )


def random_landmarks(rng):
    inner = rng.uniform(10, 50, 2)
    outer = inner + rng.uniform(40, 70, 2) * np.array([1.0, rng.uniform(-0.2, 0.2)])
    eyelid = rng.uniform(20, 120, size=(8, 2))
    iris = rng.uniform(40, 100, size=(8, 2))
    ic = rng.uniform(50, 90, 2)
    ec = rng.uniform(60, 90, 2)
    return landmarks_from_arrays(inner, outer, eyelid, iris, ic, ec)


def test_declared_dimensions():
    assert FEATURE_CONFIGS == {
        "pupil": 2,
        "pcec": 4,
        "iris": 18,
        "eyelid-iris": 34,
        "full": 36,
    }
    for name, dim in FEATURE_CONFIGS.items():
        assert feature_dim(name) == dim


def test_unknown_config_rejected():
    with pytest.raises(ValueError):
        feature_dim("everything")


def test_midpoint_landmark_normalizes_to_half():
    lm = landmarks_from_arrays(
        inner=(10.0, 20.0),
        outer=(70.0, 20.0),
        eyelid=[(40.0, 15.0)] * 8,
        iris=[(40.0, 20.0)] * 8,
        ic=(40.0, 20.0),
    )
    out = build_features(lm, "pupil")
    np.testing.assert_allclose(out, [0.5, 0.0], atol=1e-15)


def test_prior_is_zero_when_iris_center_matches_eyeball_center():
    lm = landmarks_from_arrays(
        inner=(10.0, 20.0),
        outer=(70.0, 20.0),
        eyelid=[(40.0, 15.0)] * 8,
        iris=[(40.0, 20.0)] * 8,
        ic=(75.0, 45.0),
        ec=(75.0, 45.0),
    )
    out = build_features(lm, "full")
    np.testing.assert_allclose(out[-2:], [0.0, 0.0], atol=1e-15)


def test_full_vector_matches_scalar_recomputation(rng):
    lm = random_landmarks(rng)
    w = math.hypot(
        lm.outer_corner.u - lm.inner_corner.u, lm.outer_corner.v - lm.inner_corner.v
    )

    def norm(p):
        return [(p.u - lm.inner_corner.u) / w, (p.v - lm.inner_corner.v) / w]

    expected = []
    for p in lm.eyelid:
        expected += norm(p)
    for p in lm.iris_edges:
        expected += norm(p)
    expected += norm(lm.iris_center)
    expected += [
        (lm.iris_center.u - lm.eyeball_center.u) / w,
        (lm.iris_center.v - lm.eyeball_center.v) / w,
    ]
    np.testing.assert_allclose(build_features(lm, "full"), expected, rtol=1e-12)


def test_pcec_holds_center_relative_to_both_corners(rng):
    lm = random_landmarks(rng)
    w = math.hypot(
        lm.outer_corner.u - lm.inner_corner.u, lm.outer_corner.v - lm.inner_corner.v
    )
    out = build_features(lm, "pcec")
    expected = [
        (lm.iris_center.u - lm.inner_corner.u) / w,
        (lm.iris_center.v - lm.inner_corner.v) / w,
        (lm.iris_center.u - lm.outer_corner.u) / w,
        (lm.iris_center.v - lm.outer_corner.v) / w,
    ]
    np.testing.assert_allclose(out, expected, rtol=1e-12)


def test_ablation_configs_nest_consistently(rng):
    lm = random_landmarks(rng)
    full = build_features(lm, "full")
    np.testing.assert_array_equal(build_features(lm, "eyelid-iris"), full[:34])
    np.testing.assert_array_equal(build_features(lm, "iris"), full[16:34])
    np.testing.assert_array_equal(build_features(lm, "pupil"), full[32:34])


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 10.0))
def test_similarity_invariance(du, dv, scale_factor):
    rng = np.random.default_rng(99)
    lm = random_landmarks(rng)

    def move(p):
        return (scale_factor * (p.u + du), scale_factor * (p.v + dv))

    moved = landmarks_from_arrays(
        move(lm.inner_corner),
        move(lm.outer_corner),
        [move(p) for p in lm.eyelid],
        [move(p) for p in lm.iris_edges],
        move(lm.iris_center),
        move(lm.eyeball_center),
        radius=lm.radius * scale_factor,
    )
    np.testing.assert_allclose(
        build_features(moved, "full"), build_features(lm, "full"), atol=1e-9
    )


def test_two_calls_are_bit_identical(rng):
    lm = random_landmarks(rng)
    a = build_features(lm, "full")
    b = build_features(lm, "full")
    np.testing.assert_array_equal(a, b)


def test_rotation_normalization_cancels_camera_roll(rng):
    lm = random_landmarks(rng)
    angle = 0.3
    c, s = math.cos(angle), math.sin(angle)

    def rot(p):
        return (c * p.u - s * p.v, s * p.u + c * p.v)

    rolled = landmarks_from_arrays(
        rot(lm.inner_corner),
        rot(lm.outer_corner),
        [rot(p) for p in lm.eyelid],
        [rot(p) for p in lm.iris_edges],
        rot(lm.iris_center),
        rot(lm.eyeball_center),
        radius=lm.radius,
    )
    a = build_features(lm, "full", rotate_to_corner_axis=True)
    b = build_features(rolled, "full", rotate_to_corner_axis=True)
    np.testing.assert_allclose(a, b, atol=1e-9)
    # off by default: the plain features do change under camera roll
    assert not np.allclose(build_features(lm, "full"), build_features(rolled, "full"))


def test_coincident_corners_rejected():
    with pytest.raises(ValueError):
        landmarks_from_arrays(
            inner=(10.0, 20.0),
            outer=(10.0, 20.0),
            eyelid=[(40.0, 15.0)] * 8,
            iris=[(40.0, 20.0)] * 8,
            ic=(40.0, 20.0),
        )


def test_wrong_landmark_counts_rejected():
    with pytest.raises(ValueError):
        landmarks_from_arrays(
            inner=(10.0, 20.0),
            outer=(70.0, 20.0),
            eyelid=[(40.0, 15.0)] * 7,
            iris=[(40.0, 20.0)] * 8,
            ic=(40.0, 20.0),
        )
