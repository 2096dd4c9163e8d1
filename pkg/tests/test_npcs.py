import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artpose.core import PartClass, PartPose, ValidationError, random_rotation, rotation_geodesic_angle
from artpose.npcs import (
    DEFAULT_SYMMETRY,
    SymmetryDescriptor,
    SymmetryKind,
    bin_decode,
    bin_encode,
    candidate_rotations,
    decode_distribution,
    denormalize_from_npcs,
    normalize_to_npcs,
    outside_unit_cube,
    symmetry_candidates,
)


def test_normalize_identity_and_translation():
    np.testing.assert_array_equal(
        normalize_to_npcs([[0, 0, 0]], PartPose(np.eye(3), np.zeros(3), 1.0, [1, 1, 1])), [[0.5, 0.5, 0.5]]
    )
    t = np.array([0.3, -1.0, 2.0])
    np.testing.assert_allclose(
        normalize_to_npcs([t], PartPose(np.eye(3), t, 2.0, [1, 1, 1])), [[0.5, 0.5, 0.5]], atol=1e-15
    )


def test_cube_corners_map_to_unit_corners(rng):
    corners = np.array(list(itertools.product([0.0, 1.0], repeat=3)))
    for _ in range(20):
        pose = PartPose(random_rotation(rng), rng.normal(size=3), rng.uniform(0.1, 3), [1, 1, 1])
        world = (pose.scale * (corners - 0.5)) @ pose.rotation.T + pose.translation
        np.testing.assert_allclose(normalize_to_npcs(world, pose), corners, atol=1e-12)


def test_normalize_is_clamp_free():
    pose = PartPose(np.eye(3), np.zeros(3), 1.0, [1, 1, 1])
    n = normalize_to_npcs([[2.0, 0, 0]], pose)
    assert n[0, 0] == 2.5
    assert outside_unit_cube(n).tolist() == [True]


def test_normalize_rejects_empty():
    with pytest.raises(ValidationError):
        normalize_to_npcs(np.zeros((0, 3)), PartPose(np.eye(3), np.zeros(3), 1.0, [1, 1, 1]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_denormalize_inverts_normalize(seed):
    rng = np.random.default_rng(seed)
    pose = PartPose(random_rotation(rng), rng.normal(size=3), rng.uniform(0.01, 2), [1, 1, 1])
    pts = rng.normal(size=(50, 3))
    np.testing.assert_allclose(denormalize_from_npcs(normalize_to_npcs(pts, pose), pose), pts, atol=1e-9)


def test_bin_encode_examples():
    assert bin_encode(0.0) == 0
    assert bin_encode(1.0) == 31
    assert bin_encode(0.5) == 16
    assert bin_encode(-3.0) == 0
    assert bin_encode(7.0) == 31
    with pytest.raises(ValidationError):
        bin_encode(np.nan)
    with pytest.raises(ValidationError):
        bin_encode(np.inf)


def test_bin_decode_examples():
    np.testing.assert_array_equal(bin_decode([0, 0, 0]), [0.015625] * 3)
    np.testing.assert_array_equal(bin_decode([31, 31, 31]), [0.984375] * 3)
    with pytest.raises(ValidationError):
        bin_decode([32, 0, 0])
    with pytest.raises(ValidationError):
        bin_decode([-1, 0, 0])


def test_encode_decode_fixed_point_on_all_indices():
    idx = np.array(list(itertools.product(range(32), repeat=3)))
    np.testing.assert_array_equal(bin_encode(bin_decode(idx)), idx)


@settings(max_examples=300, deadline=None)
@given(st.floats(-2.0, 3.0, allow_nan=False))
def test_quantization_roundtrip_bound(x):
    assert abs(bin_decode(bin_encode(x)) - min(max(x, 0.0), 1.0)) <= 1 / 64 + 1e-9


def test_decode_distribution_ties_to_lower_bin():
    d = np.zeros((1, 3, 32))
    d[0, :, 4] = d[0, :, 9] = 0.5
    np.testing.assert_array_equal(decode_distribution(d), [[4.5 / 32] * 3])


def test_symmetry_table_defaults():
    sym = {c for c, d in DEFAULT_SYMMETRY.items() if d.kind is not SymmetryKind.NONE}
    assert sym == {PartClass.ROUND_FIXED_HANDLE, PartClass.SLIDER_BUTTON, PartClass.HINGE_KNOB}
    assert DEFAULT_SYMMETRY[PartClass.HINGE_KNOB].k_discretization == 12


def test_symmetry_descriptor_validation():
    with pytest.raises(ValidationError):
        SymmetryDescriptor(SymmetryKind.CONTINUOUS, (0, 0, 2), 12)
    with pytest.raises(ValidationError):
        SymmetryDescriptor(SymmetryKind.CONTINUOUS, (0, 0, 1), 1)
    d = SymmetryDescriptor(SymmetryKind.MIRROR_180, (1, 0, 0), 7)
    assert d.k_discretization == 2
    assert SymmetryDescriptor.from_dict(d.to_dict()) == d


def test_symmetry_candidates_none(rng):
    R = random_rotation(rng)
    cands = symmetry_candidates(PartClass.SLIDER_DRAWER, R)
    assert len(cands) == 1
    np.testing.assert_array_equal(cands[0], R)


def test_symmetry_candidates_continuous_distinct():
    cands = symmetry_candidates(PartClass.ROUND_FIXED_HANDLE, np.eye(3))
    assert len(cands) == 12
    for a, b in itertools.combinations(cands, 2):
        assert rotation_geodesic_angle(a, b) > 29.0
    for j, R in enumerate(cands):
        assert R @ np.array([0, 0, 1.0]) == pytest.approx([0, 0, 1.0])
        angle = rotation_geodesic_angle(np.eye(3), R)
        assert angle == pytest.approx(min(30.0 * j, 360 - 30.0 * j), abs=1e-9)


def test_symmetry_candidates_mirror():
    table = {PartClass.HINGE_LID: SymmetryDescriptor(SymmetryKind.MIRROR_180, (0, 1, 0))}
    cands = symmetry_candidates(PartClass.HINGE_LID, np.eye(3), table)
    assert len(cands) == 2
    np.testing.assert_allclose(cands[1], np.diag([-1.0, 1.0, -1.0]), atol=1e-15)


def test_candidates_are_rotations(rng):
    for cls in PartClass.parts():
        for R in symmetry_candidates(cls, random_rotation(rng)):
            np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-9)
            assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-9)
    assert len(candidate_rotations(SymmetryDescriptor())) == 1
