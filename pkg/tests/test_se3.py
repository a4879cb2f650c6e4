import math

import numpy as np
import pytest

from holoplan.se3 import (
    DegenerateCorrespondences,
    FrameId,
    FrameRegistry,
    InvalidRotation,
    Pose,
    Quaternion,
    Transform,
    UnregisteredFrame,
    align_frames,
    compose,
    map_pose,
    slerp,
)


# ---------------------------------------------------------------------------
# Independent oracles: plain 4x4 / Rodrigues math, no holoplan types involved.
# ---------------------------------------------------------------------------

def homogeneous(r3x3, t3):
    m = np.eye(4)
    m[:3, :3] = r3x3
    m[:3, 3] = t3
    return m


def rodrigues(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array(
        [
            [0, -axis[2], axis[1]],
            [axis[2], 0, -axis[0]],
            [-axis[1], axis[0], 0],
        ]
    )
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


def random_unit_quaternion(rng):
    v = rng.normal(size=4)
    v /= np.linalg.norm(v)
    return Quaternion(*v)


# ---------------------------------------------------------------------------
# slerp
# ---------------------------------------------------------------------------

def test_slerp_identity_case():
    q = Quaternion.identity()
    out = slerp(q, q, 0.5)
    assert out.dot(q) == pytest.approx(1.0, abs=1e-12)


def test_slerp_halfway_about_z():
    q1 = Quaternion.identity()
    q2 = Quaternion.from_axis_angle([0, 0, 1], math.pi / 2)
    mid = slerp(q1, q2, 0.5)
    assert mid.w == pytest.approx(math.cos(math.pi / 8), abs=1e-12)
    assert mid.z == pytest.approx(math.sin(math.pi / 8), abs=1e-12)
    assert mid.x == pytest.approx(0.0, abs=1e-12)
    assert mid.y == pytest.approx(0.0, abs=1e-12)


def test_slerp_antipodal_quaternions_are_identity_rotation():
    q1 = Quaternion(1, 0, 0, 0)
    q2 = Quaternion(-1, 0, 0, 0)
    for t in (0.0, 0.3, 1.0):
        out = slerp(q1, q2, t)
        assert out.angle_to(Quaternion.identity()) <= 1e-9


def test_slerp_rejects_non_unit_inputs():
    with pytest.raises(InvalidRotation):
        slerp(Quaternion(2, 0, 0, 0), Quaternion.identity(), 0.5)
    with pytest.raises(InvalidRotation):
        slerp(Quaternion.identity(), Quaternion(0.5, 0.5, 0, 0), 0.5)


def test_slerp_rejects_t_outside_unit_interval():
    q = Quaternion.identity()
    with pytest.raises(ValueError):
        slerp(q, q, 1.5)


def test_slerp_endpoints_recovered():
    rng = np.random.default_rng(7)
    for _ in range(20):
        q1 = random_unit_quaternion(rng)
        q2 = random_unit_quaternion(rng)
        assert slerp(q1, q2, 0.0).angle_to(q1) <= 1e-9
        assert slerp(q1, q2, 1.0).angle_to(q2) <= 1e-9


def test_slerp_unit_norm_and_constant_angular_step_1000_samples():
    rng = np.random.default_rng(11)
    q1 = random_unit_quaternion(rng)
    q2 = random_unit_quaternion(rng)
    ts = np.linspace(0.0, 1.0, 1000)
    samples = [slerp(q1, q2, float(t)) for t in ts]
    for q in samples:
        assert abs(q.norm() - 1.0) <= 1e-9
    steps = [samples[i].angle_to(samples[i + 1]) for i in range(len(samples) - 1)]
    assert max(steps) - min(steps) <= 1e-9


def test_slerp_tiny_angle_falls_back_to_lerp():
    q1 = Quaternion.identity()
    q2 = Quaternion.from_axis_angle([1, 0, 0], 1e-10)
    out = slerp(q1, q2, 0.5)
    assert abs(out.norm() - 1.0) <= 1e-12
    assert out.angle_to(q1) <= 1e-9


# ---------------------------------------------------------------------------
# compose / Transform
# ---------------------------------------------------------------------------

def test_compose_with_identity():
    t = Transform(rodrigues([1, 2, 3], 0.7), [0.1, -0.2, 0.3])
    out = compose(t, Transform.identity())
    assert np.allclose(out.matrix(), t.matrix(), atol=1e-12)


def test_compose_pure_translations():
    a = Transform.from_translation([1, 0, 0])
    b = Transform.from_translation([0, 2, 0])
    out = compose(a, b)
    assert np.allclose(out.translation, [1, 2, 0], atol=1e-12)
    assert np.allclose(out.rotation, np.eye(3), atol=1e-12)


def test_compose_inverse_gives_identity():
    t = Transform(rodrigues([0.3, -1, 0.5], 1.2), [0.4, 0.5, -0.6])
    out = compose(t, t.inverse())
    assert np.allclose(out.matrix(), np.eye(4), atol=1e-9)


def test_compose_matches_homogeneous_product():
    # Oracle: plain 4x4 matrix product.
    ra = rodrigues([1, 0, 0], 0.4)
    rb = rodrigues([0, 1, 1], -0.9)
    ta, tb = np.array([0.1, 0.2, 0.3]), np.array([-0.5, 0.0, 0.25])
    expected = homogeneous(ra, ta) @ homogeneous(rb, tb)
    out = compose(Transform(ra, ta), Transform(rb, tb))
    assert np.allclose(out.matrix(), expected, atol=1e-12)


def test_compose_associative():
    rng = np.random.default_rng(3)
    ts = [
        Transform(rodrigues(rng.normal(size=3), rng.uniform(-2, 2)), rng.normal(size=3))
        for _ in range(3)
    ]
    left = compose(compose(ts[0], ts[1]), ts[2])
    right = compose(ts[0], compose(ts[1], ts[2]))
    assert np.allclose(left.matrix(), right.matrix(), atol=1e-12)


# ---------------------------------------------------------------------------
# map_pose
# ---------------------------------------------------------------------------

def test_map_pose_identity_registry():
    reg = FrameRegistry()
    reg.register(FrameId.WORLD, FrameId.ROBOT_BASE, Transform.identity())
    p = Pose([0.1, 0.2, 0.3], Quaternion.from_axis_angle([0, 0, 1], 0.5))
    out = map_pose(p, FrameId.WORLD, FrameId.ROBOT_BASE, reg)
    assert out.almost_equal(p, tol=1e-12)


def test_map_pose_translation_offset_hand_computed():
    # Oracle: hand 4x4 multiply of [[I, (0,0,0.5)], [0,1]] with the origin,
    # giving (0, 0, 0.5) in the base frame under the src->dst convention.
    m = homogeneous(np.eye(3), [0, 0, 0.5])
    expected = (m @ np.array([0.0, 0.0, 0.0, 1.0]))[:3]
    assert np.allclose(expected, [0, 0, 0.5])

    reg = FrameRegistry()
    reg.register(
        FrameId.WORLD, FrameId.ROBOT_BASE, Transform.from_translation([0, 0, 0.5])
    )
    p = Pose([0, 0, 0], Quaternion.identity())
    out = map_pose(p, FrameId.WORLD, FrameId.ROBOT_BASE, reg)
    assert np.allclose(out.position, expected, atol=1e-12)


def test_map_pose_round_trip():
    reg = FrameRegistry()
    reg.register(
        FrameId.WORLD,
        FrameId.ROBOT_BASE,
        Transform(rodrigues([0, 0, 1], 0.8), [0.3, -0.1, 0.05]),
    )
    p = Pose([0.4, 0.2, 0.6], Quaternion.from_axis_angle([1, 1, 0], 0.9))
    there = map_pose(p, FrameId.WORLD, FrameId.ROBOT_BASE, reg)
    back = map_pose(there, FrameId.ROBOT_BASE, FrameId.WORLD, reg)
    assert back.almost_equal(p, tol=1e-9)


def test_map_pose_chains_through_intermediate_frame():
    reg = FrameRegistry()
    t_wb = Transform(rodrigues([0, 1, 0], 0.3), [0.0, 0.0, 0.2])
    t_bt = Transform(rodrigues([1, 0, 0], -0.4), [0.1, 0.0, 0.0])
    reg.register(FrameId.WORLD, FrameId.ROBOT_BASE, t_wb)
    reg.register(FrameId.ROBOT_BASE, FrameId.TOOL, t_bt)
    p = Pose([0.2, 0.3, 0.1], Quaternion.identity())
    out = map_pose(p, FrameId.WORLD, FrameId.TOOL, reg)
    expected = (
        homogeneous(t_bt.rotation, t_bt.translation)
        @ homogeneous(t_wb.rotation, t_wb.translation)
        @ np.array([0.2, 0.3, 0.1, 1.0])
    )[:3]
    assert np.allclose(out.position, expected, atol=1e-12)


def test_map_pose_unregistered_frame():
    reg = FrameRegistry()
    p = Pose([0, 0, 0], Quaternion.identity())
    with pytest.raises(UnregisteredFrame):
        map_pose(p, FrameId.WORLD, FrameId.HOLOGRAM, reg)


# ---------------------------------------------------------------------------
# align_frames
# ---------------------------------------------------------------------------

def test_align_identical_point_sets():
    pts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0.3, 0.4, 0.5]])
    t = align_frames(pts, pts)
    assert np.allclose(t.matrix(), np.eye(4), atol=1e-9)


def test_align_pure_translation():
    pts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
    t = align_frames(pts, pts + np.array([0.1, 0, 0]))
    assert np.allclose(t.rotation, np.eye(3), atol=1e-9)
    assert np.allclose(t.translation, [0.1, 0, 0], atol=1e-9)


def test_align_recovers_known_rigid_transform():
    # Oracle: build the ground-truth map with independent Rodrigues math,
    # push 4 fixed points through it, then demand recovery to 1e-9.
    r_true = rodrigues([0.2, -0.5, 1.0], 1.1)
    t_true = np.array([0.25, -0.4, 0.6])
    pts_world = np.array(
        [[0.0, 0, 0], [0.5, 0.1, -0.2], [-0.3, 0.7, 0.4], [0.2, -0.6, 0.9]]
    )
    pts_base = (r_true @ pts_world.T).T + t_true

    t = align_frames(pts_world, pts_base)
    assert np.allclose(t.rotation, r_true, atol=1e-9)
    assert np.allclose(t.translation, t_true, atol=1e-9)
    residual = (t.rotation @ pts_world.T).T + t.translation - pts_base
    assert np.max(np.abs(residual)) <= 1e-9


def test_align_rejects_too_few_or_collinear():
    with pytest.raises(DegenerateCorrespondences):
        align_frames([[0, 0, 0], [1, 0, 0]], [[0, 0, 0], [1, 0, 0]])
    line = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]])
    with pytest.raises(DegenerateCorrespondences):
        align_frames(line, line)


# ---------------------------------------------------------------------------
# Quaternion plumbing used by the rest of the package
# ---------------------------------------------------------------------------

def test_rotation_matrix_round_trip():
    rng = np.random.default_rng(5)
    for _ in range(50):
        q = random_unit_quaternion(rng)
        q2 = Quaternion.from_rotation_matrix(q.to_rotation_matrix())
        assert q2.angle_to(q) <= 1e-9


def test_rotate_matches_matrix_action():
    rng = np.random.default_rng(9)
    for _ in range(20):
        q = random_unit_quaternion(rng)
        v = rng.normal(size=3)
        assert np.allclose(q.rotate(v), q.to_rotation_matrix() @ v, atol=1e-12)


def test_rotation_vector_shortest_arc():
    q = Quaternion.from_axis_angle([0, 0, 1], 3 * math.pi / 2)
    rv = q.to_rotation_vector()
    # 270 degrees one way is 90 degrees the other way.
    assert np.allclose(rv, [0, 0, -math.pi / 2], atol=1e-12)
