import math

import numpy as np
import pytest

from holoplan.ik import (
    IkConfig,
    IkStatus,
    InvalidConfig,
    classify_reachability,
    pose_error,
    solve_ik,
)
from holoplan.robot import (
    DimensionMismatch,
    forward_kinematics,
    jacobian,
    load_robot_model,
    sample_configuration,
)
from holoplan.se3 import Pose, Quaternion


@pytest.fixture(scope="module")
def model():
    return load_robot_model("gen3_like")


# ---------------------------------------------------------------------------
# pose_error
# ---------------------------------------------------------------------------

def test_pose_error_identical_poses():
    p = Pose([0.3, 0.2, 0.5], Quaternion.from_axis_angle([1, 0, 0], 0.4))
    assert pose_error(p, p).norm == pytest.approx(0.0, abs=1e-12)


def test_pose_error_pure_translation():
    a = Pose([0, 0, 0], Quaternion.identity())
    b = Pose([0.1, 0, 0], Quaternion.identity())
    err = pose_error(a, b)
    assert np.allclose(err.twist, [0.1, 0, 0, 0, 0, 0], atol=1e-12)
    assert err.norm == pytest.approx(0.1, abs=1e-12)


def test_pose_error_quarter_turn_about_z():
    # Oracle: relative quaternion identity -> 90deg z has axis-angle (0,0,pi/2).
    a = Pose([0, 0, 0], Quaternion.identity())
    b = Pose([0, 0, 0], Quaternion.from_axis_angle([0, 0, 1], math.pi / 2))
    err = pose_error(a, b)
    assert np.allclose(err.twist, [0, 0, 0, 0, 0, math.pi / 2], atol=1e-12)
    assert err.norm == pytest.approx(math.pi / 2, abs=1e-12)


def test_pose_error_shortest_arc():
    a = Pose([0, 0, 0], Quaternion.identity())
    b = Pose([0, 0, 0], Quaternion.from_axis_angle([0, 0, 1], 3 * math.pi / 2))
    err = pose_error(a, b)
    assert err.norm == pytest.approx(math.pi / 2, abs=1e-12)
    assert err.twist[5] == pytest.approx(-math.pi / 2, abs=1e-12)


# ---------------------------------------------------------------------------
# solve_ik
# ---------------------------------------------------------------------------

def test_round_trip_converges_from_home(model):
    cfg = IkConfig(max_restarts=0)
    for i in range(30):
        q_star = sample_configuration(model, 20_000 + i)
        target = forward_kinematics(model, q_star)
        res = solve_ik(model, target, model.home, cfg)
        assert res.status is IkStatus.CONVERGED
        assert res.pose_error_norm < 1e-4
        assert model.within_limits(res.q)


def test_far_target_unreachable(model):
    target = Pose([10.0, 0.0, 0.0], Quaternion.identity())
    res = solve_ik(model, target, model.home, IkConfig(max_restarts=3))
    assert res.status is IkStatus.UNREACHABLE
    assert res.pose_error_norm > 1e-2


def test_seed_already_at_optimum(model):
    target = forward_kinematics(model, model.home)
    res = solve_ik(model, target, model.home, IkConfig(max_restarts=0))
    assert res.status is IkStatus.CONVERGED
    assert res.iterations <= 3
    assert np.allclose(res.q, model.home, atol=1e-9)


def test_invalid_config_rejected(model):
    with pytest.raises(InvalidConfig):
        IkConfig(tolerance=0.0).validate()
    with pytest.raises(InvalidConfig):
        IkConfig(tolerance=-1e-4).validate()
    with pytest.raises(InvalidConfig):
        IkConfig(unreachable_threshold=0.0).validate()


def test_seed_dimension_mismatch(model):
    target = forward_kinematics(model, model.home)
    with pytest.raises(DimensionMismatch):
        solve_ik(model, target, np.zeros(4))


def test_result_never_worse_than_seed(model):
    cfg = IkConfig(max_restarts=2)
    for i in range(10):
        seed = sample_configuration(model, 300 + i)
        target = forward_kinematics(model, sample_configuration(model, 800 + i))
        seed_norm = pose_error(forward_kinematics(model, seed), target).norm
        res = solve_ik(model, target, seed, cfg)
        assert res.pose_error_norm <= seed_norm + 1e-12
        assert model.within_limits(res.q)


def test_deterministic_for_fixed_seeds(model):
    target = forward_kinematics(model, sample_configuration(model, 71))
    cfg = IkConfig(max_restarts=5, restart_seed=9)
    a = solve_ik(model, target, model.home, cfg)
    b = solve_ik(model, target, model.home, cfg)
    assert a.q.tobytes() == b.q.tobytes()
    assert a.pose_error_norm == b.pose_error_norm
    assert a.restarts_used == b.restarts_used
    assert a.status == b.status


def test_objective_matches_independent_twist_at_accepted_iterates(model):
    # Every accepted iterate's objective must equal the squared 6-vector
    # difference recomputed here from scratch.
    target = forward_kinematics(model, sample_configuration(model, 15))
    trace = []
    solve_ik(model, target, model.home, IkConfig(max_restarts=0), trace=trace)
    assert len(trace) >= 1
    for q, f in trace:
        cur = forward_kinematics(model, q)
        rel = target.orientation * cur.orientation.conjugate()
        twist = np.concatenate(
            [target.position - cur.position, rel.to_rotation_vector()]
        )
        assert f == pytest.approx(float(twist @ twist), rel=1e-12, abs=1e-15)


def test_analytic_descent_direction_sign_matches_finite_differences(model):
    # The solver's descent direction is built from grad = -2 J^T e; check the
    # finite-difference slope of the objective along it is negative.
    h = 1e-7
    checked = 0
    for i in range(50):
        q = sample_configuration(model, 4_000 + i)
        target = forward_kinematics(model, sample_configuration(model, 6_000 + i))

        def objective(qq):
            err = pose_error(forward_kinematics(model, qq), target).twist
            return float(err @ err)

        err = pose_error(forward_kinematics(model, q), target).twist
        if np.linalg.norm(err) < 1e-6:
            continue
        descent = 2.0 * (jacobian(model, q).T @ err)
        norm = np.linalg.norm(descent)
        if norm < 1e-9:
            continue
        d = descent / norm
        slope = (objective(q + h * d) - objective(q - h * d)) / (2 * h)
        assert slope < 0.0
        checked += 1
    assert checked >= 45


# ---------------------------------------------------------------------------
# classify_reachability
# ---------------------------------------------------------------------------

def test_classify_reachability_mapping(model):
    target = forward_kinematics(model, model.home)
    converged = solve_ik(model, target, model.home, IkConfig(max_restarts=0))
    assert classify_reachability(converged).code == "reachable"

    far = Pose([10.0, 0, 0], Quaternion.identity())
    unreachable = solve_ik(model, far, model.home, IkConfig(max_restarts=0))
    assert classify_reachability(unreachable).code == "unreachable"
    assert "adjust" in classify_reachability(unreachable).message

    # A near-miss below the unreachable threshold classifies as uncertain.
    from holoplan.ik import IkResult

    lm = IkResult(q=model.home, pose_error_norm=5e-3, restarts_used=10,
                  status=IkStatus.LOCAL_MINIMUM)
    assert classify_reachability(lm).code == "uncertain"
