import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from vrga.workflows.ga_core import (
    DQConjugate,
    DualNumber,
    DualQuaternion,
    EulerAngles,
    Pose,
    dq_apply_point,
    dq_conjugate,
    dq_from_pose,
    dq_mul,
    dq_norm,
    dq_sclerp,
    dq_to_pose,
    dual_inverse,
    dual_mul,
    dual_sqrt,
    euler_array_to_quat,
    euler_to_quat,
    is_unit_dq,
    quat_array_to_euler,
    quat_conjugate,
    quat_conjugate_norm_inverse,
    quat_mul,
    quat_norm,
    quat_rotate_point,
    quat_slerp,
    quat_to_euler,
    random_poses,
    random_unit_quaternions,
    rotation_angle_between,
    select_translation_formula,
    translation_formula_deviation,
)

QUARTER_TURN_Z = np.array([np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)])


def as_matrix(q):
    return Rotation.from_quat(np.asarray(q)[..., [1, 2, 3, 0]]).as_matrix()


def test_quat_mul_units():
    q = np.array([0.3, -1.0, 2.0, 0.5])
    assert np.allclose(quat_mul([1.0, 0.0, 0.0, 0.0], q), q)
    assert np.allclose(quat_mul([0, 1, 0, 0], [0, 0, 1, 0]), [0, 0, 0, 1])
    assert np.allclose(quat_mul([0, 0, 1, 0], [0, 1, 0, 0]), [0, 0, 0, -1])


def test_quat_mul_matches_rotation_matrices():
    rng = np.random.default_rng(1)
    q = random_unit_quaternions(rng, 100)
    p = random_unit_quaternions(rng, 100)
    assert np.allclose(as_matrix(quat_mul(q, p)), as_matrix(q) @ as_matrix(p))


def test_quat_mul_properties():
    rng = np.random.default_rng(2)
    q, p, r = rng.normal(size=(3, 1000, 4))
    assert np.allclose(quat_mul(quat_mul(q, p), r), quat_mul(q, quat_mul(p, r)))
    assert np.allclose(quat_norm(quat_mul(q, p)), quat_norm(q) * quat_norm(p))
    assert np.allclose(
        quat_conjugate(quat_mul(p, q)), quat_mul(quat_conjugate(q), quat_conjugate(p))
    )


def test_quat_conjugate_norm_inverse():
    conjugate, norm, inverse = quat_conjugate_norm_inverse([0.0, 1.0, 0.0, 0.0])
    assert np.allclose(conjugate, [0, -1, 0, 0])
    assert norm == 1.0
    assert np.allclose(inverse, [0, -1, 0, 0])

    q = np.array([1.0, 2.0, 3.0, 4.0])
    conjugate, norm, inverse = quat_conjugate_norm_inverse(q)
    assert norm == pytest.approx(np.sqrt(30.0))
    assert np.allclose(inverse, np.array([1.0, -2.0, -3.0, -4.0]) / 30.0)
    assert np.allclose(quat_mul(q, inverse), [1, 0, 0, 0], atol=1e-12)


def test_zero_quaternion_has_no_inverse():
    conjugate, norm, inverse = quat_conjugate_norm_inverse([0.0, 0.0, 0.0, 0.0])
    assert norm == 0.0
    assert inverse is None
    assert np.allclose(conjugate, 0.0)

    parts = quat_conjugate_norm_inverse(np.array([[0.0, 0, 0, 0], [2.0, 0, 0, 0]]))
    assert np.all(np.isnan(parts.inverse[0]))
    assert np.allclose(parts.inverse[1], [0.5, 0, 0, 0])


def test_quat_rotate_point():
    assert np.allclose(quat_rotate_point(QUARTER_TURN_Z, [1.0, 0.0, 0.0]), [0, 1, 0])

    rng = np.random.default_rng(3)
    q = random_unit_quaternions(rng, 10_000)
    points = rng.normal(size=(10_000, 3))
    expected = np.einsum("nij,nj->ni", as_matrix(q), points)
    rotated = quat_rotate_point(q, points)
    assert np.max(np.abs(rotated - expected)) < 1e-12
    assert np.allclose(
        np.linalg.norm(rotated, axis=-1), np.linalg.norm(points, axis=-1)
    )

    with pytest.raises(ValueError):
        quat_rotate_point([2.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0])


def test_quat_slerp():
    identity = np.array([1.0, 0.0, 0.0, 0.0])
    assert np.allclose(quat_slerp(identity, QUARTER_TURN_Z, 0.0), identity)
    assert np.allclose(quat_slerp(identity, QUARTER_TURN_Z, 1.0), QUARTER_TURN_Z)
    half = np.radians(22.5)
    assert np.allclose(
        quat_slerp(identity, QUARTER_TURN_Z, 0.5), [np.cos(half), 0, 0, np.sin(half)]
    )
    assert np.allclose(quat_slerp(QUARTER_TURN_Z, QUARTER_TURN_Z, 0.3), QUARTER_TURN_Z)


def test_quat_slerp_takes_the_short_path():
    rng = np.random.default_rng(4)
    q1 = random_unit_quaternions(rng, 50)
    q2 = random_unit_quaternions(rng, 50)
    a = rng.uniform(size=50)
    assert np.allclose(
        rotation_angle_between(quat_slerp(q1, q2, a), quat_slerp(q1, -q2, a)),
        0.0,
        atol=1e-7,
    )
    # never farther from either end than the two ends are apart
    span = rotation_angle_between(q1, q2)
    assert np.all(span <= np.pi + 1e-12)
    assert np.all(rotation_angle_between(q1, quat_slerp(q1, q2, a)) <= span + 1e-9)


def test_euler_conversions():
    assert np.allclose(euler_to_quat(EulerAngles(0.0, 0.0, 0.0)), [1, 0, 0, 0])
    assert np.allclose(euler_to_quat(EulerAngles(0.0, 0.0, 90.0)), QUARTER_TURN_Z)
    assert np.allclose(quat_to_euler(QUARTER_TURN_Z).as_array(), [0.0, 0.0, 90.0])


def test_euler_round_trip():
    rng = np.random.default_rng(5)
    angles = np.column_stack(
        [
            rng.uniform(-85.0, 85.0, 10_000),
            rng.uniform(-179.0, 179.0, 10_000),
            rng.uniform(-179.0, 179.0, 10_000),
        ]
    )
    round_trip = quat_array_to_euler(euler_array_to_quat(angles))
    assert np.max(np.abs(round_trip - angles)) < 1e-6


def test_euler_angles_wrap():
    assert EulerAngles(0.0, 270.0, -190.0).as_array().tolist() == [0.0, -90.0, 170.0]


def test_gimbal_lock_puts_the_turn_on_z():
    q = euler_array_to_quat([90.0, 25.0, 10.0])
    angles = quat_array_to_euler(q)
    assert angles[1] == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(as_matrix(euler_array_to_quat(angles)), as_matrix(q), atol=1e-6)


def test_dual_numbers():
    d = DualNumber(2.0, 3.0)
    assert dual_mul(DualNumber(1.0, 0.0), d) == d
    assert dual_mul(DualNumber(0.0, 4.0), DualNumber(0.0, 5.0)) == DualNumber(0.0, 0.0)
    assert d * DualNumber(5.0, 7.0) == DualNumber(10.0, 29.0)
    assert d + DualNumber(1.0, 1.0) == DualNumber(3.0, 4.0)


def test_dual_inverse():
    assert dual_inverse(DualNumber(1.0, 0.0)) == DualNumber(1.0, 0.0)
    assert dual_inverse(DualNumber(2.0, 6.0)) == DualNumber(0.5, -1.5)
    product = DualNumber(3.0, -7.0) * dual_inverse(DualNumber(3.0, -7.0))
    assert product.real == pytest.approx(1.0)
    assert product.dual == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError, match="ring and not a field"):
        dual_inverse(DualNumber(0.0, 5.0))


def test_dual_sqrt():
    assert dual_sqrt(DualNumber(1.0, 0.0)) == DualNumber(1.0, 0.0)
    assert dual_sqrt(DualNumber(4.0, 4.0)) == DualNumber(2.0, 1.0)
    assert dual_sqrt(DualNumber(9.0, 6.0)) == DualNumber(3.0, 1.0)
    with pytest.raises(ValueError):
        dual_sqrt(DualNumber(0.0, 1.0))
    with pytest.raises(ValueError):
        dual_sqrt(DualNumber(-1.0, 1.0))


def test_dq_conjugates_commute():
    D = DualQuaternion.from_array(np.random.default_rng(6).normal(size=8))
    star_bar = dq_conjugate(dq_conjugate(D, DQConjugate.BAR), DQConjugate.STAR)
    bar_star = dq_conjugate(dq_conjugate(D, DQConjugate.STAR), DQConjugate.BAR)
    assert np.array_equal(star_bar.as_array(), bar_star.as_array())
    assert np.array_equal(
        dq_conjugate(D, DQConjugate.BAR_STAR).as_array(), star_bar.as_array()
    )
    identity = DualQuaternion.identity()
    for kind in DQConjugate:
        conjugate = dq_conjugate(identity, kind)
        assert np.array_equal(conjugate.as_array(), identity.as_array())


def test_dq_norm():
    norm = dq_norm(DualQuaternion.identity())
    assert norm.real == 1.0 and norm.dual == 0.0

    D = dq_from_pose(random_poses(np.random.default_rng(7), 100))
    norm = dq_norm(D)
    assert np.allclose(norm.real, 1.0, atol=1e-9)
    assert np.allclose(norm.dual, 0.0, atol=1e-9)
    assert np.all(is_unit_dq(D))

    scaled = dq_norm(DualQuaternion(3.0 * D.real, 3.0 * D.dual))
    assert np.allclose(scaled.real, 3.0)

    with pytest.raises(ValueError):
        dq_norm(DualQuaternion(np.zeros(4), np.ones(4)))


def test_unit_dq_products_stay_unit():
    rng = np.random.default_rng(8)
    D1 = dq_from_pose(random_poses(rng, 1000))
    D2 = dq_from_pose(random_poses(rng, 1000))
    assert np.all(is_unit_dq(dq_mul(D1, D2)))


def test_dq_from_pose():
    D = dq_from_pose(Pose.identity())
    assert np.array_equal(D.as_array(), [1, 0, 0, 0, 0, 0, 0, 0])

    D = dq_from_pose(Pose([2.0, 4.0, 6.0], [1.0, 0.0, 0.0, 0.0]))
    assert np.allclose(D.dual, [0, 1, 2, 3])
    assert np.allclose(dq_apply_point(D, [0.0, 0.0, 0.0]), [2, 4, 6])

    D = dq_from_pose(Pose([1.0, 0.0, 0.0], QUARTER_TURN_Z))
    assert np.allclose(dq_apply_point(D, [1.0, 0.0, 0.0]), [1, 1, 0])


def test_pose_round_trip():
    poses = random_poses(np.random.default_rng(9), 500)
    back = dq_to_pose(dq_from_pose(poses))
    assert np.allclose(back.translation, poses.translation, atol=1e-9)
    assert np.allclose(back.rotation, poses.rotation, atol=1e-9)


def test_dq_apply_point_matches_rotate_then_translate():
    rng = np.random.default_rng(10)
    poses = random_poses(rng, 10_000)
    points = rng.normal(size=(10_000, 3))
    assert np.allclose(
        dq_apply_point(dq_from_pose(poses), points), poses.apply(points), atol=1e-9
    )


def test_dq_mul_composes_poses():
    rng = np.random.default_rng(11)
    A = random_poses(rng, 20)
    B = random_poses(rng, 20)
    composed = dq_to_pose(dq_mul(dq_from_pose(A), dq_from_pose(B)))
    cube = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float)
    for i in range(20):
        assert np.allclose(
            composed[i].apply(cube), A[i].apply(B[i].apply(cube)), atol=1e-9
        )


def test_pose_compose_and_inverse():
    rng = np.random.default_rng(12)
    pose = random_poses(rng, 10)
    identity = pose.compose(pose.inverse())
    assert np.allclose(identity.translation, 0.0, atol=1e-12)
    assert np.allclose(np.abs(identity.rotation[:, 0]), 1.0)
    with pytest.raises(ValueError):
        Pose([0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0])


def test_translation_formula_selection():
    assert translation_formula_deviation("2BA*", n_samples=500) < 1e-9
    assert translation_formula_deviation("2AB*", n_samples=500) > 1e-3
    assert select_translation_formula(n_samples=200) == "2BA*"


def test_dq_sclerp_endpoints():
    rng = np.random.default_rng(13)
    poses1 = random_poses(rng, 50)
    poses2 = random_poses(rng, 50)
    D1, D2 = dq_from_pose(poses1), dq_from_pose(poses2)
    for a, expected in ((0.0, poses1), (1.0, poses2)):
        blended = dq_to_pose(dq_sclerp(D1, D2, a))
        assert np.allclose(blended.translation, expected.translation, atol=1e-9)
        assert np.allclose(
            rotation_angle_between(blended.rotation, expected.rotation), 0.0, atol=1e-7
        )


def test_dq_sclerp_pure_translation_is_linear():
    identity = np.array([1.0, 0.0, 0.0, 0.0])
    D1 = dq_from_pose(Pose([1.0, -2.0, 0.5], identity))
    D2 = dq_from_pose(Pose([3.0, 4.0, -1.5], identity))
    blended = dq_to_pose(dq_sclerp(D1, D2, 0.5))
    assert np.allclose(blended.translation, [2.0, 1.0, -0.5])
    assert np.allclose(blended.rotation, identity)


def test_dq_sclerp_screw():
    D2 = dq_from_pose(Pose([0.0, 0.0, 2.0], QUARTER_TURN_Z))
    blended = dq_to_pose(dq_sclerp(DualQuaternion.identity(), D2, 0.5))
    half = np.radians(22.5)
    assert np.allclose(blended.translation, [0, 0, 1], atol=1e-12)
    assert np.allclose(blended.rotation, [np.cos(half), 0, 0, np.sin(half)])


def test_dq_sclerp_has_constant_screw_velocity():
    rng = np.random.default_rng(14)
    poses = random_poses(rng, 2)
    pose1, pose2 = poses[0], poses[1]
    D1, D2 = dq_from_pose(pose1), dq_from_pose(pose2)
    samples = dq_to_pose(dq_sclerp(D1, D2, np.linspace(0.0, 1.0, 11)))
    steps = samples[:-1].inverse().compose(samples[1:])
    assert np.allclose(steps.translation, steps.translation[0], atol=1e-9)
    assert np.allclose(
        rotation_angle_between(steps.rotation, steps.rotation[0]), 0.0, atol=1e-7
    )


def test_dq_sclerp_halfway_squares_to_the_whole():
    rng = np.random.default_rng(15)
    poses = random_poses(rng, 2)
    pose1, pose2 = poses[0], poses[1]
    D1, D2 = dq_from_pose(pose1), dq_from_pose(pose2)
    if np.dot(D1.real, D2.real) < 0:
        D2 = -D2
    S = dq_sclerp(D1, D2, 0.5)
    half = dq_mul(dq_conjugate(D1), S)
    whole = dq_mul(dq_conjugate(D1), D2)
    assert np.allclose(dq_mul(half, half).as_array(), whole.as_array(), atol=1e-9)


@pytest.mark.parametrize("angle", [1e-3, 1e-4, 1e-5, 2e-6, 5e-7, 1e-7, 1e-8, 0.0])
def test_dq_sclerp_tiny_screw_keeps_the_coupling(angle):
    translation = np.array([0.7, -0.4, 1.3])
    rotation = np.array([np.cos(angle / 2), 0.0, 0.0, np.sin(angle / 2)])
    D2 = dq_from_pose(Pose(translation, rotation))
    S = dq_sclerp(DualQuaternion.identity(), D2, 0.5)
    assert np.allclose(dq_mul(S, S).as_array(), D2.as_array(), rtol=0, atol=1e-12)
    whole = dq_to_pose(dq_mul(S, S))
    assert np.max(np.abs(whole.translation - translation)) < 1e-9
    half_turn = rotation_angle_between(dq_to_pose(S).rotation, rotation)
    assert half_turn == pytest.approx(angle / 2, abs=1e-12)
