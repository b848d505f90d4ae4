"""Quaternion, dual-number and dual-quaternion algebra.

Quaternion arrays are ordered (w, x, y, z) and may carry any number of leading
batch axes. Dual quaternions and poses wrap such arrays, so every operation in
this module works on a single value and on a stack of values alike.
"""

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from scipy.spatial.transform import Rotation

UNIT_TOLERANCE = 1e-9
INPUT_TOLERANCE = 1e-6

# intrinsic rotations, q = q_z * q_x * q_y
EULER_SEQUENCE = "ZXY"


def as_quaternion(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1:] != (4,):
        raise ValueError(
            f"Quaternions need a trailing axis of length 4, got shape {q.shape}"
        )
    return q


def as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1:] != (3,):
        raise ValueError(
            f"Vectors need a trailing axis of length 3, got shape {v.shape}"
        )
    return v


def identity_quaternion(shape=()) -> np.ndarray:
    q = np.zeros(tuple(shape) + (4,))
    q[..., 0] = 1.0
    return q


def pure_quaternion(v) -> np.ndarray:
    v = as_vector(v)
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)


def quat_mul(q, p) -> np.ndarray:
    """Hamilton product q * p."""
    q = as_quaternion(q)
    p = as_quaternion(p)
    qw, qx, qy, qz = np.moveaxis(q, -1, 0)
    pw, px, py, pz = np.moveaxis(p, -1, 0)
    return np.stack(
        (
            qw * pw - qx * px - qy * py - qz * pz,
            qw * px + qx * pw + qy * pz - qz * py,
            qw * py - qx * pz + qy * pw + qz * px,
            qw * pz + qx * py - qy * px + qz * pw,
        ),
        axis=-1,
    )


def quat_conjugate(q) -> np.ndarray:
    return as_quaternion(q) * np.array([1.0, -1.0, -1.0, -1.0])


def quat_dot(q, p) -> np.ndarray:
    return np.sum(as_quaternion(q) * as_quaternion(p), axis=-1)


def quat_norm(q) -> np.ndarray:
    return np.linalg.norm(as_quaternion(q), axis=-1)


class QuaternionParts(NamedTuple):
    conjugate: np.ndarray
    norm: Union[float, np.ndarray]
    inverse: Optional[np.ndarray]


def quat_conjugate_norm_inverse(q) -> QuaternionParts:
    """Conjugate, norm and inverse of q.

    The inverse of a zero quaternion is undefined: it is reported as None for a
    single quaternion and as a row of NaN inside a batch.
    """
    q = as_quaternion(q)
    conjugate = quat_conjugate(q)
    norm = quat_norm(q)
    if q.ndim == 1:
        if norm == 0:
            return QuaternionParts(conjugate, float(norm), None)
        return QuaternionParts(conjugate, float(norm), conjugate / norm**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        inverse = np.where(
            norm[..., None] > 0, conjugate / norm[..., None] ** 2, np.nan
        )
    return QuaternionParts(conjugate, norm, inverse)


def is_unit_quaternion(q, tolerance: float = UNIT_TOLERANCE) -> np.ndarray:
    q = as_quaternion(q)
    return np.abs(np.sum(q**2, axis=-1) - 1.0) <= tolerance


def normalize_quaternion(q) -> np.ndarray:
    q = as_quaternion(q)
    norm = quat_norm(q)
    if np.any(norm == 0):
        raise ValueError("Cannot normalize a zero quaternion")
    return q / norm[..., None]


def align_hemisphere(reference, q) -> np.ndarray:
    """Flip q where it lies in the opposite hemisphere of reference."""
    q = as_quaternion(q)
    return np.where(quat_dot(reference, q)[..., None] < 0, -q, q)


def quat_rotate_point(q, point) -> np.ndarray:
    q = as_quaternion(q)
    if not np.all(is_unit_quaternion(q)):
        raise ValueError("Rotating a point needs a unit quaternion")
    rotated = quat_mul(quat_mul(q, pure_quaternion(point)), quat_conjugate(q))
    return rotated[..., 1:]


def quat_power(q, a) -> np.ndarray:
    """Unit quaternion raised to a real power: the rotation by a times the angle."""
    q = as_quaternion(q)
    a = np.asarray(a, dtype=np.float64)
    vector = q[..., 1:]
    sin_half = np.linalg.norm(vector, axis=-1)
    half_angle = np.arctan2(sin_half, q[..., 0])
    axis = np.divide(
        vector,
        sin_half[..., None],
        out=np.zeros_like(vector),
        where=sin_half[..., None] > 0,
    )
    scaled = a * half_angle
    cos_part = np.cos(scaled)[..., None]
    sin_part = np.sin(scaled)[..., None] * axis
    cos_part = np.broadcast_to(cos_part, sin_part.shape[:-1] + (1,))
    return np.concatenate([cos_part, sin_part], axis=-1)


def quat_slerp(q1, q2, a) -> np.ndarray:
    """Shortest-path spherical blend q1 (q1^-1 q2)^a of two unit quaternions."""
    q1 = as_quaternion(q1)
    q2 = align_hemisphere(q1, q2)
    return quat_mul(q1, quat_power(quat_mul(quat_conjugate(q1), q2), a))


def rotation_angle_between(q1, q2) -> np.ndarray:
    """Geodesic angle in radians between the rotations of two unit quaternions."""
    relative = quat_mul(quat_conjugate(q1), q2)
    return 2.0 * np.arctan2(
        np.linalg.norm(relative[..., 1:], axis=-1), np.abs(relative[..., 0])
    )


def random_unit_quaternions(rng: np.random.Generator, n: int) -> np.ndarray:
    return normalize_quaternion(rng.normal(size=(n, 4)))


def canonical_degrees(angles) -> np.ndarray:
    """Wrap angles in degrees to [-180, 180)."""
    return (np.asarray(angles, dtype=np.float64) + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class EulerAngles:
    theta_x: float
    theta_y: float
    theta_z: float

    def __post_init__(self):
        for name in ("theta_x", "theta_y", "theta_z"):
            object.__setattr__(
                self, name, float(canonical_degrees(getattr(self, name)))
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_x, self.theta_y, self.theta_z])


def euler_array_to_quat(angles) -> np.ndarray:
    """Euler angles in degrees, ordered (x, y, z) on the last axis, to quaternions."""
    angles = as_vector(angles)
    flat = angles.reshape(-1, 3)
    if flat.shape[0] == 0:
        return np.empty(angles.shape[:-1] + (4,))
    xyzw = Rotation.from_euler(EULER_SEQUENCE, flat[:, [2, 0, 1]], degrees=True)
    xyzw = xyzw.as_quat()
    return xyzw[:, [3, 0, 1, 2]].reshape(angles.shape[:-1] + (4,))


def quat_array_to_euler(q) -> np.ndarray:
    """Unit quaternions to Euler angles in degrees, ordered (x, y, z).

    At gimbal lock (|theta_x| = 90) the y angle is set to zero and the whole
    turn about the vertical goes to theta_z.
    """
    q = as_quaternion(q)
    flat = q.reshape(-1, 4)
    if flat.shape[0] == 0:
        return np.empty(q.shape[:-1] + (3,))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        zxy = Rotation.from_quat(flat[:, [1, 2, 3, 0]]).as_euler(
            EULER_SEQUENCE, degrees=True
        )
    return canonical_degrees(zxy[:, [1, 2, 0]]).reshape(q.shape[:-1] + (3,))


def euler_to_quat(e: EulerAngles) -> np.ndarray:
    return euler_array_to_quat(e.as_array())


def quat_to_euler(q) -> EulerAngles:
    return EulerAngles(*quat_array_to_euler(q))


@dataclass(frozen=True)
class DualNumber:
    real: Union[float, np.ndarray]
    dual: Union[float, np.ndarray] = 0.0

    def __add__(self, other: "DualNumber") -> "DualNumber":
        return dual_add(self, other)

    def __mul__(self, other: "DualNumber") -> "DualNumber":
        return dual_mul(self, other)


def dual_add(d1: DualNumber, d2: DualNumber) -> DualNumber:
    return DualNumber(d1.real + d2.real, d1.dual + d2.dual)


def dual_mul(d1: DualNumber, d2: DualNumber) -> DualNumber:
    return DualNumber(d1.real * d2.real, d1.real * d2.dual + d2.real * d1.dual)


def dual_conjugate(d: DualNumber) -> DualNumber:
    return DualNumber(d.real, -d.dual)


def dual_inverse(d: DualNumber) -> DualNumber:
    if np.any(np.asarray(d.real) == 0):
        raise ValueError(
            "A dual number with zero real part has no inverse "
            "(dual numbers form a ring and not a field)"
        )
    inverse = 1.0 / d.real
    return DualNumber(inverse, -d.dual * inverse * inverse)


def dual_function(
    f: Callable[[np.ndarray], np.ndarray],
    derivative: Callable[[np.ndarray], np.ndarray],
    d: DualNumber,
) -> DualNumber:
    """Extend a differentiable real function to dual numbers: f(a) + eps b f'(a)."""
    return DualNumber(f(d.real), d.dual * derivative(d.real))


def dual_sqrt(d: DualNumber) -> DualNumber:
    if np.any(np.asarray(d.real) <= 0):
        raise ValueError("The dual square root needs a positive real part")
    return dual_function(np.sqrt, lambda a: 0.5 / np.sqrt(a), d)


@dataclass(frozen=True, eq=False)
class DualQuaternion:
    """p + eps q with quaternion parts p (real) and q (dual)."""

    real: np.ndarray
    dual: np.ndarray

    def __post_init__(self):
        real, dual = np.broadcast_arrays(
            as_quaternion(self.real), as_quaternion(self.dual)
        )
        object.__setattr__(self, "real", np.array(real))
        object.__setattr__(self, "dual", np.array(dual))

    @classmethod
    def identity(cls, shape=()) -> "DualQuaternion":
        return cls(identity_quaternion(shape), np.zeros(tuple(shape) + (4,)))

    @classmethod
    def from_array(cls, coefficients) -> "DualQuaternion":
        coefficients = np.asarray(coefficients, dtype=np.float64)
        return cls(coefficients[..., :4], coefficients[..., 4:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.real, self.dual], axis=-1)

    @property
    def shape(self) -> tuple:
        return self.real.shape[:-1]

    def __getitem__(self, index) -> "DualQuaternion":
        return DualQuaternion(self.real[index], self.dual[index])

    def __mul__(self, other: "DualQuaternion") -> "DualQuaternion":
        return dq_mul(self, other)

    def __neg__(self) -> "DualQuaternion":
        return DualQuaternion(-self.real, -self.dual)


class DQConjugate(str, Enum):
    STAR = "star"
    BAR = "bar"
    BAR_STAR = "bar_star"


def dq_mul(D1: DualQuaternion, D2: DualQuaternion) -> DualQuaternion:
    return DualQuaternion(
        quat_mul(D1.real, D2.real),
        quat_mul(D1.real, D2.dual) + quat_mul(D1.dual, D2.real),
    )


def dq_conjugate(
    D: DualQuaternion, kind: Union[DQConjugate, str] = DQConjugate.STAR
) -> DualQuaternion:
    kind = DQConjugate(kind)
    if kind is DQConjugate.STAR:
        return DualQuaternion(quat_conjugate(D.real), quat_conjugate(D.dual))
    if kind is DQConjugate.BAR:
        return DualQuaternion(D.real, -D.dual)
    return DualQuaternion(quat_conjugate(D.real), -quat_conjugate(D.dual))


def dq_norm(D: DualQuaternion) -> DualNumber:
    """|D| = sqrt(D D*) = |p| + eps <p, q> / |p|."""
    squared = DualNumber(np.sum(D.real**2, axis=-1), 2.0 * quat_dot(D.real, D.dual))
    if np.any(squared.real == 0):
        raise ValueError("The norm of a dual quaternion needs a nonzero real part")
    return dual_sqrt(squared)


def is_unit_dq(D: DualQuaternion, tolerance: float = UNIT_TOLERANCE) -> np.ndarray:
    return (np.abs(quat_norm(D.real) - 1.0) <= tolerance) & (
        np.abs(quat_dot(D.real, D.dual)) <= tolerance
    )


def dq_normalize(D: DualQuaternion) -> DualQuaternion:
    """Scale to unit real part and project the dual part onto <p, q> = 0."""
    norm = quat_norm(D.real)
    if np.any(norm == 0):
        raise ValueError("Cannot normalize a dual quaternion with zero real part")
    real = D.real / norm[..., None]
    dual = D.dual / norm[..., None]
    dual = dual - quat_dot(real, dual)[..., None] * real
    return DualQuaternion(real, dual)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: rotate by a unit quaternion, then translate.

    Leading axes of translation and rotation are batch axes and broadcast
    against each other.
    """

    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        translation = as_vector(self.translation)
        rotation = as_quaternion(self.rotation)
        deviation = np.abs(np.sum(rotation**2, axis=-1) - 1.0)
        if not np.all(deviation <= INPUT_TOLERANCE):
            raise ValueError(
                f"Pose rotation is not a unit quaternion (|q|^2 - 1 up to {np.nanmax(deviation):.3g})"
            )
        if not np.all(deviation <= UNIT_TOLERANCE):
            rotation = normalize_quaternion(rotation)
        shape = np.broadcast_shapes(translation.shape[:-1], rotation.shape[:-1])
        object.__setattr__(
            self, "translation", np.array(np.broadcast_to(translation, shape + (3,)))
        )
        object.__setattr__(
            self, "rotation", np.array(np.broadcast_to(rotation, shape + (4,)))
        )

    @classmethod
    def identity(cls, shape=()) -> "Pose":
        return cls(np.zeros(tuple(shape) + (3,)), identity_quaternion(shape))

    @classmethod
    def stack(cls, poses) -> "Pose":
        poses = list(poses)
        return cls(
            np.stack([pose.translation for pose in poses]),
            np.stack([pose.rotation for pose in poses]),
        )

    @property
    def shape(self) -> tuple:
        return self.translation.shape[:-1]

    def __len__(self) -> int:
        if not self.shape:
            raise TypeError("A single pose has no length")
        return self.shape[0]

    def __getitem__(self, index) -> "Pose":
        return Pose(self.translation[index], self.rotation[index])

    def apply(self, points) -> np.ndarray:
        return quat_rotate_point(self.rotation, points) + self.translation

    def compose(self, other: "Pose") -> "Pose":
        """The pose applying other first, then self."""
        return Pose(
            self.apply(other.translation), quat_mul(self.rotation, other.rotation)
        )

    def inverse(self) -> "Pose":
        rotation = quat_conjugate(self.rotation)
        return Pose(-quat_rotate_point(rotation, self.translation), rotation)


def random_poses(
    rng: np.random.Generator, n: int, max_translation: float = 5.0
) -> Pose:
    return Pose(
        rng.uniform(-max_translation, max_translation, size=(n, 3)),
        random_unit_quaternions(rng, n),
    )


def dq_from_pose(pose: Pose) -> DualQuaternion:
    """Unit dual quaternion r + eps 1/2 t r."""
    return DualQuaternion(
        pose.rotation, 0.5 * quat_mul(pure_quaternion(pose.translation), pose.rotation)
    )


def _translation_2ab(D: DualQuaternion) -> np.ndarray:
    return 2.0 * quat_mul(D.real, quat_conjugate(D.dual))[..., 1:]


def _translation_2ba(D: DualQuaternion) -> np.ndarray:
    return 2.0 * quat_mul(D.dual, quat_conjugate(D.real))[..., 1:]


# candidate read-outs of the translation of D = A + eps B
TRANSLATION_FORMULAS: dict[str, Callable[[DualQuaternion], np.ndarray]] = {
    "2AB*": _translation_2ab,
    "2BA*": _translation_2ba,
}
TRANSLATION_FORMULA = "2BA*"


def dq_translation(D: DualQuaternion, formula: str = TRANSLATION_FORMULA) -> np.ndarray:
    return TRANSLATION_FORMULAS[formula](D)


def dq_to_pose(D: DualQuaternion) -> Pose:
    if np.any(quat_norm(D.real) == 0):
        raise ValueError("Dual quaternion with zero real part encodes no pose")
    if not np.all(is_unit_dq(D)):
        D = dq_normalize(D)
    return Pose(dq_translation(D), D.real)


def dq_sandwich(D: DualQuaternion, X: DualQuaternion) -> DualQuaternion:
    return dq_mul(dq_mul(D, X), dq_conjugate(D, DQConjugate.BAR_STAR))


def dq_apply_point(D: DualQuaternion, point) -> np.ndarray:
    if not np.all(is_unit_dq(D)):
        raise ValueError("Transforming a point needs a unit dual quaternion")
    point = as_vector(point)
    X = DualQuaternion(identity_quaternion(point.shape[:-1]), pure_quaternion(point))
    return dq_sandwich(D, X).dual[..., 1:]


def translation_formula_deviation(
    formula: str, n_samples: int = 1000, seed: int = 0
) -> float:
    """Largest gap between rotate-then-translate with the given read-out and
    the dual-quaternion sandwich, over seeded random poses and points."""
    rng = np.random.default_rng(seed)
    poses = random_poses(rng, n_samples)
    points = rng.uniform(-1.0, 1.0, size=(n_samples, 3))
    D = dq_from_pose(poses)
    candidate = quat_rotate_point(D.real, points) + dq_translation(D, formula)
    return float(np.max(np.linalg.norm(candidate - dq_apply_point(D, points), axis=-1)))


def select_translation_formula(n_samples: int = 1000, seed: int = 0) -> str:
    return min(
        TRANSLATION_FORMULAS,
        key=lambda formula: translation_formula_deviation(formula, n_samples, seed),
    )


def dq_power(D: DualQuaternion, a) -> DualQuaternion:
    """Unit dual quaternion raised to a real power through its screw parameters.

    The relative rotation angle is expected in [0, pi] (non-negative scalar part).
    """
    a = np.asarray(a, dtype=np.float64)
    real = D.real
    translation = dq_translation(D)
    vector = real[..., 1:]
    sin_half = np.linalg.norm(vector, axis=-1)
    half_angle = np.arctan2(sin_half, real[..., 0])
    axis = np.divide(
        vector,
        sin_half[..., None],
        out=np.zeros_like(vector),
        where=sin_half[..., None] > 0,
    )

    a, half_angle, sin_half = np.broadcast_arrays(a, half_angle, sin_half)
    shape = a.shape
    axis = np.broadcast_to(axis, shape + (3,))
    translation = np.broadcast_to(translation, shape + (3,))

    scaled = a * half_angle
    sin_scaled = np.sin(scaled)
    cos_scaled = np.cos(scaled)
    real_power = np.concatenate(
        [cos_scaled[..., None], sin_scaled[..., None] * axis], axis=-1
    )

    # sin(a h) cot(h) through sinc ratios, finite down to h = 0 where it is a
    with np.errstate(divide="ignore", invalid="ignore"):
        sin_ratio = a * np.sinc(scaled / np.pi) / np.sinc(half_angle / np.pi)
    pitch = np.sum(translation * axis, axis=-1)
    moment = 0.5 * (
        sin_scaled[..., None] * np.cross(translation, axis)
        + (translation - pitch[..., None] * axis)
        * (np.cos(half_angle) * sin_ratio)[..., None]
    )
    scaled_pitch = a * pitch
    dual = np.concatenate(
        [
            (-0.5 * scaled_pitch * sin_scaled)[..., None],
            moment + (0.5 * scaled_pitch * cos_scaled)[..., None] * axis,
        ],
        axis=-1,
    )
    return DualQuaternion(real_power, dual)


def dq_sclerp(D1: DualQuaternion, D2: DualQuaternion, a) -> DualQuaternion:
    """Screw interpolation D1 (D1* D2)^a along the shorter path."""
    sign = np.where(quat_dot(D1.real, D2.real) < 0, -1.0, 1.0)[..., None]
    D2 = DualQuaternion(D2.real * sign, D2.dual * sign)
    relative = dq_mul(dq_conjugate(D1, DQConjugate.STAR), D2)
    return dq_mul(D1, dq_power(relative, a))
