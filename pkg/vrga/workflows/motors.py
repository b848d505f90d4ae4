"""Rigid-body motors M = T R of 3D projective (PGA) and conformal (CGA) algebra.

Motors keep only the coefficients of the blades a translator-rotor product can
reach. PGA uses the degenerate generator e0 (e0^2 = 0); CGA uses e1..e4 squaring
to +1 and e5 squaring to -1, with translators T = 1 - 1/2 t (e4 + e5).
"""

from dataclasses import dataclass
from typing import Type, TypeVar

import numpy as np

from ..exceptions import NotAMotorError
from .algebra import CGA, PGA
from .ga_core import (
    DualQuaternion,
    Pose,
    as_vector,
    dq_apply_point,
    dq_normalize,
    dq_sclerp,
    quat_norm,
)

PGA_BLADES = ("1", "e01", "e02", "e03", "e12", "e13", "e23", "e0123")
CGA_BLADES = (
    "1",
    "e12",
    "e13",
    "e23",
    "e14",
    "e24",
    "e34",
    "e15",
    "e25",
    "e35",
    "e1234",
    "e1235",
)
ROTOR_BLADES = ("1", "e12", "e13", "e23")
PGA_TRANSLATOR_BLADES = ("1", "e01", "e02", "e03")
CGA_TRANSLATOR_BLADES = ("1", "e14", "e24", "e34", "e15", "e25", "e35")
CGA_POINT_BLADES = ("e1", "e2", "e3", "e4", "e5")

# relative to the magnitude of the operands
CLOSURE_TOLERANCE = 1e-12

MotorT = TypeVar("MotorT", bound="Motor")


@dataclass(frozen=True, eq=False)
class Motor:
    coefficients: np.ndarray

    algebra = None
    blades = ()

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if coefficients.shape[-1:] != (len(self.blades),):
            raise ValueError(
                f"{type(self).__name__} needs {len(self.blades)} coefficients, got shape {coefficients.shape}"
            )
        object.__setattr__(self, "coefficients", coefficients)

    @classmethod
    def identity(cls: Type[MotorT], shape=()) -> MotorT:
        coefficients = np.zeros(tuple(shape) + (len(cls.blades),))
        coefficients[..., 0] = 1.0
        return cls(coefficients)

    @classmethod
    def from_blades(cls: Type[MotorT], blades: dict[str, float]) -> MotorT:
        coefficients = np.zeros(len(cls.blades))
        for name, value in blades.items():
            coefficients[cls.blades.index(name)] = value
        return cls(coefficients)

    @property
    def shape(self) -> tuple:
        return self.coefficients.shape[:-1]

    @property
    def rotor(self) -> np.ndarray:
        columns = [self.blades.index(name) for name in ROTOR_BLADES]
        return self.coefficients[..., columns]

    def coefficient(self, name: str) -> np.ndarray:
        return self.coefficients[..., self.blades.index(name)]

    def as_dict(self) -> dict[str, float]:
        assert not self.shape, "Only a single motor converts to a blade map"
        return {
            name: float(value)
            for name, value in zip(self.blades, self.coefficients)
            if value != 0
        }

    def __getitem__(self, index) -> "Motor":
        return type(self)(self.coefficients[index])

    def __mul__(self, other: "Motor") -> "Motor":
        return motor_mul(self, other)

    def __neg__(self) -> "Motor":
        return type(self)(-self.coefficients)


class PgaMotor(Motor):
    algebra = PGA
    blades = PGA_BLADES


class CgaMotor(Motor):
    algebra = CGA
    blades = CGA_BLADES


def rotor_to_quaternion(rotor) -> np.ndarray:
    """a + b e12 + c e13 + d e23 maps to a - d i + c j - b k."""
    a, b, c, d = np.moveaxis(np.asarray(rotor, dtype=np.float64), -1, 0)
    return np.stack((a, -d, c, -b), axis=-1)


def quaternion_to_rotor(q) -> np.ndarray:
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=np.float64), -1, 0)
    return np.stack((w, -z, y, -x), axis=-1)


def _check_same_algebra(M1: Motor, M2: Motor):
    if type(M1) is not type(M2):
        raise ValueError(
            f"Cannot combine a {type(M1).__name__} with a {type(M2).__name__}"
        )


def _check_closure(algebra, dense: np.ndarray, blades, scale: float, what: str):
    bits = algebra.bits(blades)
    residue = np.abs(dense).reshape(-1, algebra.dimension)
    residue[:, bits] = 0.0
    if residue.size and residue.max() > CLOSURE_TOLERANCE * max(1.0, scale):
        worst = int(np.argmax(residue.max(axis=0)))
        raise NotAMotorError(
            f"{what} leaves the {algebra.name} {' '.join(blades)} blades "
            f"({algebra.blade_name(worst)} = {residue.max():.3g})"
        )


def _restrict(cls: Type[MotorT], dense: np.ndarray, scale: float = 1.0) -> MotorT:
    """Keep the motor blades of a dense multivector, refusing anything else."""
    _check_closure(cls.algebra, dense, cls.blades, scale, "Product")
    return cls(dense[..., cls.algebra.bits(cls.blades)])


def motor_mul(M1: MotorT, M2: MotorT) -> MotorT:
    """Geometric product restricted to the motor blade set."""
    _check_same_algebra(M1, M2)
    dense = M1.algebra.product(M1.coefficients, M1.blades, M2.coefficients, M2.blades)
    scale = float(np.max(np.abs(M1.coefficients), initial=0.0)) * float(
        np.max(np.abs(M2.coefficients), initial=0.0)
    )
    return _restrict(type(M1), dense, scale)


def _translator_times_rotor(cls, translator_blades, translator, rotor):
    dense = cls.algebra.product(translator, translator_blades, rotor, ROTOR_BLADES)
    return _restrict(cls, dense, float(np.max(np.abs(translator), initial=1.0)))


def pga_from_pose(pose: Pose) -> PgaMotor:
    """M = T R with T = 1 - 1/2 e0 t."""
    half = -0.5 * pose.translation
    translator = np.concatenate([np.ones(half.shape[:-1] + (1,)), half], axis=-1)
    return _translator_times_rotor(
        PgaMotor,
        PGA_TRANSLATOR_BLADES,
        translator,
        quaternion_to_rotor(pose.rotation),
    )


def _unit_rotor(M: Motor, rotor: np.ndarray):
    norm = np.linalg.norm(rotor, axis=-1)
    if np.any(norm == 0):
        raise NotAMotorError(f"{type(M).__name__} has a zero rotor part")
    return rotor / norm[..., None], M.coefficients / norm[..., None]


def pga_to_pose(M: PgaMotor) -> Pose:
    # e0 M = e0 R kills every blade holding e0
    e0M = PGA.product(np.ones(1), ("e0",), M.coefficients, PGA_BLADES)
    rotor = PGA.coefficients(e0M, ("e0", "e012", "e013", "e023"))
    rotor, coefficients = _unit_rotor(M, rotor)
    rotor_inverse = rotor * np.array([1.0, -1.0, -1.0, -1.0])
    translator = PGA.product(coefficients, PGA_BLADES, rotor_inverse, ROTOR_BLADES)
    scale = float(np.max(np.abs(coefficients), initial=0.0))
    _check_closure(PGA, translator, PGA_TRANSLATOR_BLADES, scale, "M ~R")
    translation = -2.0 * PGA.coefficients(translator, ("e01", "e02", "e03"))
    return Pose(translation, rotor_to_quaternion(rotor))


def cga_from_pose(pose: Pose) -> CgaMotor:
    """M = T R with T = 1 - 1/2 t (e4 + e5)."""
    half = -0.5 * pose.translation
    translator = np.concatenate(
        [np.ones(half.shape[:-1] + (1,)), half, half], axis=-1
    )
    return _translator_times_rotor(
        CgaMotor,
        CGA_TRANSLATOR_BLADES,
        translator,
        quaternion_to_rotor(pose.rotation),
    )


def cga_to_pose(M: CgaMotor) -> Pose:
    rotor, coefficients = _unit_rotor(M, M.rotor)
    rotor_inverse = rotor * np.array([1.0, -1.0, -1.0, -1.0])
    translator = CGA.product(coefficients, CGA_BLADES, rotor_inverse, ROTOR_BLADES)
    scale = float(np.max(np.abs(coefficients), initial=0.0))
    _check_closure(CGA, translator, CGA_TRANSLATOR_BLADES, scale, "M ~R")
    translator = CGA.coefficients(translator, CGA_TRANSLATOR_BLADES)
    # T = 1 - 1/2 t (e4 + e5): e_i4 and e_i5 agree
    mismatch = np.abs(translator[..., 1:4] - translator[..., 4:7])
    if np.any(mismatch > CLOSURE_TOLERANCE * max(1.0, scale)):
        raise NotAMotorError(
            "CgaMotor translator has unequal e4 and e5 parts "
            f"(gap {np.max(mismatch):.3g})"
        )
    translator = translator / translator[..., :1]
    # T (e5 - e4) = t + (e5 - e4) + trivector terms
    extraction = CGA.product(
        translator, CGA_TRANSLATOR_BLADES, np.array([-1.0, 1.0]), ("e4", "e5")
    )
    translation = CGA.coefficients(extraction, ("e1", "e2", "e3"))
    return Pose(translation, rotor_to_quaternion(rotor))


def motor_from_pose(pose: Pose, cls: Type[MotorT]) -> MotorT:
    if cls is PgaMotor:
        return pga_from_pose(pose)
    if cls is CgaMotor:
        return cga_from_pose(pose)
    raise ValueError(f"Unknown motor type {cls!r}")


def motor_to_pose(M: Motor) -> Pose:
    if isinstance(M, PgaMotor):
        return pga_to_pose(M)
    if isinstance(M, CgaMotor):
        return cga_to_pose(M)
    raise ValueError(f"Unknown motor type {type(M)!r}")


def motor_to_dq(M: Motor) -> DualQuaternion:
    """Exact isomorphism: R + e0 Y (PGA) or R + Y (e4 + e5) (CGA) to r + eps q.

    The Euclidean part Y = y1 e1 + y2 e2 + y3 e3 + y123 e123 maps to
    q = -(y123, y1, y2, y3).
    """
    real = rotor_to_quaternion(M.rotor)
    if isinstance(M, PgaMotor):
        y = M.coefficients[..., [7, 1, 2, 3]]
    else:
        # e_i4 and e_i5 carry the same coefficient in a motor
        y = 0.5 * (
            M.coefficients[..., [10, 4, 5, 6]] + M.coefficients[..., [11, 7, 8, 9]]
        )
    return DualQuaternion(real, -y)


def dq_to_motor(D: DualQuaternion, cls: Type[MotorT]) -> MotorT:
    a, b, c, d = np.moveaxis(quaternion_to_rotor(D.real), -1, 0)
    y123, y1, y2, y3 = np.moveaxis(-D.dual, -1, 0)
    if cls is PgaMotor:
        return PgaMotor(np.stack((a, y1, y2, y3, b, c, d, y123), axis=-1))
    if cls is CgaMotor:
        return CgaMotor(
            np.stack((a, b, c, d, y1, y2, y3, y1, y2, y3, y123, y123), axis=-1)
        )
    raise ValueError(f"Unknown motor type {cls!r}")


def motor_normalize(M: MotorT) -> MotorT:
    """Unit rotor part with the non-motor residue of a blend projected out."""
    D = motor_to_dq(M)
    if np.any(quat_norm(D.real) == 0):
        raise NotAMotorError(f"{type(M).__name__} has a zero rotor part")
    return dq_to_motor(dq_normalize(D), type(M))


def motor_lerp(M1: MotorT, M2: MotorT, a) -> MotorT:
    """(1 - a) M1 + a M2, normalized."""
    _check_same_algebra(M1, M2)
    a = np.asarray(a, dtype=np.float64)[..., None]
    second = M2.coefficients
    flip = np.sum(M1.rotor * M2.rotor, axis=-1)[..., None] < 0
    second = np.where(flip, -second, second)
    return motor_normalize(type(M1)((1.0 - a) * M1.coefficients + a * second))


def motor_slerp(M1: MotorT, M2: MotorT, a) -> MotorT:
    """M1 (M1^-1 M2)^a, evaluated on the isomorphic dual quaternions."""
    _check_same_algebra(M1, M2)
    blended = dq_sclerp(motor_to_dq(M1), motor_to_dq(M2), a)
    return dq_to_motor(blended, type(M1))


def cga_up(points) -> np.ndarray:
    """Conformal points x + 1/2 |x|^2 n_inf + n_0 on the blades e1..e5."""
    points = as_vector(points)
    half_square = 0.5 * np.sum(points**2, axis=-1)[..., None]
    return np.concatenate([points, half_square - 0.5, half_square + 0.5], axis=-1)


def cga_down(vectors) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    weight = vectors[..., 4] - vectors[..., 3]
    return vectors[..., :3] / weight[..., None]


def cga_apply_points(M: CgaMotor, points) -> np.ndarray:
    """Sandwich M X ~M on conformal points, projected back to 3D."""
    M = motor_normalize(M)
    X = cga_up(points)
    MX = CGA.product(M.coefficients, CGA_BLADES, X, CGA_POINT_BLADES)
    reverse = M.coefficients * CGA.reverse_signs(CGA_BLADES)
    image = CGA.product(MX, CGA.dense_blades, reverse, CGA_BLADES)
    return cga_down(CGA.coefficients(image, CGA_POINT_BLADES))


def motor_apply_points(M: Motor, points) -> np.ndarray:
    if isinstance(M, CgaMotor):
        return cga_apply_points(M, points)
    return dq_apply_point(dq_normalize(motor_to_dq(M)), points)


