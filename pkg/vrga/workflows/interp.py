"""In-between frame generation.

Every pipeline consumes keyframes as (translation, quaternion) and hands back a
Pose, whatever it blends internally.
"""

import time
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from .ga_core import (
    Pose,
    dq_from_pose,
    dq_sclerp,
    dq_to_pose,
    normalize_quaternion,
    quat_mul,
    quat_slerp,
    random_poses,
)
from .motors import (
    CgaMotor,
    PgaMotor,
    motor_apply_points,
    motor_from_pose,
    motor_lerp,
    motor_slerp,
    motor_to_pose,
)


class PipelineKind(str, Enum):
    SOA = "soa"
    DUAL_QUATERNION = "dq"
    MOTOR_PGA = "pga"
    MOTOR_CGA = "cga"

    @property
    def label(self) -> str:
        return PIPELINE_LABELS[self]


PIPELINE_LABELS = {
    PipelineKind.SOA: "Linear Algebra",
    PipelineKind.DUAL_QUATERNION: "Dual Quaternions",
    PipelineKind.MOTOR_PGA: "3D PGA",
    PipelineKind.MOTOR_CGA: "3D CGA",
}


class MotorBlend(str, Enum):
    LERP = "lerp"
    SLERP = "slerp"


MOTOR_TYPES = {PipelineKind.MOTOR_PGA: PgaMotor, PipelineKind.MOTOR_CGA: CgaMotor}


@dataclass(frozen=True, eq=False)
class Keyframe:
    timestamp: float
    entity: str
    pose: Pose


def _pin_endpoints(pose1: Pose, pose2: Pose, a: np.ndarray, result: Pose) -> Pose:
    a = a[..., None]
    translation = np.where(
        a == 0,
        pose1.translation,
        np.where(a == 1, pose2.translation, result.translation),
    )
    rotation = np.where(
        a == 0, pose1.rotation, np.where(a == 1, pose2.rotation, result.rotation)
    )
    return Pose(translation, rotation)


def interpolate_poses(
    pose1: Pose,
    pose2: Pose,
    a,
    kind: Union[PipelineKind, str],
    blend: Union[MotorBlend, str] = MotorBlend.LERP,
) -> Pose:
    """Blend two (stacks of) poses at parameter(s) a; all arguments broadcast."""
    kind = PipelineKind(kind)
    blend = MotorBlend(blend)
    a = np.asarray(a, dtype=np.float64)
    if kind is PipelineKind.SOA:
        result = Pose(
            (1.0 - a)[..., None] * pose1.translation + a[..., None] * pose2.translation,
            quat_slerp(pose1.rotation, pose2.rotation, a),
        )
    elif kind is PipelineKind.DUAL_QUATERNION:
        result = dq_to_pose(dq_sclerp(dq_from_pose(pose1), dq_from_pose(pose2), a))
    else:
        motor_type = MOTOR_TYPES[kind]
        M1 = motor_from_pose(pose1, motor_type)
        M2 = motor_from_pose(pose2, motor_type)
        if blend is MotorBlend.LERP:
            blended = motor_lerp(M1, M2, a)
        else:
            blended = motor_slerp(M1, M2, a)
        result = motor_to_pose(blended)
    return _pin_endpoints(pose1, pose2, a, result)


def interpolation_parameter(t, t1: float, t2: float):
    """Uniform time mapping a = (t - t1) / (t2 - t1)."""
    return (np.asarray(t, dtype=np.float64) - t1) / (t2 - t1)


def _check_pair(k1: Keyframe, k2: Keyframe):
    if k1.entity != k2.entity:
        raise ValueError(
            f"Cannot interpolate between entities {k1.entity!r} and {k2.entity!r}"
        )


def interpolate_pair(
    k1: Keyframe,
    k2: Keyframe,
    a: float,
    kind: Union[PipelineKind, str],
    blend: Union[MotorBlend, str] = MotorBlend.LERP,
) -> Pose:
    _check_pair(k1, k2)
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"Interpolation parameter must lie in [0, 1], got {a}")
    return interpolate_poses(k1.pose, k2.pose, a, kind, blend)


def generate_inbetweens(
    k1: Keyframe,
    k2: Keyframe,
    n: int,
    kind: Union[PipelineKind, str],
    blend: Union[MotorBlend, str] = MotorBlend.LERP,
) -> list[Keyframe]:
    """n frames at a = i / (n + 1), timestamps interpolated linearly."""
    _check_pair(k1, k2)
    if n < 0:
        raise ValueError(f"Number of in-between frames must be non-negative, got {n}")
    if n == 0:
        return []
    a = np.arange(1, n + 1) / (n + 1)
    poses = interpolate_poses(k1.pose, k2.pose, a, kind, blend)
    timestamps = k1.timestamp + a * (k2.timestamp - k1.timestamp)
    return [
        Keyframe(float(timestamp), k1.entity, poses[i])
        for i, timestamp in enumerate(timestamps)
    ]


# equilateral, unit side, centered on its mass center
UNIT_TRIANGLE = np.array(
    [
        [0.0, 1.0 / np.sqrt(3.0), 0.0],
        [-0.5, -0.5 / np.sqrt(3.0), 0.0],
        [0.5, -0.5 / np.sqrt(3.0), 0.0],
    ]
)

# meters; maximum vertex gap between motor LERP and SLERP for relative
# rotations up to 30 degrees and translations up to 0.5 m
LERP_SLERP_BOUND = 1e-2


@dataclass(frozen=True, eq=False)
class LerpSlerpComparison:
    a: np.ndarray
    lerp: np.ndarray
    slerp: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        return np.linalg.norm(self.lerp - self.slerp, axis=-1)

    @property
    def max_deviation(self) -> float:
        return float(self.deviation.max(initial=0.0))


def compare_lerp_slerp(
    pose1: Pose,
    pose2: Pose,
    n: int = 20,
    kind: Union[PipelineKind, str] = PipelineKind.MOTOR_CGA,
    vertices: np.ndarray = UNIT_TRIANGLE,
) -> LerpSlerpComparison:
    """Move a shape between two poses with motor LERP and with motor SLERP.

    Poses may be stacked; the sample axis is appended after their batch axes,
    the vertex axis after that.
    """
    motor_type = MOTOR_TYPES[PipelineKind(kind)]
    a = np.arange(1, n + 1) / (n + 1)
    pose1 = Pose(pose1.translation[..., None, :], pose1.rotation[..., None, :])
    pose2 = Pose(pose2.translation[..., None, :], pose2.rotation[..., None, :])
    images = []
    for blend in (MotorBlend.LERP, MotorBlend.SLERP):
        poses = interpolate_poses(pose1, pose2, a, kind, blend)
        motors = motor_from_pose(poses, motor_type)
        motors = motor_type(motors.coefficients[..., None, :])
        images.append(motor_apply_points(motors, vertices))
    return LerpSlerpComparison(a, images[0], images[1])


def random_relative_poses(
    rng: np.random.Generator, n: int, max_angle_deg: float, max_translation: float
) -> Pose:
    axis = rng.normal(size=(n, 3))
    axis /= np.linalg.norm(axis, axis=-1)[:, None]
    half_angle = 0.5 * np.radians(rng.uniform(0.0, max_angle_deg, size=n))
    rotation = np.concatenate(
        [np.cos(half_angle)[:, None], np.sin(half_angle)[:, None] * axis], axis=-1
    )
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=-1)[:, None]
    translation = direction * rng.uniform(0.0, max_translation, size=n)[:, None]
    return Pose(translation, normalize_quaternion(rotation))


def calibrate_lerp_slerp_bound(
    n_pairs: int = 2000,
    seed: int = 0,
    max_angle_deg: float = 30.0,
    max_translation: float = 0.5,
    n: int = 20,
    kind: Union[PipelineKind, str] = PipelineKind.MOTOR_CGA,
) -> float:
    """Dense sampling of the LERP/SLERP vertex gap over random pose pairs."""
    rng = np.random.default_rng(seed)
    start = Pose(
        rng.uniform(-1.0, 1.0, size=(n_pairs, 3)),
        normalize_quaternion(rng.normal(size=(n_pairs, 4))),
    )
    relative = random_relative_poses(rng, n_pairs, max_angle_deg, max_translation)
    end = Pose(
        start.translation + relative.translation,
        quat_mul(start.rotation, relative.rotation),
    )
    return compare_lerp_slerp(start, end, n=n, kind=kind).max_deviation


LERP_SLERP_COLUMNS = [
    "sample",
    "a",
    "vertex",
    "lerp_x",
    "lerp_y",
    "lerp_z",
    "slerp_x",
    "slerp_y",
    "slerp_z",
    "deviation",
]


def lerp_slerp_table(comparison: LerpSlerpComparison) -> pd.DataFrame:
    """One row per (sample, vertex) of a single pose pair comparison."""
    n_samples, n_vertices = comparison.lerp.shape[-3:-1]
    sample, vertex = np.meshgrid(
        np.arange(1, n_samples + 1), np.arange(n_vertices), indexing="ij"
    )
    lerp = comparison.lerp.reshape(-1, 3)
    slerp = comparison.slerp.reshape(-1, 3)
    return pd.DataFrame(
        {
            "sample": sample.ravel(),
            "a": np.repeat(comparison.a, n_vertices),
            "vertex": vertex.ravel(),
            "lerp_x": lerp[:, 0],
            "lerp_y": lerp[:, 1],
            "lerp_z": lerp[:, 2],
            "slerp_x": slerp[:, 0],
            "slerp_y": slerp[:, 1],
            "slerp_z": slerp[:, 2],
            "deviation": comparison.deviation.ravel(),
        },
        columns=LERP_SLERP_COLUMNS,
    )


BENCH_COLUMNS = ["pipeline", "mode", "frames", "us_per_frame", "relative_to_soa_pct"]
BENCH_MODES = ("batched", "scalar")


def _time_pipeline(pose1, pose2, a, kind, blend, mode: str) -> float:
    start = time.perf_counter()
    if mode == "batched":
        interpolate_poses(pose1, pose2, a, kind, blend)
    else:
        for i in range(len(a)):
            interpolate_poses(pose1[i], pose2[i], a[i], kind, blend)
    return time.perf_counter() - start


def benchmark_pipelines(
    n_frames: int = 2000,
    seed: int = 0,
    pipelines=tuple(PipelineKind),
    blend: Union[MotorBlend, str] = MotorBlend.LERP,
    scalar_frames: int = 200,
) -> pd.DataFrame:
    """Mean wall time per in-between frame; informational, not reproducible."""
    rng = np.random.default_rng(seed)
    pose1 = random_poses(rng, n_frames, max_translation=2.0)
    pose2 = random_poses(rng, n_frames, max_translation=2.0)
    a = rng.uniform(0.0, 1.0, size=n_frames)
    pipelines = [PipelineKind(kind) for kind in pipelines]
    rows = []
    for mode in BENCH_MODES:
        frames = n_frames if mode == "batched" else min(n_frames, scalar_frames)
        timings = {}
        for kind in tqdm(pipelines, desc=f"Benchmarking {mode}"):
            # first call pays for compilation
            interpolate_poses(pose1[:2], pose2[:2], a[:2], kind, blend)
            elapsed = _time_pipeline(
                pose1[:frames], pose2[:frames], a[:frames], kind, blend, mode
            )
            timings[kind] = 1e6 * elapsed / frames
        baseline = timings.get(PipelineKind.SOA)
        for kind, us_per_frame in timings.items():
            rows.append(
                {
                    "pipeline": kind.value,
                    "mode": mode,
                    "frames": frames,
                    "us_per_frame": us_per_frame,
                    "relative_to_soa_pct": (
                        100.0 * (us_per_frame - baseline) / baseline
                        if baseline
                        else float("nan")
                    ),
                }
            )
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)
