"""Seeded synthetic motion standing in for captured head and hand tracks."""

from dataclasses import dataclass

import numpy as np

from .ga_core import (
    Pose,
    euler_array_to_quat,
    identity_quaternion,
    quat_mul,
    quat_slerp,
    rotation_angle_between,
)
from .netsim import Trajectory


@dataclass(frozen=True)
class MotionModel:
    """Hand-controller scale motion.

    Translation is a sum of sinusoids per axis, rotation eases through random
    waypoints around a base orientation. ``scale`` multiplies every excursion,
    so 0 yields a static pose.
    """

    max_amplitude: float = 0.3
    max_frequency: float = 1.5
    n_sinusoids: int = 3
    waypoint_interval: float = 0.5
    max_angular_velocity_deg: float = 120.0
    waypoint_spread_deg: float = 35.0
    scale: float = 1.0


def frame_count(duration: float, rate: float) -> int:
    return int(np.floor(duration * rate + 1e-9)) + 1


def sinusoid_translation(
    rng: np.random.Generator, t: np.ndarray, motion: MotionModel
) -> np.ndarray:
    shape = (3, motion.n_sinusoids)
    amplitude = (
        rng.uniform(0.2, 1.0, size=shape) * motion.max_amplitude / motion.n_sinusoids
    )
    frequency = rng.uniform(0.1, motion.max_frequency, size=shape)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    waves = amplitude * np.sin(
        2.0 * np.pi * frequency * t[:, None, None] + phase
    )
    return motion.scale * waves.sum(axis=-1)


def _random_offset(rng: np.random.Generator, max_angle_deg: float) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    half = 0.5 * np.radians(rng.uniform(0.0, max_angle_deg))
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def waypoint_rotation(
    rng: np.random.Generator, t: np.ndarray, motion: MotionModel
) -> np.ndarray:
    """Smoothstep-eased SLERP through waypoints spaced waypoint_interval apart.

    The easing peaks at 1.5 times the mean speed of a segment, so each
    waypoint step is capped at max_angular_velocity * interval / 1.5.
    """
    base = euler_array_to_quat(rng.uniform([15.0, 30.0, 15.0], [35.0, 60.0, 35.0]))
    max_step = (
        np.radians(motion.max_angular_velocity_deg)
        * motion.waypoint_interval
        / 1.5
        * motion.scale
    )
    n_waypoints = int(np.ceil(t[-1] / motion.waypoint_interval)) + 2
    offsets = [identity_quaternion()]
    for _ in range(n_waypoints - 1):
        proposal = _random_offset(rng, motion.waypoint_spread_deg * motion.scale)
        step = float(rotation_angle_between(offsets[-1], proposal))
        if step > max_step:
            proposal = quat_slerp(offsets[-1], proposal, max_step / step)
        offsets.append(proposal)
    waypoints = quat_mul(base, np.array(offsets))

    position = t / motion.waypoint_interval
    segment = np.floor(position).astype(np.int64)
    u = position - segment
    eased = u * u * (3.0 - 2.0 * u)
    return quat_slerp(waypoints[segment], waypoints[segment + 1], eased)


def synthetic_trajectory(
    entity: str,
    seed: int,
    duration: float,
    rate: float = 90.0,
    motion: MotionModel = MotionModel(),
    base_position=(0.0, 1.2, 0.3),
    start_time: float = 0.0,
) -> Trajectory:
    rng = np.random.default_rng(seed)
    t = np.arange(frame_count(duration, rate)) / rate
    translation = np.asarray(base_position) + sinusoid_translation(rng, t, motion)
    rotation = waypoint_rotation(rng, t, motion)
    return Trajectory(entity, rate, Pose(translation, rotation), start_time)


def constant_velocity_trajectory(
    entity: str,
    step,
    n_frames: int,
    rate: float = 90.0,
    start_position=(0.5, 1.0, 0.25),
    euler_deg=(10.0, 20.0, 30.0),
) -> Trajectory:
    """Straight-line motion advancing ``step`` meters per frame, fixed rotation."""
    steps = np.arange(n_frames)[:, None] * np.asarray(step)
    translation = np.asarray(start_position) + steps
    rotation = np.broadcast_to(euler_array_to_quat(euler_deg), (n_frames, 4))
    return Trajectory(entity, rate, Pose(translation, rotation))
