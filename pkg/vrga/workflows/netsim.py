"""Keyframe transmission over a fixed-rate channel and local reconstruction.

The channel is lossless and jitter-free: network quality is modeled purely as
the number of updates per second the sender can push.
"""

import concurrent.futures
import logging
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from .ga_core import Pose, rotation_angle_between
from .interp import Keyframe, MotorBlend, PipelineKind, interpolate_poses

logger = logging.getLogger(__name__)

FLOATS_PER_UPDATE = 7  # 3 translation + 4 quaternion
BYTES_PER_FLOAT = 4
BYTES_PER_UPDATE = FLOATS_PER_UPDATE * BYTES_PER_FLOAT
TIME_TOLERANCE = 1e-9

# (label, update rate of the vector+quaternion stack, update rate of ours)
DEFAULT_TIERS = (
    ("Excellent", 30, 20),
    ("Good", 20, 10),
    ("Mediocre", 15, 7),
    ("Poor", 12, 5),
)

QOE_COLUMNS = [
    "tier",
    "pipeline",
    "update_rate",
    "n_users",
    "bandwidth_bytes_per_sec",
    "rms_position_error",
    "max_position_error",
    "rms_angular_error",
    "max_angular_error",
]
SAVINGS_COLUMNS = [
    "tier",
    "soa_rate",
    "ours_rate",
    "soa_bandwidth_bytes_per_sec",
    "ours_bandwidth_bytes_per_sec",
    "saving_pct",
    "saving",
]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Poses of one entity sampled at a fixed rate from start_time on."""

    entity: str
    rate: float
    poses: Pose
    start_time: float = 0.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"Trajectory rate must be positive, got {self.rate}")
        if len(self.poses.shape) != 1:
            raise ValueError("A trajectory holds a one-dimensional stack of poses")

    def __len__(self) -> int:
        return self.poses.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) / self.rate

    @property
    def duration(self) -> float:
        return (len(self) - 1) / self.rate

    def keyframe(self, index: int) -> Keyframe:
        return Keyframe(float(self.times[index]), self.entity, self.poses[index])

    def keyframes(self) -> list[Keyframe]:
        return [self.keyframe(index) for index in range(len(self))]


@dataclass(frozen=True)
class ChannelConfig:
    update_rate: int
    bytes_per_update: int = BYTES_PER_UPDATE
    label: str = ""

    def __post_init__(self):
        if int(self.update_rate) != self.update_rate or self.update_rate < 1:
            raise ValueError(
                f"Update rate must be a positive integer, got {self.update_rate}"
            )


@dataclass(frozen=True)
class QoeReport:
    rms_position_error: float
    max_position_error: float
    rms_angular_error: float
    max_angular_error: float
    bandwidth_bytes_per_sec: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def sender_indices(n_frames: int, base_rate: float, update_rate: float) -> np.ndarray:
    """Frame indices nearest to t = k / update_rate, plus the final frame."""
    duration = (n_frames - 1) / base_rate
    n_updates = int(np.floor(duration * update_rate + TIME_TOLERANCE)) + 1
    k = np.arange(n_updates)
    indices = np.floor(k * base_rate / update_rate + 0.5).astype(np.int64)
    indices = np.minimum(indices, n_frames - 1)
    return np.unique(np.append(indices, n_frames - 1))


def sample_sender(traj: Trajectory, cfg: ChannelConfig) -> list[Keyframe]:
    if cfg.update_rate > traj.rate + TIME_TOLERANCE:
        raise ValueError(
            f"Update rate {cfg.update_rate} exceeds the trajectory rate {traj.rate}"
        )
    return [
        traj.keyframe(int(index))
        for index in sender_indices(len(traj), traj.rate, cfg.update_rate)
    ]


def bandwidth_of(cfg: ChannelConfig, n_users: int) -> int:
    if n_users < 0:
        raise ValueError(f"Number of users must be non-negative, got {n_users}")
    return int(cfg.update_rate) * int(cfg.bytes_per_update) * int(n_users)


def receiver_reconstruct(
    keyframes: Sequence[Keyframe],
    target_rate: float,
    kind: Union[PipelineKind, str],
    blend: Union[MotorBlend, str] = MotorBlend.LERP,
) -> Trajectory:
    """Interpolate received keyframes onto a uniform grid; no extrapolation."""
    if len(keyframes) < 2:
        raise ValueError(
            f"Reconstruction needs at least 2 keyframes, got {len(keyframes)}"
        )
    entity = keyframes[0].entity
    if any(keyframe.entity != entity for keyframe in keyframes):
        raise ValueError("Keyframes of a stream must belong to one entity")
    times = np.array([keyframe.timestamp for keyframe in keyframes])
    if np.any(np.diff(times) <= 0):
        raise ValueError("Keyframe timestamps must be strictly increasing")
    poses = Pose.stack(keyframe.pose for keyframe in keyframes)

    n_frames = int(np.floor((times[-1] - times[0]) * target_rate + TIME_TOLERANCE)) + 1
    targets = times[0] + np.arange(n_frames) / target_rate
    segment = np.searchsorted(times, targets + TIME_TOLERANCE, side="right") - 1
    segment = np.clip(segment, 0, len(times) - 2)
    start, end = times[segment], times[segment + 1]
    a = np.clip((targets - start) / (end - start), 0.0, 1.0)
    a[np.abs(targets - start) <= TIME_TOLERANCE] = 0.0
    a[np.abs(targets - end) <= TIME_TOLERANCE] = 1.0

    reconstructed = interpolate_poses(
        poses[segment], poses[segment + 1], a, kind, blend
    )
    return Trajectory(entity, target_rate, reconstructed, start_time=float(times[0]))


def qoe_compare(
    ground: Trajectory, reconstructed: Trajectory, bandwidth_bytes_per_sec: int = 0
) -> QoeReport:
    if ground.entity != reconstructed.entity:
        raise ValueError(
            f"Cannot compare {ground.entity!r} with {reconstructed.entity!r}"
        )
    if (
        abs(ground.rate - reconstructed.rate) > TIME_TOLERANCE
        or len(ground) != len(reconstructed)
        or abs(ground.start_time - reconstructed.start_time) > TIME_TOLERANCE
    ):
        raise ValueError("Trajectories differ in rate or span")
    position_error = np.linalg.norm(
        ground.poses.translation - reconstructed.poses.translation, axis=-1
    )
    angular_error = rotation_angle_between(
        ground.poses.rotation, reconstructed.poses.rotation
    )
    return QoeReport(
        rms_position_error=float(np.sqrt(np.mean(position_error**2))),
        max_position_error=float(position_error.max()),
        rms_angular_error=float(np.sqrt(np.mean(angular_error**2))),
        max_angular_error=float(angular_error.max()),
        bandwidth_bytes_per_sec=int(bandwidth_bytes_per_sec),
    )


def saving_percent(soa_bandwidth: int, ours_bandwidth: int) -> int:
    """Bandwidth saving in whole percent, halves rounded up."""
    if soa_bandwidth == 0:
        return 0
    return (200 * (soa_bandwidth - ours_bandwidth) + soa_bandwidth) // (
        2 * soa_bandwidth
    )


def savings_report(
    tiers: Iterable[tuple[str, int, int]] = DEFAULT_TIERS,
    n_users: int = 1,
    bytes_per_update: int = BYTES_PER_UPDATE,
) -> pd.DataFrame:
    rows = []
    for label, soa_rate, ours_rate in tiers:
        soa = bandwidth_of(ChannelConfig(soa_rate, bytes_per_update, label), n_users)
        ours = bandwidth_of(ChannelConfig(ours_rate, bytes_per_update, label), n_users)
        saving = saving_percent(soa, ours)
        rows.append(
            {
                "tier": label,
                "soa_rate": soa_rate,
                "ours_rate": ours_rate,
                "soa_bandwidth_bytes_per_sec": soa,
                "ours_bandwidth_bytes_per_sec": ours,
                "saving_pct": saving,
                "saving": f"{saving}% less bandwidth",
            }
        )
    return pd.DataFrame(rows, columns=SAVINGS_COLUMNS)


def evaluate_cell(
    trajectory: Trajectory,
    tier: str,
    kind: Union[PipelineKind, str],
    update_rate: int,
    n_users: int = 1,
    blend: Union[MotorBlend, str] = MotorBlend.LERP,
) -> dict:
    kind = PipelineKind(kind)
    cfg = ChannelConfig(update_rate, label=tier)
    keyframes = sample_sender(trajectory, cfg)
    reconstructed = receiver_reconstruct(keyframes, trajectory.rate, kind, blend)
    report = qoe_compare(trajectory, reconstructed, bandwidth_of(cfg, n_users))
    return {
        "tier": tier,
        "pipeline": kind.value,
        "update_rate": update_rate,
        "n_users": n_users,
        **report.as_dict(),
    }


def simulate_sweep(
    trajectory: Trajectory,
    tiers: Iterable[tuple[str, int, int]],
    pipelines: Iterable[Union[PipelineKind, str]],
    n_users: int = 1,
    blend: Union[MotorBlend, str] = MotorBlend.LERP,
    jobs: int = 1,
) -> pd.DataFrame:
    """One row per (tier, pipeline): the vector+quaternion stack runs at the
    tier's own rate, every other pipeline at the reduced rate."""
    pipelines = [PipelineKind(kind) for kind in pipelines]
    cells = [
        (label, kind, soa_rate if kind is PipelineKind.SOA else ours_rate)
        for label, soa_rate, ours_rate in tiers
        for kind in pipelines
    ]

    def run(cell):
        label, kind, update_rate = cell
        logger.debug(f"Simulating {label} with {kind.value} at {update_rate} Hz")
        return evaluate_cell(trajectory, label, kind, update_rate, n_users, blend)

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as executor:
            rows = list(
                tqdm(executor.map(run, cells), total=len(cells), desc="Simulating")
            )
    else:
        rows = [run(cell) for cell in tqdm(cells, desc="Simulating")]
    return pd.DataFrame(rows, columns=QOE_COLUMNS)
