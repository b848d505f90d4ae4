"""Frame-skip compression of recorded sessions and interpolated reconstruction.

Only head and hand files are thinned; object files hold sparse, motion-only
records and stay as recorded, as do all message files.
"""

import logging
from typing import Optional, Union

import numpy as np
import pandas as pd

from ..exceptions import GridMismatchError, MissingSkipError
from ..recording import TRANSFORM_COLUMNS, RecordingSession, TrackedEntity
from .ga_core import Pose, canonical_degrees, euler_array_to_quat, quat_array_to_euler
from .interp import MotorBlend, PipelineKind, interpolate_poses

logger = logging.getLogger(__name__)

GRID_TOLERANCE = 1e-3  # frames
ZERO_NORM = 1e-12
PIPELINE_BY_ID = {kind.value: kind for kind in PipelineKind}

ERROR_COLUMNS = [
    "frame_index",
    "t",
    "rel_err_translation_pct",
    "rel_err_rotation_pct",
    "pipeline",
    "player_id",
    "entity",
    "zero_norm_translation",
    "zero_norm_rotation",
]
MEANS_COLUMNS = [
    "skip_n",
    "pipeline",
    "label",
    "mean_rel_err_translation_pct",
    "mean_rel_err_rotation_pct",
    "frames",
]


def kept_rows(n_rows: int, n: int) -> np.ndarray:
    """Rows with index divisible by n, plus the last one."""
    keep = np.arange(n_rows) % n == 0
    if n_rows:
        keep[-1] = True
    return keep


def compress_skip(session: RecordingSession, n: int) -> RecordingSession:
    if int(n) != n or n < 2:
        raise ValueError(f"Frame skip must be an integer of at least 2, got {n}")
    if session.info.skip_n is not None:
        raise ValueError(
            f"Session is already compressed with skip_n={session.info.skip_n}"
        )
    transforms = {}
    for entity, table in session.transforms.items():
        if entity.is_object:
            transforms[entity] = table
        else:
            transforms[entity] = table[kept_rows(len(table), n)].reset_index(drop=True)
    compressed = RecordingSession(
        session.info, transforms, session.messages
    ).replace_info(skip_n=int(n))
    logger.info(
        f"Compressed with n={n}: {session.transform_bytes()} -> "
        f"{compressed.transform_bytes()} transform bytes"
    )
    return compressed


def storage_report(original: RecordingSession, compressed: RecordingSession) -> dict:
    before = original.transform_bytes()
    after = compressed.transform_bytes()
    return {
        "bytes_before": before,
        "bytes_after": after,
        "ratio": after / before if before else 1.0,
    }


def frame_indices(times: np.ndarray, rate: float, path: str = "") -> np.ndarray:
    position = np.asarray(times, dtype=np.float64) * rate
    indices = np.round(position).astype(np.int64)
    off_grid = np.abs(position - indices) > GRID_TOLERANCE
    if np.any(off_grid):
        row = int(np.argmax(off_grid))
        raise GridMismatchError(
            f"{path}: t={times[row]:g} is not on the {rate:g} Hz frame grid"
        )
    if np.any(np.diff(indices) <= 0):
        raise GridMismatchError(f"{path}: frame times are not strictly increasing")
    return indices


def reconstruct_table(
    table: pd.DataFrame,
    rate: float,
    kind: Union[PipelineKind, str],
    blend: Union[MotorBlend, str] = MotorBlend.LERP,
    path: str = "",
) -> pd.DataFrame:
    """Fill every frame between kept rows at a = m / (gap length)."""
    if len(table) < 2:
        return table.reset_index(drop=True)
    kept = frame_indices(table["t"].to_numpy(), rate, path)
    targets = np.arange(kept[0], kept[-1] + 1)
    segment = np.searchsorted(kept, targets, side="right") - 1
    segment = np.clip(segment, 0, len(kept) - 2)
    a = (targets - kept[segment]) / (kept[segment + 1] - kept[segment])

    values = table[TRANSFORM_COLUMNS].to_numpy()
    poses = Pose(values[:, 1:4], euler_array_to_quat(values[:, 4:7]))
    blended = interpolate_poses(poses[segment], poses[segment + 1], a, kind, blend)

    rows = np.column_stack(
        [
            targets / rate,
            blended.translation,
            quat_array_to_euler(blended.rotation),
        ]
    )
    # kept frames stay exactly as stored
    is_kept = np.isin(targets, kept)
    rows[is_kept] = values
    return pd.DataFrame(rows, columns=TRANSFORM_COLUMNS)


def reconstruct_recording(
    session: RecordingSession,
    kind: Union[PipelineKind, str],
    blend: Union[MotorBlend, str] = MotorBlend.LERP,
) -> RecordingSession:
    kind = PipelineKind(kind)
    n = session.info.skip_n
    if n is None:
        raise MissingSkipError(
            "The session carries no skip_n; only compressed sessions can be reconstructed"
        )
    transforms = {}
    for entity, table in session.transforms.items():
        if entity.is_object:
            transforms[entity] = table
            continue
        transforms[entity] = reconstruct_table(
            table, session.info.frame_rate, kind, blend, entity.transform_file
        )
    logger.info(f"Reconstructed n={n} with the {kind.label} pipeline")
    return RecordingSession(session.info, transforms, session.messages).replace_info(
        skip_n=None, reconstructed_from=n, pipeline=kind.value
    )


def interpolated_mask(n_rows: int, skip_n: Optional[int]) -> np.ndarray:
    if skip_n is None:
        return np.ones(n_rows, dtype=bool)
    return ~kept_rows(n_rows, skip_n)


def relative_error_pct(
    original: np.ndarray, reconstructed: np.ndarray, wrap: bool = False
):
    """Euclidean relative error in percent.

    Rows whose original has zero norm report the absolute error instead and
    are flagged.
    """
    difference = reconstructed - original
    if wrap:
        difference = canonical_degrees(difference)
    error = np.linalg.norm(difference, axis=-1)
    norm = np.linalg.norm(original, axis=-1)
    zero_norm = norm < ZERO_NORM
    relative = np.where(
        zero_norm, error, 100.0 * error / np.where(zero_norm, 1.0, norm)
    )
    return relative, zero_norm


def _entity_errors(
    entity: TrackedEntity,
    original: pd.DataFrame,
    reconstructed: pd.DataFrame,
    rate: float,
    skip_n: Optional[int],
    pipeline: str,
) -> pd.DataFrame:
    if len(original) != len(reconstructed) or not np.array_equal(
        frame_indices(original["t"].to_numpy(), rate, entity.transform_file),
        frame_indices(reconstructed["t"].to_numpy(), rate, entity.transform_file),
    ):
        raise GridMismatchError(
            f"{entity.transform_file}: sessions do not share a frame grid "
            f"({len(original)} vs {len(reconstructed)} frames)"
        )
    rows = np.flatnonzero(interpolated_mask(len(original), skip_n))
    o = original[TRANSFORM_COLUMNS].to_numpy()[rows]
    r = reconstructed[TRANSFORM_COLUMNS].to_numpy()[rows]
    translation, zero_translation = relative_error_pct(o[:, 1:4], r[:, 1:4])
    rotation, zero_rotation = relative_error_pct(o[:, 4:7], r[:, 4:7], wrap=True)
    return pd.DataFrame(
        {
            "frame_index": rows,
            "t": o[:, 0],
            "rel_err_translation_pct": translation,
            "rel_err_rotation_pct": rotation,
            "pipeline": pipeline,
            "player_id": entity.player_id,
            "entity": entity.label,
            "zero_norm_translation": zero_translation,
            "zero_norm_rotation": zero_rotation,
        },
        columns=ERROR_COLUMNS,
    )


def error_analysis(
    original: RecordingSession,
    reconstructed: RecordingSession,
    skip_n: Optional[int] = None,
) -> pd.DataFrame:
    """Per-frame errors of every head and hand, over interpolated frames only
    when the skip is known."""
    if abs(original.info.frame_rate - reconstructed.info.frame_rate) > 1e-9:
        raise GridMismatchError(
            f"Frame rates differ: {original.info.frame_rate:g} vs {reconstructed.info.frame_rate:g}"
        )
    if skip_n is None:
        skip_n = reconstructed.info.reconstructed_from
    pipeline = reconstructed.info.pipeline or "none"
    frames = []
    for entity in original.entities:
        if entity.is_object or entity not in original.transforms:
            continue
        if entity not in reconstructed.transforms:
            raise GridMismatchError(
                f"{entity.transform_file} is missing from the reconstruction"
            )
        frames.append(
            _entity_errors(
                entity,
                original.transforms[entity],
                reconstructed.transforms[entity],
                original.info.frame_rate,
                skip_n,
                pipeline,
            )
        )
    if not frames:
        return pd.DataFrame(columns=ERROR_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def summarize_errors(errors: pd.DataFrame, skip_n: Optional[int]) -> pd.DataFrame:
    """Mean relative errors per pipeline; zero-norm rows are left out."""
    rows = []
    for pipeline, group in errors.groupby("pipeline", sort=False):
        translation = group.loc[
            ~group["zero_norm_translation"].astype(bool), "rel_err_translation_pct"
        ]
        rotation = group.loc[
            ~group["zero_norm_rotation"].astype(bool), "rel_err_rotation_pct"
        ]
        kind = PIPELINE_BY_ID.get(pipeline)
        rows.append(
            {
                "skip_n": skip_n,
                "pipeline": pipeline,
                "label": kind.label if kind is not None else pipeline,
                "mean_rel_err_translation_pct": (
                    float(translation.mean()) if len(translation) else 0.0
                ),
                "mean_rel_err_rotation_pct": (
                    float(rotation.mean()) if len(rotation) else 0.0
                ),
                "frames": len(group),
            }
        )
    return pd.DataFrame(rows, columns=MEANS_COLUMNS)
