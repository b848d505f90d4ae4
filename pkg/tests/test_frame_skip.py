import numpy as np
import pandas as pd
import pytest

from vrga.exceptions import GridMismatchError, MissingSkipError
from vrga.recording import (
    TRANSFORM_COLUMNS,
    EntityKind,
    RecordingSession,
    SessionInfo,
    TrackedEntity,
)
from vrga.synthetic import record_synthetic
from vrga.workflows.frame_skip import (
    ERROR_COLUMNS,
    MEANS_COLUMNS,
    compress_skip,
    error_analysis,
    frame_indices,
    kept_rows,
    reconstruct_recording,
    reconstruct_table,
    relative_error_pct,
    storage_report,
    summarize_errors,
)
from vrga.workflows.interp import PipelineKind
from vrga.workflows.trajectories import constant_velocity_trajectory

RATE = 90.0
CAMERA = TrackedEntity(1, EntityKind.CAMERA)
RIGHT_HAND = TrackedEntity(1, EntityKind.RIGHT_HAND)
TRACKED = [CAMERA, TrackedEntity(1, EntityKind.LEFT_HAND), RIGHT_HAND]


@pytest.fixture(scope="module")
def recorded(tmp_path_factory):
    session_dir = record_synthetic(
        tmp_path_factory.mktemp("frame_skip") / "session", seed=11, duration=5.0
    )
    return RecordingSession.read(session_dir)


def constant_velocity_session(n_frames=100):
    trajectory = constant_velocity_trajectory("hand", [0.003, -0.001, 0.002], n_frames)
    table = pd.DataFrame(
        np.column_stack(
            [
                trajectory.times,
                trajectory.poses.translation,
                np.broadcast_to([10.0, 20.0, 30.0], (n_frames, 3)),
            ]
        ),
        columns=TRANSFORM_COLUMNS,
    )
    return RecordingSession(SessionInfo(player_ids=(1,)), {RIGHT_HAND: table}, {})


def test_kept_rows():
    assert kept_rows(100, 2).sum() == 51
    assert kept_rows(99, 3).sum() == 34
    assert kept_rows(99, 3)[-1]
    assert kept_rows(0, 2).sum() == 0
    assert np.flatnonzero(kept_rows(7, 3)).tolist() == [0, 3, 6]
    assert np.flatnonzero(kept_rows(8, 3)).tolist() == [0, 3, 6, 7]


def test_compress_skip(recorded):
    compressed = compress_skip(recorded, 2)
    assert compressed.info.skip_n == 2
    assert recorded.info.skip_n is None
    for entity in TRACKED:
        assert len(recorded.transforms[entity]) == 451
        assert len(compressed.transforms[entity]) == 226
        assert compressed.transforms[entity]["t"].iloc[-1] == pytest.approx(5.0)
    assert compressed.messages == recorded.messages
    for entity, table in recorded.transforms.items():
        if entity.is_object:
            assert compressed.transforms[entity] is table

    report = storage_report(recorded, compressed)
    assert report["bytes_after"] < report["bytes_before"]
    assert 0.4 < report["ratio"] < 0.7


def test_compress_skip_refusals(recorded):
    with pytest.raises(ValueError):
        compress_skip(recorded, 1)
    with pytest.raises(ValueError):
        compress_skip(compress_skip(recorded, 2), 3)


def test_reconstruction_needs_a_skip(recorded):
    with pytest.raises(MissingSkipError):
        reconstruct_recording(recorded, "cga")


@pytest.mark.parametrize("kind", list(PipelineKind))
def test_reconstruction_restores_the_frame_grid(recorded, kind):
    compressed = compress_skip(recorded, 3)
    reconstructed = reconstruct_recording(compressed, kind)
    assert reconstructed.info.skip_n is None
    assert reconstructed.info.reconstructed_from == 3
    assert reconstructed.info.pipeline == PipelineKind(kind).value
    for entity in TRACKED:
        original = recorded.transforms[entity]
        rebuilt = reconstructed.transforms[entity]
        assert len(rebuilt) == len(original)
        assert np.allclose(rebuilt["t"], original["t"])
        kept = kept_rows(len(original), 3)
        assert np.array_equal(
            rebuilt[TRANSFORM_COLUMNS].to_numpy()[kept],
            original[TRANSFORM_COLUMNS].to_numpy()[kept],
        )


@pytest.mark.parametrize("kind", list(PipelineKind))
def test_constant_velocity_has_no_error(kind):
    session = constant_velocity_session()
    reconstructed = reconstruct_recording(compress_skip(session, 3), kind)
    errors = error_analysis(session, reconstructed)
    assert list(errors.columns) == ERROR_COLUMNS
    assert len(errors) == 100 - 34
    assert errors["rel_err_translation_pct"].max() < 1e-6
    assert errors["rel_err_rotation_pct"].max() < 1e-6
    assert set(errors["pipeline"]) == {PipelineKind(kind).value}


def test_errors_grow_with_the_skip(recorded):
    means = {}
    for n in (2, 3):
        compressed = compress_skip(recorded, n)
        errors = pd.concat(
            [
                error_analysis(recorded, reconstruct_recording(compressed, kind))
                for kind in PipelineKind
            ],
            ignore_index=True,
        )
        means[n] = summarize_errors(errors, n).set_index("pipeline")
        assert list(summarize_errors(errors, n).columns) == MEANS_COLUMNS
    for kind in PipelineKind:
        assert means[2].loc[kind.value, "mean_rel_err_translation_pct"] < 0.4
        assert means[2].loc[kind.value, "mean_rel_err_rotation_pct"] < 0.4
        assert (
            means[3].loc[kind.value, "mean_rel_err_translation_pct"]
            >= means[2].loc[kind.value, "mean_rel_err_translation_pct"]
        )
    assert means[2].loc["soa", "skip_n"] == 2
    assert means[2].loc["soa", "label"] == "Linear Algebra"
    assert means[2].loc["cga", "label"] == "3D CGA"
    # three tracked entities, 225 interpolated frames each
    assert means[2].loc["soa", "frames"] == 3 * 225


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_minute_long_sessions_stay_accurate(tmp_path, seed):
    session_dir = record_synthetic(
        tmp_path / "session", seed=seed, duration=60.0, players=2, wait_times={2: 1.0}
    )
    session = RecordingSession.read(session_dir)
    means = {}
    for n in (2, 3):
        compressed = compress_skip(session, n)
        errors = pd.concat(
            [
                error_analysis(session, reconstruct_recording(compressed, kind), n)
                for kind in PipelineKind
            ],
            ignore_index=True,
        )
        means[n] = summarize_errors(errors, n).set_index("pipeline")

    for metric in ("mean_rel_err_translation_pct", "mean_rel_err_rotation_pct"):
        assert (means[2][metric] < 0.4).all()
        assert (means[3][metric] < 0.6).all()
        assert (means[3][metric] >= means[2][metric]).all()
        for n in (2, 3):
            assert means[n][metric].max() <= 4 * means[n][metric].min()


def test_motor_lerp_agrees_across_algebras(recorded):
    compressed = compress_skip(recorded, 2)
    pga = error_analysis(recorded, reconstruct_recording(compressed, "pga"))
    cga = error_analysis(recorded, reconstruct_recording(compressed, "cga"))
    assert np.allclose(
        pga["rel_err_translation_pct"], cga["rel_err_translation_pct"], atol=1e-9
    )


def test_identical_sessions_have_no_error(recorded):
    errors = error_analysis(recorded, recorded)
    assert len(errors) == 3 * 451
    assert (errors["rel_err_translation_pct"] == 0).all()
    assert (errors["rel_err_rotation_pct"] == 0).all()
    assert set(errors["pipeline"]) == {"none"}


def test_zero_norm_rows_are_flagged():
    original = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    reconstructed = np.array([[0.1, 0.0, 0.0], [1.01, 0.0, 0.0]])
    values, zero_norm = relative_error_pct(original, reconstructed)
    assert values == pytest.approx([0.1, 1.0])
    assert zero_norm.tolist() == [True, False]

    errors = pd.DataFrame(
        {
            "rel_err_translation_pct": values,
            "rel_err_rotation_pct": [0.0, 0.0],
            "pipeline": "dq",
            "zero_norm_translation": zero_norm,
            "zero_norm_rotation": [False, False],
        }
    )
    means = summarize_errors(errors, 2)
    assert means.loc[0, "mean_rel_err_translation_pct"] == pytest.approx(1.0)
    assert means.loc[0, "frames"] == 2


def test_rotation_errors_wrap_around():
    values, _ = relative_error_pct(
        np.array([[0.0, 0.0, 179.0]]), np.array([[0.0, 0.0, -179.0]]), wrap=True
    )
    assert values == pytest.approx([100.0 * 2.0 / 179.0])


def test_off_grid_times_are_refused():
    assert frame_indices(np.array([0.0, 1 / 90, 3 / 90]), RATE).tolist() == [0, 1, 3]
    with pytest.raises(GridMismatchError):
        frame_indices(np.array([0.0, 0.0051]), RATE)
    with pytest.raises(GridMismatchError):
        frame_indices(np.array([1 / 90, 0.0]), RATE)


def test_mismatched_sessions_are_refused(recorded):
    shorter = RecordingSession(
        recorded.info,
        {entity: table.iloc[:-1] for entity, table in recorded.transforms.items()},
        recorded.messages,
    )
    with pytest.raises(GridMismatchError):
        error_analysis(recorded, shorter)


def test_short_tables_pass_through():
    table = pd.DataFrame(
        [[0.0, 1, 2, 3, 0, 0, 0]], columns=TRANSFORM_COLUMNS, dtype=float
    )
    assert reconstruct_table(table, RATE, "dq").equals(table)
