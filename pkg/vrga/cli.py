import filecmp
import logging
import sys
import tempfile
from pathlib import Path

import click

from .exceptions import VRGAError
from .experiment import ExperimentConfig, VRExperiment
from .recorder import check_interaction_pairing, rerecord
from .recording import RecordingSession
from .workflows.general import validate_outputs
from .workflows.interp import MotorBlend, PipelineKind

logger = logging.getLogger(__name__)

PIPELINE_CHOICE = click.Choice([kind.value for kind in PipelineKind])

CONFIG_OPTIONS = (
    click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help="YAML file with experiment settings.",
    ),
    click.option("--seed", type=int, help="Random seed."),
    click.option(
        "--out",
        "output_dir",
        type=click.Path(file_okay=False, path_type=Path),
        help="Output directory (default: $VRGA_OUTPUT_DIR or ./output).",
    ),
)


def config_options(function):
    """--config, --seed and --out, shared by every command writing outputs."""
    for option in reversed(CONFIG_OPTIONS):
        function = option(function)
    return function


def load_config(config_path=None, **overrides) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_yaml(config_path, **overrides)
    except (VRGAError, ValueError, TypeError) as error:
        raise click.UsageError(str(error))


def build(experiment: VRExperiment, *setups):
    try:
        for setup in setups:
            setup()
        experiment.write()
    except VRGAError as error:
        raise click.ClickException(str(error))
    click.echo(f"Wrote outputs to {experiment.root}")


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more detail.")
@click.version_option(package_name="vrga")
def main(verbose):
    """Geometric-algebra transform pipelines for VR sessions."""
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(verbose, 2)]
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s: %(message)s"
    )


@main.command()
@config_options
@click.option("--pipeline", "pipelines", multiple=True, type=PIPELINE_CHOICE)
@click.option("--jobs", type=int, help="Sweep cells run in parallel.")
@click.option("--duration", type=float, help="Trajectory length in seconds.")
@click.option("--n-users", type=int, help="Users sharing the channel.")
@click.option("--tier", "tiers", multiple=True, help="Only the named tiers.")
def simulate(config_path, seed, output_dir, pipelines, jobs, duration, n_users, tiers):
    """Bandwidth and reconstruction quality per network tier and pipeline."""
    config = load_config(
        config_path,
        seed=seed,
        output_dir=output_dir,
        pipelines=list(pipelines) or None,
        jobs=jobs,
        duration=duration,
        n_users=n_users,
    )
    if tiers:
        config.tiers = [tier for tier in config.tiers if tier[0] in tiers]
        if not config.tiers:
            raise click.UsageError(f"No configured tier is named {', '.join(tiers)}")
    experiment = VRExperiment(config)
    build(experiment, experiment.setup_simulation)
    savings = experiment.table["simulate/savings"]
    for row in savings.itertuples():
        click.echo(f"{row.tier}: {row.saving}")


@main.command("record-synthetic")
@config_options
@click.option("--duration", type=float, help="Seconds recorded per player.")
@click.option("--players", type=int, help="Number of players.")
@click.option(
    "--wait-time",
    "wait_times",
    multiple=True,
    help="PLAYER=SECONDS, the moment a player joins.",
)
def record_synthetic(config_path, seed, output_dir, duration, players, wait_times):
    """Record a scripted session into OUT/session."""
    parsed = None
    if wait_times:
        try:
            parsed = {
                int(player): float(seconds)
                for player, seconds in (item.split("=", 1) for item in wait_times)
            }
        except ValueError:
            raise click.UsageError("--wait-time takes PLAYER=SECONDS")
    config = load_config(
        config_path,
        seed=seed,
        output_dir=output_dir,
        duration=duration,
        players=players,
        wait_times=parsed,
    )
    experiment = VRExperiment(config)
    build(experiment, experiment.setup_synthetic_recording)


@main.command()
@click.argument(
    "session", type=click.Path(exists=True, file_okay=False, path_type=Path)
)
@config_options
@click.option(
    "--skip-n", "skip_n", multiple=True, type=int, help="Keep one of n frames."
)
def compress(session, config_path, seed, output_dir, skip_n):
    """Drop frames of SESSION, writing OUT/compressed_n<k>."""
    config = load_config(
        config_path, seed=seed, output_dir=output_dir, skip_n=list(skip_n) or None
    )
    experiment = VRExperiment(config)
    build(experiment, lambda: experiment.setup_compression(session))


@main.command()
@click.argument(
    "session", type=click.Path(exists=True, file_okay=False, path_type=Path)
)
@config_options
@click.option("--pipeline", "pipelines", multiple=True, type=PIPELINE_CHOICE)
@click.option("--blend", type=click.Choice([blend.value for blend in MotorBlend]))
def reconstruct(session, config_path, seed, output_dir, pipelines, blend):
    """Fill the dropped frames of a compressed SESSION."""
    config = load_config(
        config_path,
        seed=seed,
        output_dir=output_dir,
        pipelines=list(pipelines) or None,
        motor_blend=blend,
    )
    experiment = VRExperiment(config)
    build(experiment, lambda: experiment.setup_reconstruction(session))


@main.command()
@click.argument(
    "original", type=click.Path(exists=True, file_okay=False, path_type=Path)
)
@click.argument(
    "reconstructed",
    nargs=-1,
    type=click.Path(exists=True, file_okay=False, path_type=Path),
)
@config_options
@click.option("--pipeline", "pipelines", multiple=True, type=PIPELINE_CHOICE)
@click.option("--skip-n", "skip_n", multiple=True, type=int)
def analyze(original, reconstructed, config_path, seed, output_dir, pipelines, skip_n):
    """Relative errors of RECONSTRUCTED sessions against ORIGINAL.

    Without RECONSTRUCTED, ORIGINAL is compressed and reconstructed for every
    configured skip and pipeline first.
    """
    config = load_config(
        config_path,
        seed=seed,
        output_dir=output_dir,
        pipelines=list(pipelines) or None,
        skip_n=list(skip_n) or None,
    )
    experiment = VRExperiment(config)
    build(experiment, lambda: experiment.setup_error_analysis(original, reconstructed))
    if "analyze/means" in experiment.table:
        click.echo(experiment.table["analyze/means"].to_string(index=False))


def _compare_sessions(original: Path, rerecorded: Path, files) -> list[str]:
    return [
        relative_path
        for relative_path in files
        if not filecmp.cmp(
            original / relative_path, rerecorded / relative_path, shallow=False
        )
    ]


@main.command("replay-check")
@click.argument(
    "session", type=click.Path(exists=True, file_okay=False, path_type=Path)
)
def replay_check(session):
    """Replay SESSION into a fresh recording and compare the files."""
    try:
        recorded = RecordingSession.read(session)
    except VRGAError as error:
        raise click.ClickException(str(error))
    problems = check_interaction_pairing(recorded)
    with tempfile.TemporaryDirectory() as scratch:
        rerecorded_dir = Path(scratch) / "rerecorded"
        stats = rerecord(session, rerecorded_dir)
        rerecorded = RecordingSession.read(rerecorded_dir)
        missing = sorted(set(recorded.files()) ^ set(rerecorded.files()))
        problems += [
            f"{relative_path}: present in one recording only"
            for relative_path in missing
        ]
        shared = sorted(set(recorded.files()) & set(rerecorded.files()))
        problems += [
            f"{relative_path}: differs after replay"
            for relative_path in _compare_sessions(session, rerecorded_dir, shared)
        ]
    click.echo(
        f"Replayed {stats.frames} frames, {stats.transforms} transforms, "
        f"{stats.events} events"
    )
    for problem in problems:
        click.echo(problem, err=True)
    if problems:
        sys.exit(1)
    click.echo("Replay reproduces the recording")


@main.command()
@config_options
@click.option("--pipeline", "pipelines", multiple=True, type=PIPELINE_CHOICE)
@click.option("--frames", "bench_frames", type=int, help="Frames per batched run.")
def bench(config_path, seed, output_dir, pipelines, bench_frames):
    """Time per in-between frame of every pipeline."""
    config = load_config(
        config_path,
        seed=seed,
        output_dir=output_dir,
        pipelines=list(pipelines) or None,
        bench_frames=bench_frames,
    )
    experiment = VRExperiment(config)
    build(experiment, experiment.setup_benchmark)
    click.echo(experiment.table["bench/bench"].to_string(index=False))


@main.command("lerp-vs-slerp")
@config_options
@click.option("--inbetweens", type=int, help="Frames between the two poses.")
def lerp_vs_slerp(config_path, seed, output_dir, inbetweens):
    """Move a triangle with motor LERP and SLERP and emit both paths."""
    config = load_config(
        config_path, seed=seed, output_dir=output_dir, inbetweens=inbetweens
    )
    experiment = VRExperiment(config)
    build(experiment, experiment.setup_lerp_vs_slerp)
    calibration = experiment.dict["lerp_vs_slerp/calibration"]
    click.echo(
        f"Largest vertex gap: {calibration['demo_max_deviation']:.4g} m (demo), "
        f"{calibration['calibrated_max_deviation']:.4g} m (sampled)"
    )


@main.command()
@click.argument(
    "directory",
    required=False,
    type=click.Path(exists=True, file_okay=False, path_type=Path),
)
def validate(directory):
    """Check every CSV below DIRECTORY against its schema."""
    if directory is None:
        directory = ExperimentConfig().output_dir
    if not directory.exists():
        raise click.UsageError(f"{directory} does not exist")
    problems = validate_outputs(directory)
    for problem in problems:
        click.echo(problem, err=True)
    if problems:
        sys.exit(1)
    click.echo(f"All CSV files below {directory} follow their schema")


if __name__ == "__main__":
    main()
