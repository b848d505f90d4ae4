import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd
import yaml

from .exceptions import SessionExistsError
from .recording import INFO_FILE, RecordingSession
from .synthetic import DEFAULT_INTERACTIONS, record_synthetic
from .workflows.frame_skip import (
    compress_skip,
    error_analysis,
    reconstruct_recording,
    storage_report,
    summarize_errors,
)
from .workflows.ga_core import Pose, euler_array_to_quat
from .workflows.general import write_csv, write_gnuplot_data, write_gnuplot_script
from .workflows.interp import (
    LERP_SLERP_BOUND,
    MotorBlend,
    PipelineKind,
    benchmark_pipelines,
    calibrate_lerp_slerp_bound,
    compare_lerp_slerp,
    lerp_slerp_table,
)
from .workflows.netsim import DEFAULT_TIERS, savings_report, simulate_sweep
from .workflows.trajectories import synthetic_trajectory

logger = logging.getLogger(__name__)

OUTPUT_DIR_VARIABLE = "VRGA_OUTPUT_DIR"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_VARIABLE, "output"))


class PathEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, Path):
            return str(obj)
        if isinstance(obj, np.generic):
            return obj.item()
        return super().default(obj)


@dataclass
class ExperimentConfig:
    seed: int = 0
    base_rate: float = 90.0
    duration: float = 60.0
    tiers: list = field(default_factory=lambda: [tuple(tier) for tier in DEFAULT_TIERS])
    pipelines: list = field(
        default_factory=lambda: [kind.value for kind in PipelineKind]
    )
    skip_n: list = field(default_factory=lambda: [2, 3])
    output_dir: Path = field(default_factory=default_output_dir)
    n_users: int = 1
    players: int = 1
    wait_times: dict = field(default_factory=dict)
    inbetweens: int = 20
    motor_blend: str = MotorBlend.LERP.value
    jobs: int = 1
    interactions: list = field(
        default_factory=lambda: [dict(event) for event in DEFAULT_INTERACTIONS]
    )
    bench_frames: int = 2000

    def __post_init__(self):
        self.tiers = [
            (str(label), int(soa), int(ours)) for label, soa, ours in self.tiers
        ]
        self.pipelines = [PipelineKind(kind).value for kind in self.pipelines]
        self.skip_n = [int(n) for n in np.atleast_1d(self.skip_n)]
        self.output_dir = Path(self.output_dir)
        self.wait_times = {int(k): float(v) for k, v in self.wait_times.items()}
        self.motor_blend = MotorBlend(self.motor_blend).value

    @classmethod
    def from_yaml(cls, path: Optional[Union[str, Path]] = None, **overrides):
        """Defaults, then the YAML file, then every override that is not None."""
        values = {}
        if path is not None:
            with open(path, "r") as f:
                values = yaml.safe_load(f) or {}
            if not isinstance(values, dict):
                raise ValueError(f"{path} must hold a mapping of settings")
        values.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"Unknown configuration keys: {', '.join(unknown)}")
        config = cls(**values)
        config.validate()
        return config

    def validate(self):
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if not self.base_rate > 0:
            raise ValueError(f"base_rate must be positive, got {self.base_rate}")
        for label, soa_rate, ours_rate in self.tiers:
            if soa_rate < 1 or ours_rate < 1:
                raise ValueError(f"Tier {label!r} needs positive update rates")
            if max(soa_rate, ours_rate) > self.base_rate:
                raise ValueError(f"Tier {label!r} sends faster than base_rate")
        if any(n < 2 for n in self.skip_n):
            raise ValueError(f"skip_n values must be at least 2, got {self.skip_n}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be at least 1, got {self.jobs}")
        if self.n_users < 0:
            raise ValueError(f"n_users must be non-negative, got {self.n_users}")
        if self.players < 0:
            raise ValueError(f"players must be non-negative, got {self.players}")
        if any(wait_time < 0 for wait_time in self.wait_times.values()):
            raise ValueError("wait_times must be non-negative")
        if self.inbetweens < 0:
            raise ValueError(f"inbetweens must be non-negative, got {self.inbetweens}")

    def as_dict(self) -> dict:
        return asdict(self)


class VRExperiment:
    """Collects tables, plots and sessions of one run and writes them below root."""

    def __init__(self, config: ExperimentConfig = None, root=None, logger=logger):
        self.config = config or ExperimentConfig()
        self.root = Path(root if root is not None else self.config.output_dir)
        self.logger = logger

        self.table = {}
        self.dict = {}
        self.plot = {}
        self.session = {}

        self.files = {"table": {}, "dict": {}, "plot": {}, "session": {}}
        self.is_updated = {"table": {}, "dict": {}, "plot": {}, "session": {}}

    @property
    def pipelines(self) -> list[PipelineKind]:
        return [PipelineKind(kind) for kind in self.config.pipelines]

    def set_table(self, table, name, update=True):
        self.is_updated["table"][name] = {"updated": update}
        self.table[name] = table

    def set_dict(self, data, name, update=True):
        self.is_updated["dict"][name] = {"updated": update}
        self.dict[name] = data

    def set_plot(self, blocks, scripts, name, update=True):
        """scripts maps a script name to write_gnuplot_script keyword arguments."""
        self.is_updated["plot"][name] = {"updated": update}
        self.plot[name] = (blocks, scripts)

    def set_session(self, session, name, update=True):
        self.is_updated["session"][name] = {"updated": update}
        self.session[name] = session

    def setup_simulation(self) -> None:
        config = self.config
        trajectory = synthetic_trajectory(
            "Right Hand", config.seed, config.duration, config.base_rate
        )
        self.logger.info(
            f"Simulating {len(config.tiers)} tiers x {len(self.pipelines)} pipelines "
            f"over {len(trajectory)} frames"
        )
        qoe = simulate_sweep(
            trajectory,
            config.tiers,
            self.pipelines,
            n_users=config.n_users,
            blend=config.motor_blend,
            jobs=config.jobs,
        )
        self.set_table(qoe, "simulate/qoe")
        savings = savings_report(config.tiers, config.n_users)
        self.set_table(savings, "simulate/savings")

    def setup_synthetic_recording(self, name: str = "session") -> Path:
        config = self.config
        session_dir = self.root / name
        record_synthetic(
            session_dir,
            seed=config.seed,
            duration=config.duration,
            rate=config.base_rate,
            players=config.players,
            wait_times=config.wait_times,
            interactions=config.interactions,
            logger=self.logger,
        )
        self.files["session"][name] = name
        return session_dir

    def setup_compression(self, session_dir) -> None:
        original = RecordingSession.read(session_dir, logger=self.logger)
        for n in self.config.skip_n:
            compressed = compress_skip(original, n)
            report = storage_report(original, compressed)
            self.logger.info(
                f"n={n}: {report['bytes_before']} -> {report['bytes_after']} "
                f"transform bytes (ratio {report['ratio']:.3f})"
            )
            self.set_session(compressed, f"compressed_n{n}")
            self.set_dict({"skip_n": n, **report}, f"compress/storage_n{n}")

    def setup_reconstruction(self, session_dir) -> None:
        compressed = RecordingSession.read(session_dir, logger=self.logger)
        for kind in self.pipelines:
            reconstructed = reconstruct_recording(
                compressed, kind, self.config.motor_blend
            )
            self.set_session(
                reconstructed,
                f"reconstructed_n{compressed.info.skip_n}_{kind.value}",
            )

    def _reconstructions(self, original: RecordingSession, reconstructed_dirs):
        if reconstructed_dirs:
            for session_dir in reconstructed_dirs:
                yield RecordingSession.read(session_dir, logger=self.logger)
            return
        for n in self.config.skip_n:
            compressed = compress_skip(original, n)
            for kind in self.pipelines:
                yield reconstruct_recording(compressed, kind, self.config.motor_blend)

    def setup_error_analysis(
        self, original_dir, reconstructed_dirs: Iterable = ()
    ) -> None:
        """Errors of given reconstructions, or of compress and reconstruct runs
        for every configured skip and pipeline when none are given."""
        original = RecordingSession.read(original_dir, logger=self.logger)
        by_skip = {}
        for reconstructed in self._reconstructions(original, list(reconstructed_dirs)):
            n = reconstructed.info.reconstructed_from
            by_skip.setdefault(n or 1, []).append(
                error_analysis(original, reconstructed, n)
            )
        means = []
        for n, frames in sorted(by_skip.items()):
            errors = pd.concat(frames, ignore_index=True)
            self.set_table(errors, f"analyze/errors_n{n}")
            summary = summarize_errors(errors, n)
            means.append(summary)
            for row in summary.itertuples():
                self.logger.info(
                    f"n={n} {row.label}: "
                    f"{row.mean_rel_err_translation_pct:.4g}% translation, "
                    f"{row.mean_rel_err_rotation_pct:.4g}% rotation"
                )
            self._set_error_plot(errors, n)
        if means:
            self.set_table(pd.concat(means, ignore_index=True), "analyze/means")

    def _set_error_plot(self, errors: pd.DataFrame, n: int) -> None:
        if errors.empty:
            return
        first = errors.sort_values(["player_id", "entity"], kind="stable").iloc[0]
        shown = errors[
            (errors["player_id"] == first["player_id"])
            & (errors["entity"] == first["entity"])
        ]
        blocks = {
            pipeline: group[["t", "rel_err_translation_pct", "rel_err_rotation_pct"]]
            for pipeline, group in shown.groupby("pipeline", sort=False)
        }
        data_file = f"errors_n{n}.dat"
        scripts = {
            f"errors_n{n}_{metric}": dict(
                data_file=data_file,
                series=[
                    (index, using, pipeline)
                    for index, pipeline in enumerate(blocks)
                ],
                title=f"Relative {metric} error, {first['entity']}, n={n}",
                xlabel="t (s)",
                ylabel="relative error (%)",
            )
            for metric, using in (("translation", "1:2"), ("rotation", "1:3"))
        }
        self.set_plot(blocks, scripts, f"analyze/errors_n{n}")

    def setup_lerp_vs_slerp(self) -> None:
        start = Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))
        end = Pose(np.array([2.0, 1.0, 0.0]), euler_array_to_quat([0.0, 0.0, 150.0]))
        comparison = compare_lerp_slerp(start, end, n=self.config.inbetweens)
        table = lerp_slerp_table(comparison)
        self.set_table(table, "lerp_vs_slerp/lerp_vs_slerp")
        calibrated = calibrate_lerp_slerp_bound(seed=self.config.seed)
        self.logger.info(
            f"Largest LERP/SLERP vertex gap over sampled pairs: {calibrated:.3g} m "
            f"(bound {LERP_SLERP_BOUND:g} m)"
        )
        self.set_dict(
            {
                "demo_max_deviation": comparison.max_deviation,
                "calibrated_max_deviation": calibrated,
                "bound": LERP_SLERP_BOUND,
            },
            "lerp_vs_slerp/calibration",
        )
        blocks = {}
        for vertex, group in table.groupby("vertex"):
            blocks[f"vertex {vertex} lerp"] = group[["lerp_x", "lerp_y", "lerp_z"]]
            blocks[f"vertex {vertex} slerp"] = group[["slerp_x", "slerp_y", "slerp_z"]]
        scripts = {
            "lerp_vs_slerp": dict(
                data_file="lerp_vs_slerp.dat",
                series=[(index, "1:2", name) for index, name in enumerate(blocks)],
                title="Triangle vertices, motor LERP vs SLERP",
                xlabel="x (m)",
                ylabel="y (m)",
            )
        }
        self.set_plot(blocks, scripts, "lerp_vs_slerp/lerp_vs_slerp")

    def setup_benchmark(self) -> None:
        bench = benchmark_pipelines(
            self.config.bench_frames,
            self.config.seed,
            self.pipelines,
            self.config.motor_blend,
        )
        self.set_table(bench, "bench/bench")

    def write_table(self):
        if len(self.table) == 0:
            self.logger.debug("No table data found, skip writing.")
        for name, data in self.table.items():
            if self.is_updated["table"][name]["updated"]:
                fn = name + ".csv"
                self.files["table"][name] = fn
                write_csv(data, Path(self.root, fn))

    def write_dict(self):
        for name, data in self.dict.items():
            if self.is_updated["dict"][name]["updated"]:
                fn = name + ".json"
                self.files["dict"][name] = fn
                fp = Path(self.root, fn)
                fp.parent.mkdir(parents=True, exist_ok=True)
                self.logger.debug(f"Writing file {fp}")
                with open(fp, "w") as f:
                    json.dump(data, f, indent=4, cls=PathEncoder)

    def write_plot(self):
        for name, (blocks, scripts) in self.plot.items():
            if self.is_updated["plot"][name]["updated"]:
                fp = Path(self.root, name + ".dat")
                write_gnuplot_data(blocks, fp)
                written = [name + ".dat"]
                for script_name, kwargs in scripts.items():
                    write_gnuplot_script(fp.with_name(script_name + ".gp"), **kwargs)
                    written.append(str(Path(name).parent / (script_name + ".gp")))
                self.files["plot"][name] = written

    def write_session(self):
        for name, session in self.session.items():
            if self.is_updated["session"][name]["updated"]:
                session_dir = Path(self.root, name)
                if (session_dir / INFO_FILE).exists():
                    raise SessionExistsError(
                        f"A session already exists in {session_dir}"
                    )
                session.write(session_dir, logger=self.logger)
                self.files["session"][name] = name

    def write_files(self):
        self.root.mkdir(parents=True, exist_ok=True)
        with open(Path(self.root, "files.json"), "w") as f:
            json.dump(self.files, f, indent=4, cls=PathEncoder)

    def write(self):
        self.write_session()
        self.write_table()
        self.write_dict()
        self.write_plot()
        self.write_files()

    def read_files(self):
        files_is_empty = all(len(v) == 0 for v in self.files.values())
        if files_is_empty:
            with open(Path(self.root, "files.json"), "r") as f:
                self.files = json.load(f)

    def read_table(self):
        self.read_files()
        for name, fn in self.files["table"].items():
            table = pd.read_csv(Path(self.root, fn))
            self.set_table(table, name=name, update=False)
