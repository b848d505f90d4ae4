"""Geometric-algebra transform pipelines and session recording for VR."""

__version__ = "0.1.0"

from .experiment import ExperimentConfig, VRExperiment
from .recorder import Replay, RecordingWriter, SessionRecorder
from .recording import RecordingSession
from .workflows.interp import PipelineKind

__all__ = [
    "ExperimentConfig",
    "VRExperiment",
    "Replay",
    "RecordingWriter",
    "SessionRecorder",
    "RecordingSession",
    "PipelineKind",
]
