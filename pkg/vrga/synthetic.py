"""A scripted VR scene standing in for live head and hand capture.

Every player's camera and hands follow seeded smooth motion. Objects rest on a
table until a scripted grab makes them follow a hand, or a held tool touches
them and pushes them along for a moment.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np
from tqdm import tqdm

from .recorder import (
    EntityFrame,
    ObjectFrame,
    RecordingWriter,
    SceneFrame,
    SessionRecorder,
)
from .recording import HAND_KINDS, TRACKED_KINDS, EntityKind, check_name
from .workflows.ga_core import Pose, euler_array_to_quat, quat_mul
from .workflows.trajectories import MotionModel, frame_count, synthetic_trajectory

logger = logging.getLogger(__name__)

EVENT_KINDS = ("grab", "tool_touch", "press_button", "scenegraph")

DEFAULT_INTERACTIONS = (
    {
        "kind": "grab",
        "player": 1,
        "hand": "Right Hand",
        "target": "scalpel",
        "time": 1.0,
        "end": 2.5,
    },
    {
        "kind": "tool_touch",
        "player": 1,
        "tool": "scalpel",
        "target": "tray",
        "time": 2.0,
    },
    {
        "kind": "press_button",
        "player": 1,
        "hand": "Left Hand",
        "target": "ResetButton",
        "time": 3.0,
    },
    {
        "kind": "scenegraph",
        "player": 1,
        "target": "Scene.OperatingRoom.Table",
        "time": 4.0,
    },
)

BASE_POSITIONS = {
    EntityKind.CAMERA: (0.0, 1.6, 0.0),
    EntityKind.LEFT_HAND: (-0.25, 1.2, 0.3),
    EntityKind.RIGHT_HAND: (0.25, 1.2, 0.3),
}
PLAYER_SPACING = 1.0  # m along x
TABLE_POSITION = (0.3, 1.0, 0.5)
OBJECT_SPACING = 0.3  # m along x

SLIDE_DURATION = 0.5  # s
SLIDE_VELOCITY = (0.2, 0.0, 0.05)  # m/s
SLIDE_YAW_RATE = 30.0  # deg/s


@dataclass(frozen=True)
class ScriptedEvent:
    kind: str
    player_id: int
    time: float
    target: str
    hand: EntityKind = EntityKind.RIGHT_HAND
    end: Optional[float] = None
    tool: Optional[str] = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(
                f"Unknown scripted event {self.kind!r}, expected one of {EVENT_KINDS}"
            )
        check_name(self.target)
        object.__setattr__(self, "hand", EntityKind(self.hand))
        if self.time < 0:
            raise ValueError(f"Scripted events start at t >= 0, got {self.time}")
        if self.kind in ("grab", "press_button") and self.hand not in HAND_KINDS:
            raise ValueError(f"A {self.kind} needs a hand, got {self.hand.value}")
        if self.kind == "grab" and self.end is not None and self.end < self.time:
            raise ValueError(f"Grab of {self.target!r} ends before it begins")
        if self.kind == "tool_touch" and not self.tool:
            raise ValueError("A tool touch names its tool")

    @classmethod
    def from_dict(cls, values: Mapping) -> "ScriptedEvent":
        values = dict(values)
        return cls(
            kind=values.pop("kind"),
            player_id=int(values.pop("player", 1)),
            time=float(values.pop("time")),
            target=values.pop("target"),
            hand=values.pop("hand", EntityKind.RIGHT_HAND),
            end=values.pop("end", None),
            tool=values.pop("tool", None),
        )


def _seed_for(seed: int, player_id: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, player_id, index]).generate_state(1)[0])


class _SceneObject:
    def __init__(self, name: str, pose: Pose, is_tool: bool):
        self.name = name
        self.pose = pose
        self.is_tool = is_tool
        self.held_by = None
        self.grip = None
        self.slide_start = None
        self.slide_origin = None


class SyntheticScene:
    def __init__(
        self,
        seed: int = 0,
        duration: float = 10.0,
        rate: float = 90.0,
        player_ids: Sequence[int] = (1,),
        wait_times: Optional[Mapping[int, float]] = None,
        interactions=DEFAULT_INTERACTIONS,
        motion: MotionModel = MotionModel(),
    ):
        if duration <= 0:
            raise ValueError(f"Duration must be positive, got {duration}")
        self.seed = seed
        self.duration = duration
        self.rate = rate
        self.player_ids = tuple(player_ids)
        # joining is snapped to the frame grid
        self.wait_frames = {
            player_id: int(round((wait_times or {}).get(player_id, 0.0) * rate))
            for player_id in self.player_ids
        }
        self.n_frames = frame_count(duration, rate)
        self.events = [
            (
                event
                if isinstance(event, ScriptedEvent)
                else ScriptedEvent.from_dict(event)
            )
            for event in interactions
        ]
        self.trajectories = {}
        for position, player_id in enumerate(self.player_ids):
            offset = np.array([PLAYER_SPACING * position, 0.0, 0.0])
            for index, kind in enumerate(TRACKED_KINDS):
                self.trajectories[(player_id, kind)] = synthetic_trajectory(
                    f"{kind.value} {player_id}",
                    _seed_for(seed, player_id, index),
                    duration,
                    rate,
                    motion,
                    base_position=np.asarray(BASE_POSITIONS[kind]) + offset,
                )
        self.objects = self._place_objects()

    @property
    def wait_times(self) -> dict[int, float]:
        return {
            player_id: frames / self.rate
            for player_id, frames in self.wait_frames.items()
        }

    def _place_objects(self) -> dict[str, _SceneObject]:
        tools = {event.tool for event in self.events if event.kind == "tool_touch"}
        names = []
        for event in self.events:
            for name in (event.tool, event.target):
                if (
                    name
                    and name not in names
                    and (event.kind in ("grab", "tool_touch"))
                ):
                    names.append(name)
        return {
            name: _SceneObject(
                name,
                Pose(
                    np.asarray(TABLE_POSITION) + [OBJECT_SPACING * index, 0.0, 0.0],
                    np.array([1.0, 0.0, 0.0, 0.0]),
                ),
                name in tools,
            )
            for index, name in enumerate(names)
        }

    def _scene_frame(self, event: ScriptedEvent, time: float) -> int:
        return self.wait_frames.get(event.player_id, 0) + int(round(time * self.rate))

    def _due(self, k: int, player_id: int, kind: EntityKind) -> dict:
        inputs = {}
        for event in self.events:
            if event.player_id != player_id:
                continue
            if event.kind == "grab" and event.hand is kind:
                if self._scene_frame(event, event.time) == k:
                    inputs["begin_interaction"] = event.target
                if event.end is not None and self._scene_frame(event, event.end) == k:
                    inputs["end_interaction"] = event.target
            elif event.kind == "press_button" and event.hand is kind:
                if self._scene_frame(event, event.time) == k:
                    inputs["press_button"] = event.target
            elif event.kind == "scenegraph" and kind is EntityKind.CAMERA:
                if self._scene_frame(event, event.time) == k:
                    inputs["scenegraph_traverse"] = event.target
        return inputs

    def _move_objects(self, k: int, hands: dict) -> dict[str, tuple[str, ...]]:
        touching = {}
        for event in self.events:
            if event.kind == "tool_touch" and self._scene_frame(event, event.time) == k:
                touching.setdefault(event.tool, ())
                touching[event.tool] += (event.target,)
                target = self.objects[event.target]
                if target.held_by is None and target.slide_start is None:
                    target.slide_start = k
                    target.slide_origin = target.pose
        for scene_object in self.objects.values():
            if scene_object.held_by is not None and scene_object.held_by in hands:
                hand = hands[scene_object.held_by]
                scene_object.pose = hand.compose(scene_object.grip)
            elif scene_object.slide_start is not None:
                elapsed = min(
                    (k - scene_object.slide_start) / self.rate, SLIDE_DURATION
                )
                origin = scene_object.slide_origin
                yaw = euler_array_to_quat([0.0, 0.0, SLIDE_YAW_RATE * elapsed])
                scene_object.pose = Pose(
                    origin.translation + np.asarray(SLIDE_VELOCITY) * elapsed,
                    quat_mul(yaw, origin.rotation),
                )
        return touching

    def _update_grips(self, k: int, hands: dict):
        for event in self.events:
            if event.kind != "grab":
                continue
            scene_object = self.objects[event.target]
            holder = (event.player_id, event.hand)
            if self._scene_frame(event, event.time) == k and holder in hands:
                scene_object.held_by = holder
                scene_object.slide_start = None
                scene_object.grip = hands[holder].inverse().compose(scene_object.pose)
            if (
                event.end is not None
                and self._scene_frame(event, event.end) == k
                and scene_object.held_by == holder
            ):
                scene_object.held_by = None

    def frames(self) -> Iterator[SceneFrame]:
        total = max(
            (
                self.wait_frames[player_id] + self.n_frames
                for player_id in self.player_ids
            ),
            default=0,
        )
        for k in range(total):
            players, hands = {}, {}
            for player_id in self.player_ids:
                j = k - self.wait_frames[player_id]
                if not 0 <= j < self.n_frames:
                    continue
                players[player_id] = {}
                for kind in TRACKED_KINDS:
                    pose = self.trajectories[(player_id, kind)].poses[j]
                    if kind in HAND_KINDS:
                        hands[(player_id, kind)] = pose
                    players[player_id][kind] = EntityFrame(
                        pose, **self._due(k, player_id, kind)
                    )
            touching = self._move_objects(k, hands)
            objects = {
                name: ObjectFrame(
                    scene_object.pose,
                    is_tool=scene_object.is_tool,
                    touching=touching.get(name, ()),
                )
                for name, scene_object in self.objects.items()
            }
            self._update_grips(k, hands)
            yield SceneFrame(k / self.rate, players, objects)

    def record(self, session_dir, logger=logger) -> Path:
        writer = RecordingWriter.open(
            session_dir,
            self.player_ids,
            frame_rate=self.rate,
            wait_times=self.wait_times,
            logger=logger,
        )
        recorder = SessionRecorder(writer, logger=logger)
        total = 0
        for frame in tqdm(self.frames(), desc="Recording", disable=None):
            recorder.update(frame)
            total += 1
        recorder.end_recording(
            duration=max(
                (
                    (self.wait_frames[player_id] + self.n_frames - 1) / self.rate
                    for player_id in self.player_ids
                ),
                default=0.0,
            )
        )
        logger.info(f"Recorded {total} frames of {len(self.player_ids)} player(s)")
        return Path(session_dir)


def record_synthetic(
    session_dir,
    seed: int = 0,
    duration: float = 10.0,
    rate: float = 90.0,
    players: int = 1,
    wait_times: Optional[Mapping[int, float]] = None,
    interactions=DEFAULT_INTERACTIONS,
    motion: MotionModel = MotionModel(),
    logger=logger,
) -> Path:
    """Record a seeded synthetic session with players numbered 1..players."""
    scene = SyntheticScene(
        seed,
        duration,
        rate,
        tuple(range(1, players + 1)),
        wait_times,
        [
            event
            for event in interactions
            if int(
                event.player_id
                if isinstance(event, ScriptedEvent)
                else event.get("player", 1)
            )
            <= players
        ],
        motion,
    )
    return scene.record(session_dir, logger=logger)
