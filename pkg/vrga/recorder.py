"""Recording and replay of multi-player VR sessions.

RecordingWriter owns every file of a session. SessionRecorder drives one
InteractionRecorder per head and hand of each player and a PropagateRecording
for every object a player sets in motion. Replay plays a session directory
back frame by frame into a sink.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, NamedTuple, Optional, Protocol, TextIO, Union

import numpy as np

from .exceptions import (
    InteractionError,
    RecordingClosedError,
    SessionExistsError,
    UnknownPlayerError,
)
from .recording import (
    HAND_KINDS,
    INFO_FILE,
    TRACKED_KINDS,
    EntityKind,
    EventType,
    MessageRecord,
    RecordingSession,
    SessionInfo,
    TrackedEntity,
    TransformRecord,
    table_records,
)
from .workflows.ga_core import Pose, rotation_angle_between

logger = logging.getLogger(__name__)

POSITION_THRESHOLD = 1e-5  # m per frame
ROTATION_THRESHOLD_DEG = 0.01  # per frame

Content = Union[TransformRecord, MessageRecord]
Emitted = tuple[TrackedEntity, Content]


class RecordingWriter:
    def __init__(
        self,
        session_dir,
        player_ids,
        frame_rate: float = 90.0,
        wait_times: Optional[Mapping[int, float]] = None,
        owner: Optional[int] = None,
        logger=logger,
    ):
        self.session_dir = Path(session_dir)
        self.info = SessionInfo(
            player_ids=tuple(player_ids),
            frame_rate=frame_rate,
            owner=owner,
            wait_times=dict(wait_times or {}),
        )
        self.logger = logger
        self.closed = True
        self._handles: dict[str, TextIO] = {}
        self._files: list[str] = []
        self._end_time = 0.0

    @classmethod
    def open(cls, session_dir, player_ids, **kwargs) -> "RecordingWriter":
        writer = cls(session_dir, player_ids, **kwargs)
        writer.start()
        return writer

    def start(self):
        if (self.session_dir / INFO_FILE).exists():
            raise SessionExistsError(f"A session already exists in {self.session_dir}")
        self.session_dir.mkdir(parents=True, exist_ok=True)
        for player_id in self.info.player_ids:
            for kind in TRACKED_KINDS:
                entity = TrackedEntity(player_id, kind)
                self._open(entity.transform_file)
                self._open(entity.messages_file)
        self.closed = False
        self._write_info()
        self.logger.info(
            f"Recording {len(self.info.player_ids)} player(s) to {self.session_dir}"
        )

    def _open(self, relative_path: str):
        fp = self.session_dir / relative_path
        fp.parent.mkdir(parents=True, exist_ok=True)
        self.logger.debug(f"Creating file {fp}")
        self._handles[relative_path] = open(fp, "w", encoding="utf-8", newline="\n")
        self._files.append(relative_path)

    def _write_info(self):
        self.info.files = tuple(self._files)
        (self.session_dir / INFO_FILE).write_text(
            self.info.to_text(), encoding="utf-8", newline="\n"
        )

    def write(self, entity: TrackedEntity, content: Content):
        if self.closed:
            raise RecordingClosedError(f"Recording in {self.session_dir} is closed")
        if entity.player_id not in self.info.player_ids:
            raise UnknownPlayerError(
                f"Player {entity.player_id} is not part of the session in {self.session_dir}"
            )
        if isinstance(content, TransformRecord):
            relative_path = entity.transform_file
        elif isinstance(content, MessageRecord):
            relative_path = entity.messages_file
            if relative_path is None:
                raise ValueError(f"{entity.label} has no messages file")
        else:
            raise TypeError(f"Cannot record {type(content).__name__}")
        if relative_path not in self._handles:
            assert entity.is_object, f"{relative_path} was not created at start"
            self._open(relative_path)
        self._handles[relative_path].write(content.to_line() + "\n")
        self._end_time = max(
            self._end_time, self.info.wait_time(entity.player_id) + content.time
        )

    def close(self, duration: Optional[float] = None):
        if self.closed:
            return
        for handle in self._handles.values():
            handle.close()
        self.info.duration = self._end_time if duration is None else duration
        self._write_info()
        self.closed = True
        self.logger.info(
            f"Closed recording in {self.session_dir} ({len(self._files)} files)"
        )

    def __enter__(self) -> "RecordingWriter":
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass(frozen=True, eq=False)
class EntityFrame:
    """Input of one head or hand for one frame."""

    pose: Pose
    begin_interaction: Optional[str] = None
    end_interaction: Optional[str] = None
    press_button: Optional[str] = None
    scenegraph_traverse: Optional[str] = None


@dataclass(frozen=True, eq=False)
class ObjectFrame:
    pose: Pose
    is_tool: bool = False
    touching: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class SceneFrame:
    """Everything tracked at one tick of the session clock."""

    time: float
    players: Mapping[int, Mapping[EntityKind, EntityFrame]]
    objects: Mapping[str, ObjectFrame] = field(default_factory=dict)


class InteractionRecorder:
    """Records a head or hand every frame, plus its events."""

    def __init__(
        self,
        writer: RecordingWriter,
        entity: TrackedEntity,
        session: Optional["SessionRecorder"] = None,
    ):
        if entity.is_object:
            raise ValueError("Objects are recorded through propagation")
        self.writer = writer
        self.entity = entity
        self.session = session
        self.active: dict[str, float] = {}

    def _emit(self, content: Content) -> Emitted:
        self.writer.write(self.entity, content)
        return self.entity, content

    def step(
        self,
        time: float,
        frame: EntityFrame,
        objects: Mapping[str, ObjectFrame] = {},
    ) -> list[Emitted]:
        emitted = [self._emit(TransformRecord.from_pose(time, frame.pose))]
        is_hand = self.entity.kind in HAND_KINDS
        if not is_hand and (
            frame.begin_interaction or frame.end_interaction or frame.press_button
        ):
            raise ValueError(
                f"Only hands interact, got an interaction on {self.entity.label}"
            )
        if is_hand and frame.scenegraph_traverse:
            raise ValueError("Scenegraph traversal is recorded on the camera")
        if frame.end_interaction:
            emitted.append(self.on_end_interaction(time, frame.end_interaction))
        if frame.begin_interaction:
            emitted.append(self.on_begin_interaction(time, frame.begin_interaction))
        if frame.press_button:
            emitted.append(
                self._emit(
                    MessageRecord(time, EventType.PRESS_BUTTON, frame.press_button)
                )
            )
        if frame.scenegraph_traverse:
            emitted.append(
                self._emit(
                    MessageRecord(
                        time, EventType.SCENEGRAPH_TRAVERSE, frame.scenegraph_traverse
                    )
                )
            )
        return emitted

    def on_begin_interaction(self, time: float, name: str) -> Emitted:
        if name in self.active:
            raise InteractionError(
                f"{self.entity.label} of player {self.entity.player_id} already interacts with {name!r}"
            )
        self.active[name] = time
        emitted = self._emit(MessageRecord(time, EventType.START_INTERACTION, name))
        if self.session is not None:
            self.session.attach_propagation(name, self.entity.player_id, held=True)
        return emitted

    def on_end_interaction(self, time: float, name: str) -> Emitted:
        if name not in self.active:
            raise InteractionError(
                f"{self.entity.label} of player {self.entity.player_id} ends an interaction "
                f"with {name!r} that never started"
            )
        started = self.active.pop(name)
        emitted = self._emit(
            MessageRecord(
                time, EventType.END_INTERACTION, name, duration=time - started
            )
        )
        if self.session is not None:
            self.session.detach_propagation(name)
        return emitted


class PropagationResult(NamedTuple):
    records: list[Emitted]
    detached: bool


class PropagateRecording:
    """Records an object for as long as it moves."""

    def __init__(
        self,
        writer: RecordingWriter,
        entity: TrackedEntity,
        pose: Pose,
        held: bool = False,
        session: Optional["SessionRecorder"] = None,
    ):
        assert entity.is_object, "Propagation follows objects only"
        self.writer = writer
        self.entity = entity
        self.last_pose = pose
        self.held = held
        self.session = session

    def is_moving(self, pose: Pose) -> bool:
        shift = float(np.linalg.norm(pose.translation - self.last_pose.translation))
        turn = rotation_angle_between(self.last_pose.rotation, pose.rotation)
        return shift > POSITION_THRESHOLD or np.degrees(turn) > ROTATION_THRESHOLD_DEG

    def step(self, time: float, frame: ObjectFrame) -> PropagationResult:
        if frame.is_tool and self.session is not None:
            for name in frame.touching:
                self.session.on_tool_begin_interaction(name, self.entity.player_id)
        if not self.is_moving(frame.pose):
            # a held object may rest in the hand
            return PropagationResult([], not self.held)
        self.last_pose = frame.pose
        record = TransformRecord.from_pose(time, frame.pose)
        self.writer.write(self.entity, record)
        return PropagationResult([(self.entity, record)], False)


class SessionRecorder:
    def __init__(self, writer: RecordingWriter, logger=logger):
        self.writer = writer
        self.logger = logger
        self.interaction_recorders = {
            (player_id, kind): InteractionRecorder(
                writer, TrackedEntity(player_id, kind), self
            )
            for player_id in writer.info.player_ids
            for kind in TRACKED_KINDS
        }
        self.propagations: dict[str, PropagateRecording] = {}
        self._objects: Mapping[str, ObjectFrame] = {}
        self._local_times: dict[int, float] = {}

    def local_time(self, player_id: int, time: float) -> float:
        return time - self.writer.info.wait_time(player_id)

    def update(self, frame: SceneFrame) -> list[Emitted]:
        self._objects = frame.objects
        emitted = []
        for player_id in self.writer.info.player_ids:
            local = self.local_time(player_id, frame.time)
            if local < -1e-9 or player_id not in frame.players:
                continue
            local = max(local, 0.0)
            self._local_times[player_id] = local
            inputs = frame.players[player_id]
            for kind in TRACKED_KINDS:
                if kind in inputs:
                    emitted.extend(
                        self.interaction_recorders[(player_id, kind)].step(
                            local, inputs[kind], frame.objects
                        )
                    )
        for name, propagation in list(self.propagations.items()):
            if (
                name not in frame.objects
                or self.propagations.get(name) is not propagation
            ):
                continue
            player_id = propagation.entity.player_id
            local = self._local_times.get(
                player_id, self.local_time(player_id, frame.time)
            )
            result = propagation.step(local, frame.objects[name])
            emitted.extend(result.records)
            if result.detached:
                self.logger.debug(f"{name} came to rest, detaching")
                del self.propagations[name]
        return emitted

    def attach_propagation(self, name: str, player_id: int, held: bool = False):
        if name in self.propagations:
            self.propagations[name].held |= held
            return
        if name not in self._objects:
            raise ValueError(f"Unknown object {name!r}")
        self.propagations[name] = PropagateRecording(
            self.writer,
            TrackedEntity(player_id, EntityKind.OBJECT, name),
            self._objects[name].pose,
            held=held,
            session=self,
        )

    def detach_propagation(self, name: str):
        self.propagations.pop(name, None)

    def on_tool_begin_interaction(self, name: str, player_id: int):
        if name not in self.propagations and name in self._objects:
            self.attach_propagation(name, player_id)

    def end_recording(self, duration: Optional[float] = None):
        self.writer.close(duration)


class ReplaySink(Protocol):
    def apply_transform(
        self, player_id: int, entity: TrackedEntity, record: TransformRecord
    ) -> None: ...

    def execute_event(
        self,
        player_id: int,
        entity: TrackedEntity,
        message: MessageRecord,
        record: Optional[TransformRecord],
    ) -> None: ...


EventAction = Callable[
    [int, TrackedEntity, MessageRecord, Optional[TransformRecord]], None
]


@dataclass
class ReplayStats:
    frames: int = 0
    transforms: int = 0
    events: int = 0
    skipped_lines: int = 0
    unknown_events: int = 0


@dataclass
class _Stream:
    entity: TrackedEntity
    transforms: list[TransformRecord]
    messages: list[MessageRecord]
    transform_position: int = 0
    message_position: int = 0

    @property
    def exhausted(self) -> bool:
        return self.transform_position >= len(
            self.transforms
        ) and self.message_position >= len(self.messages)


class Replay:
    def __init__(self, session_dir, logger=logger):
        self.session_dir = Path(session_dir)
        self.logger = logger
        self._custom_actions: dict[EventType, EventAction] = {}
        self.event_actions: dict[EventType, EventAction] = {}
        self.info: Optional[SessionInfo] = None
        self.streams: dict[int, list[_Stream]] = {}
        self.delays: dict[int, float] = {}
        self.stats = ReplayStats()

    def register(self, event_type: Union[EventType, str], action: EventAction):
        self._custom_actions[EventType(event_type)] = action

    def start(self, sink: ReplaySink):
        session = RecordingSession.read(self.session_dir, logger=self.logger)
        self.info = session.info
        self.streams = {player_id: [] for player_id in self.info.player_ids}
        for entity in session.entities:
            if entity.player_id not in self.streams:
                self.logger.warning(
                    f"Skipping {entity.transform_file}: player {entity.player_id} is not in the session"
                )
                continue
            self.streams[entity.player_id].append(
                _Stream(
                    entity,
                    table_records(session.transforms[entity])
                    if entity in session.transforms
                    else [],
                    session.messages.get(entity, []),
                )
            )
        self.delays = {
            player_id: self.info.wait_time(player_id)
            for player_id in self.info.player_ids
        }
        self.event_actions = {
            event_type: sink.execute_event for event_type in EventType
        }
        self.event_actions.update(self._custom_actions)
        self.stats = ReplayStats()

    @property
    def finished(self) -> bool:
        return all(
            stream.exhausted for streams in self.streams.values() for stream in streams
        )

    def update(self, frame_index: int, sink: ReplaySink):
        time = frame_index / self.info.frame_rate
        tolerance = 0.5 / self.info.frame_rate
        for player_id in self.info.player_ids:
            local = time - self.delays[player_id]
            if local < -tolerance:
                continue
            for stream in self.streams[player_id]:
                self._advance(player_id, stream, local + tolerance, sink)

    def _advance(self, player_id: int, stream: _Stream, limit: float, sink: ReplaySink):
        due = []
        while (
            stream.transform_position < len(stream.transforms)
            and stream.transforms[stream.transform_position].time <= limit
        ):
            due.append(stream.transforms[stream.transform_position])
            stream.transform_position += 1
        if len(due) > 1:
            self.stats.skipped_lines += len(due) - 1
            self.logger.warning(
                f"{stream.entity.transform_file}: skipping {len(due) - 1} line(s) to catch up"
            )
        record = due[-1] if due else None

        executed = 0
        while (
            stream.message_position < len(stream.messages)
            and stream.messages[stream.message_position].time <= limit
        ):
            message = stream.messages[stream.message_position]
            stream.message_position += 1
            if not message.is_known:
                self.logger.warning(
                    f"{stream.entity.messages_file}:{message.line_number}: "
                    f"unknown event type {message.event_type!r}, skipped"
                )
                self.stats.unknown_events += 1
                continue
            self.event_actions[message.event_type](
                player_id, stream.entity, message, record
            )
            self.stats.events += 1
            executed += 1
        if not executed and record is not None:
            sink.apply_transform(player_id, stream.entity, record)
            self.stats.transforms += 1

    def run(self, sink: ReplaySink) -> ReplayStats:
        self.start(sink)
        frame_index = 0
        while not self.finished:
            self.update(frame_index, sink)
            frame_index += 1
        self.stats.frames = frame_index
        self.logger.info(
            f"Replayed {self.stats.frames} frames from {self.session_dir} "
            f"({self.stats.transforms} transforms, {self.stats.events} events)"
        )
        return self.stats


class ListSink:
    """Keeps everything replay hands over, in order."""

    def __init__(self):
        self.calls = []

    def apply_transform(self, player_id, entity, record):
        self.calls.append(("transform", player_id, entity, record))

    def execute_event(self, player_id, entity, message, record):
        self.calls.append(("event", player_id, entity, message, record))


class RecordingSink:
    """Writes a replay back into a new session."""

    def __init__(self, writer: RecordingWriter):
        self.writer = writer
        self._last_record: dict[TrackedEntity, TransformRecord] = {}

    @classmethod
    def like(cls, info: SessionInfo, session_dir, logger=logger) -> "RecordingSink":
        return cls(
            RecordingWriter.open(
                session_dir,
                info.player_ids,
                frame_rate=info.frame_rate,
                wait_times=info.wait_times,
                owner=info.owner,
                logger=logger,
            )
        )

    def apply_transform(self, player_id, entity, record):
        self.writer.write(entity, record)

    def execute_event(self, player_id, entity, message, record):
        self.writer.write(entity, message)
        if record is not None and self._last_record.get(entity) is not record:
            self.writer.write(entity, record)
            self._last_record[entity] = record


def rerecord(session_dir, out_dir, logger=logger) -> ReplayStats:
    """Replay a session into a fresh recording of it."""
    replay = Replay(session_dir, logger=logger)
    info = SessionInfo.from_text(
        (Path(session_dir) / INFO_FILE).read_text(encoding="utf-8"),
        Path(session_dir) / INFO_FILE,
    )
    sink = RecordingSink.like(info, out_dir, logger=logger)
    stats = replay.run(sink)
    sink.writer.close(info.duration)
    return stats


def check_interaction_pairing(session: RecordingSession) -> list[str]:
    """Problems with Start/End interaction pairs, empty when well formed."""
    problems = []
    for entity in sorted(session.messages):
        active = {}
        for message in session.messages[entity]:
            where = f"{entity.messages_file} at t={message.time:g}"
            if message.event_type is EventType.START_INTERACTION:
                if message.target in active:
                    problems.append(f"{where}: {message.target!r} started twice")
                active[message.target] = message.time
            elif message.event_type is EventType.END_INTERACTION:
                if message.target not in active:
                    problems.append(
                        f"{where}: EndInteraction with {message.target!r} has no matching start"
                    )
                    continue
                started = active.pop(message.target)
                if abs(message.time - started - message.duration) > 1e-6:
                    problems.append(
                        f"{where}: duration {message.duration:g} does not match its start"
                    )
    return problems
