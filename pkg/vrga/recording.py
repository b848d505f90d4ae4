"""Session files of the VR recorder.

A session directory holds ``RecordingInfo.txt`` plus one folder per player::

    RecordingInfo.txt
    player_1/Transform Camera.txt
    player_1/Messages Camera.txt
    player_1/Transform Left Hand.txt
    ...
    player_1/Transform Object <name>.txt

Transform lines read ``t;px;py;pz;rx;ry;rz`` (meters, Euler degrees), message
lines ``t;EVENT;payload1;payload2``. Floats carry 9 significant digits.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from .exceptions import RecordingFormatError, SessionExistsError
from .workflows.ga_core import (
    Pose,
    euler_array_to_quat,
    quat_array_to_euler,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = "VRRR-1"
INFO_FILE = "RecordingInfo.txt"
TRANSFORM_COLUMNS = ["t", "px", "py", "pz", "rx", "ry", "rz"]
FORBIDDEN_NAME_CHARACTERS = ("=", ";", "\n", "\r", "/", "\\")


def format_float(value: float) -> str:
    text = f"{float(value):.9g}"
    return "0" if text == "-0" else text


class EntityKind(str, Enum):
    CAMERA = "Camera"
    LEFT_HAND = "Left Hand"
    RIGHT_HAND = "Right Hand"
    OBJECT = "Object"


TRACKED_KINDS = (EntityKind.CAMERA, EntityKind.LEFT_HAND, EntityKind.RIGHT_HAND)
HAND_KINDS = (EntityKind.LEFT_HAND, EntityKind.RIGHT_HAND)


def check_name(name: str):
    if not name or any(character in name for character in FORBIDDEN_NAME_CHARACTERS):
        raise ValueError(f"Invalid name {name!r} for a recorded entity or payload")


@dataclass(frozen=True, order=True)
class TrackedEntity:
    player_id: int
    kind: EntityKind
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", EntityKind(self.kind))
        if self.kind is EntityKind.OBJECT:
            check_name(self.name)
        elif self.name:
            raise ValueError(f"Only objects carry a name, got {self.name!r}")

    @property
    def label(self) -> str:
        if self.kind is EntityKind.OBJECT:
            return f"Object {self.name}"
        return self.kind.value

    @property
    def is_object(self) -> bool:
        return self.kind is EntityKind.OBJECT

    @property
    def transform_file(self) -> str:
        return f"player_{self.player_id}/Transform {self.label}.txt"

    @property
    def messages_file(self) -> Optional[str]:
        if self.is_object:
            return None
        return f"player_{self.player_id}/Messages {self.label}.txt"

    @classmethod
    def from_file(cls, relative_path: str) -> "TrackedEntity":
        folder, _, filename = relative_path.partition("/")
        if not folder.startswith("player_") or not filename.endswith(".txt"):
            raise RecordingFormatError(f"Unexpected session file {relative_path!r}")
        player_id = int(folder[len("player_") :])
        stem = filename[: -len(".txt")]
        for prefix in ("Transform ", "Messages "):
            if stem.startswith(prefix):
                label = stem[len(prefix) :]
                break
        else:
            raise RecordingFormatError(f"Unexpected session file {relative_path!r}")
        if label.startswith("Object "):
            return cls(player_id, EntityKind.OBJECT, label[len("Object ") :])
        return cls(player_id, EntityKind(label))


class EventType(str, Enum):
    START_INTERACTION = "StartInteraction"
    END_INTERACTION = "EndInteraction"
    PRESS_BUTTON = "PressButton"
    SCENEGRAPH_TRAVERSE = "ScenegraphTraverse"


@dataclass(frozen=True)
class TransformRecord:
    time: float
    position: tuple[float, float, float]
    rotation: tuple[float, float, float]

    def __post_init__(self):
        if self.time < 0:
            raise ValueError(f"Record time must be non-negative, got {self.time}")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "rotation", tuple(float(v) for v in self.rotation))

    @classmethod
    def from_pose(cls, time: float, pose: Pose) -> "TransformRecord":
        return cls(
            time, tuple(pose.translation), tuple(quat_array_to_euler(pose.rotation))
        )

    def to_pose(self) -> Pose:
        return Pose(np.array(self.position), euler_array_to_quat(self.rotation))

    def to_line(self) -> str:
        return ";".join(
            format_float(value) for value in (self.time, *self.position, *self.rotation)
        )

    @classmethod
    def from_line(cls, line: str, path=None, line_number=None) -> "TransformRecord":
        fields = line.rstrip("\n").split(";")
        if len(fields) != 7:
            raise RecordingFormatError(
                f"Transform lines have 7 fields, got {len(fields)}", path, line_number
            )
        try:
            values = [float(value) for value in fields]
        except ValueError:
            raise RecordingFormatError("Non-numeric transform field", path, line_number)
        return cls(values[0], tuple(values[1:4]), tuple(values[4:7]))


@dataclass(frozen=True)
class MessageRecord:
    """An event; unknown ``event_type`` values stay plain strings."""

    time: float
    event_type: Union[EventType, str]
    target: str = ""
    duration: Optional[float] = None
    line_number: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        if self.time < 0:
            raise ValueError(f"Record time must be non-negative, got {self.time}")
        try:
            object.__setattr__(self, "event_type", EventType(self.event_type))
        except ValueError:
            pass
        if self.target:
            check_name(self.target)
        if self.event_type is EventType.END_INTERACTION:
            if self.duration is None or self.duration < 0:
                raise ValueError(
                    f"EndInteraction needs a non-negative duration, got {self.duration}"
                )

    @property
    def is_known(self) -> bool:
        return isinstance(self.event_type, EventType)

    def to_line(self) -> str:
        event_type = (
            self.event_type.value if self.is_known else str(self.event_type)
        )
        duration = "" if self.duration is None else format_float(self.duration)
        return f"{format_float(self.time)};{event_type};{self.target};{duration}"

    @classmethod
    def from_line(cls, line: str, path=None, line_number=None) -> "MessageRecord":
        fields = line.rstrip("\n").split(";")
        if len(fields) != 4:
            raise RecordingFormatError(
                f"Message lines have 4 fields, got {len(fields)}", path, line_number
            )
        time, event_type, target, duration = fields
        try:
            return cls(
                float(time),
                event_type,
                target,
                float(duration) if duration else None,
                line_number=line_number,
            )
        except ValueError as error:
            raise RecordingFormatError(str(error), path, line_number)


@dataclass
class SessionInfo:
    player_ids: tuple[int, ...] = ()
    duration: float = 0.0
    frame_rate: float = 90.0
    owner: Optional[int] = None
    wait_times: dict[int, float] = field(default_factory=dict)
    skip_n: Optional[int] = None
    reconstructed_from: Optional[int] = None
    pipeline: Optional[str] = None
    files: tuple[str, ...] = ()
    version: str = FORMAT_VERSION

    def __post_init__(self):
        self.player_ids = tuple(int(player_id) for player_id in self.player_ids)
        for player_id, wait_time in self.wait_times.items():
            if wait_time < 0:
                raise ValueError(
                    f"Wait time of player {player_id} must be non-negative, got {wait_time}"
                )
        if self.owner is None and self.player_ids:
            self.owner = self.player_ids[0]

    def wait_time(self, player_id: int) -> float:
        return self.wait_times.get(player_id, 0.0)

    def to_text(self) -> str:
        lines = [
            f"version={self.version}",
            f"duration={format_float(self.duration)}",
            f"frame_rate={format_float(self.frame_rate)}",
            f"players={len(self.player_ids)}",
            f"player_ids={','.join(str(player_id) for player_id in self.player_ids)}",
        ]
        if self.owner is not None:
            lines.append(f"owner={self.owner}")
        for player_id in self.player_ids:
            lines.append(
                f"wait_time.{player_id}={format_float(self.wait_time(player_id))}"
            )
        if self.skip_n is not None:
            lines.append(f"skip_n={self.skip_n}")
        if self.reconstructed_from is not None:
            lines.append(f"reconstructed_from={self.reconstructed_from}")
        if self.pipeline is not None:
            lines.append(f"pipeline={self.pipeline}")
        for index, relative_path in enumerate(self.files):
            lines.append(f"file.{index}={relative_path}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, path=None) -> "SessionInfo":
        values = {}
        for line_number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            key, separator, value = line.partition("=")
            if not separator:
                raise RecordingFormatError("Expected key=value", path, line_number)
            values[key] = value
        version = values.get("version")
        if version != FORMAT_VERSION:
            raise RecordingFormatError(
                f"Unsupported recording version {version!r}, expected {FORMAT_VERSION}",
                path,
            )
        player_ids = tuple(
            int(player_id)
            for player_id in values.get("player_ids", "").split(",")
            if player_id
        )
        if int(values.get("players", len(player_ids))) != len(player_ids):
            raise RecordingFormatError("Player count does not match player_ids", path)
        files = tuple(
            values[key]
            for key in sorted(
                (key for key in values if key.startswith("file.")),
                key=lambda key: int(key.split(".", 1)[1]),
            )
        )
        return cls(
            player_ids=player_ids,
            duration=float(values.get("duration", 0.0)),
            frame_rate=float(values.get("frame_rate", 90.0)),
            owner=int(values["owner"]) if "owner" in values else None,
            wait_times={
                int(key.split(".", 1)[1]): float(value)
                for key, value in values.items()
                if key.startswith("wait_time.")
            },
            skip_n=int(values["skip_n"]) if "skip_n" in values else None,
            reconstructed_from=(
                int(values["reconstructed_from"])
                if "reconstructed_from" in values
                else None
            ),
            pipeline=values.get("pipeline"),
            files=files,
            version=version,
        )


def transform_table(records) -> pd.DataFrame:
    return pd.DataFrame(
        [(record.time, *record.position, *record.rotation) for record in records],
        columns=TRANSFORM_COLUMNS,
        dtype=np.float64,
    )


def table_records(table: pd.DataFrame) -> list[TransformRecord]:
    values = table[TRANSFORM_COLUMNS].to_numpy()
    return [TransformRecord(row[0], tuple(row[1:4]), tuple(row[4:7])) for row in values]


def format_transform_table(table: pd.DataFrame) -> str:
    return "".join(record.to_line() + "\n" for record in table_records(table))


def read_transform_file(path: Path) -> pd.DataFrame:
    with open(path, "r", encoding="utf-8") as f:
        records = [
            TransformRecord.from_line(line, path, line_number)
            for line_number, line in enumerate(f, start=1)
            if line.strip()
        ]
    return transform_table(records)


def read_message_file(path: Path) -> list[MessageRecord]:
    with open(path, "r", encoding="utf-8") as f:
        return [
            MessageRecord.from_line(line, path, line_number)
            for line_number, line in enumerate(f, start=1)
            if line.strip()
        ]


@dataclass
class RecordingSession:
    """In-memory form of a session directory."""

    info: SessionInfo
    transforms: dict[TrackedEntity, pd.DataFrame] = field(default_factory=dict)
    messages: dict[TrackedEntity, list[MessageRecord]] = field(default_factory=dict)

    @property
    def entities(self) -> list[TrackedEntity]:
        return sorted(set(self.transforms) | set(self.messages))

    def files(self) -> tuple[str, ...]:
        files = []
        for entity in self.entities:
            files.append(entity.transform_file)
            if entity.messages_file is not None:
                files.append(entity.messages_file)
        return tuple(files)

    def replace_info(self, **changes) -> "RecordingSession":
        return RecordingSession(
            replace(self.info, **changes), self.transforms, self.messages
        )

    def transform_bytes(self) -> int:
        return sum(
            len(format_transform_table(table).encode("utf-8"))
            for table in self.transforms.values()
        )

    @classmethod
    def read(cls, session_dir, logger=logger) -> "RecordingSession":
        session_dir = Path(session_dir)
        info_path = session_dir / INFO_FILE
        if not info_path.exists():
            raise RecordingFormatError("No recording info file", info_path)
        info = SessionInfo.from_text(info_path.read_text(encoding="utf-8"), info_path)
        transforms, messages = {}, {}
        for relative_path in info.files:
            path = session_dir / relative_path
            if not path.exists():
                raise RecordingFormatError(
                    "File listed in the info file is missing", path
                )
            entity = TrackedEntity.from_file(relative_path)
            logger.debug(f"Reading {path}")
            if relative_path == entity.transform_file:
                transforms[entity] = read_transform_file(path)
            else:
                messages[entity] = read_message_file(path)
        return cls(info, transforms, messages)

    def write(self, session_dir, overwrite: bool = False, logger=logger) -> Path:
        session_dir = Path(session_dir)
        info_path = session_dir / INFO_FILE
        if info_path.exists() and not overwrite:
            raise SessionExistsError(f"A session already exists in {session_dir}")
        for entity in self.entities:
            fp = session_dir / entity.transform_file
            fp.parent.mkdir(parents=True, exist_ok=True)
            table = self.transforms.get(entity, transform_table([]))
            logger.debug(f"Writing file {fp}")
            fp.write_text(format_transform_table(table), encoding="utf-8", newline="\n")
            if entity.messages_file is not None:
                fp = session_dir / entity.messages_file
                text = "".join(
                    f"{message.to_line()}\n"
                    for message in self.messages.get(entity, [])
                )
                fp.write_text(text, encoding="utf-8", newline="\n")
        self.info.files = self.files()
        session_dir.mkdir(parents=True, exist_ok=True)
        info_path.write_text(self.info.to_text(), encoding="utf-8", newline="\n")
        return session_dir
