"""Identities, simulated time, the AMF/SMF event taxonomy and its JSON encoding."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Any, Union

Supi = str

DEFAULT_EPOCH = datetime(2025, 1, 6, tzinfo=timezone.utc)


def canonical_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, no whitespace, no NaN."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _iso(dt: datetime) -> str:
    text = dt.isoformat(timespec="microseconds" if dt.microsecond else "seconds")
    return text.replace("+00:00", "Z")


def parse_utc(text: str) -> datetime:
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass(frozen=True)
class SimInstant:
    """Offset in seconds from scenario start, plus the scenario start itself.

    The epoch is kept at whole-second resolution so the wall-clock form can be
    parsed back exactly.
    """

    offset_s: float
    epoch: datetime = DEFAULT_EPOCH

    def __post_init__(self) -> None:
        if not math.isfinite(self.offset_s) or self.offset_s < 0:
            raise ValueError(f"offset must be finite and non-negative, got {self.offset_s!r}")

    @property
    def wall(self) -> datetime:
        return self.epoch + timedelta(seconds=self.offset_s)

    def seconds_of_day(self) -> float:
        w = self.wall
        return w.hour * 3600 + w.minute * 60 + w.second + w.microsecond / 1e6

    def __lt__(self, other: SimInstant) -> bool:
        return self.offset_s < other.offset_s

    def __le__(self, other: SimInstant) -> bool:
        return self.offset_s <= other.offset_s

    def to_json(self) -> dict:
        return {"offset_s": float(self.offset_s), "utc": _iso(self.wall)}

    @classmethod
    def from_json(cls, obj: dict) -> SimInstant:
        offset = float(obj["offset_s"])
        wall = parse_utc(obj["utc"])
        epoch_ts = round((wall - timedelta(seconds=offset)).timestamp())
        return cls(offset, datetime.fromtimestamp(epoch_ts, tz=timezone.utc))


class TimeCategory(str, Enum):
    MORNING = "morning"
    LUNCH = "lunch"
    AFTERNOON = "afternoon"
    EVENING = "evening"
    NIGHT = "night"


# (start hour inclusive, end hour exclusive); night wraps midnight
_CATEGORY_BOUNDS = (
    (6, 11, TimeCategory.MORNING),
    (11, 14, TimeCategory.LUNCH),
    (14, 18, TimeCategory.AFTERNOON),
    (18, 22, TimeCategory.EVENING),
)


def time_category_of_hour(hour: float) -> TimeCategory:
    for lo, hi, cat in _CATEGORY_BOUNDS:
        if lo <= hour < hi:
            return cat
    return TimeCategory.NIGHT


def time_category_of(instant: SimInstant | datetime) -> TimeCategory:
    """Map a point in time to its time-of-day category (half-open hour bands)."""
    if isinstance(instant, SimInstant):
        sod = instant.seconds_of_day()
    else:
        sod = instant.hour * 3600 + instant.minute * 60 + instant.second + instant.microsecond / 1e6
    return time_category_of_hour(sod / 3600.0)


@dataclass(frozen=True, order=True)
class CellId:
    id: str
    tac: int

    def to_json(self) -> dict:
        return {"id": self.id, "tac": self.tac}

    @classmethod
    def from_json(cls, obj: dict) -> CellId:
        return cls(str(obj["id"]), int(obj["tac"]))

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")

    def distance_to(self, other: Position) -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


class AmfEventKind(str, Enum):
    REGISTRATION_STATE = "REGISTRATION_STATE"
    LOCATION_REPORT = "LOCATION_REPORT"
    PRESENCE_IN_AOI = "PRESENCE_IN_AOI"
    CONNECTIVITY_STATE = "CONNECTIVITY_STATE"
    REACHABILITY = "REACHABILITY"
    HANDOVER = "HANDOVER"


class SmfEventKind(str, Enum):
    PDU_SESSION_ESTABLISHMENT = "PDU_SESSION_ESTABLISHMENT"
    PDU_SESSION_RELEASE = "PDU_SESSION_RELEASE"
    TRAFFIC_VOLUME_REPORT = "TRAFFIC_VOLUME_REPORT"
    QOS_CHANGE = "QOS_CHANGE"
    UP_PATH_CHANGE = "UP_PATH_CHANGE"


EventKind = Union[AmfEventKind, SmfEventKind]


def parse_event_kind(name: str) -> EventKind:
    for enum in (AmfEventKind, SmfEventKind):
        try:
            return enum(name)
        except ValueError:
            pass
    raise ValueError(f"unknown event kind {name!r}")


class RmState(str, Enum):
    REGISTERED = "REGISTERED"
    DEREGISTERED = "DEREGISTERED"


class CmState(str, Enum):
    CONNECTED = "CONNECTED"
    IDLE = "IDLE"


# Payload records. Cell-valued fields are CellId; everything else is a JSON scalar.


@dataclass(frozen=True)
class RegistrationStatePayload:
    state: RmState


@dataclass(frozen=True)
class ConnectivityStatePayload:
    state: CmState


@dataclass(frozen=True)
class LocationReportPayload:
    cell: CellId


@dataclass(frozen=True)
class HandoverPayload:
    source: CellId
    target: CellId


@dataclass(frozen=True)
class PresencePayload:
    aoi_id: str
    inside: bool


@dataclass(frozen=True)
class ReachabilityPayload:
    reachable: bool


@dataclass(frozen=True)
class PduSessionPayload:
    session_id: str
    dnn: str


@dataclass(frozen=True)
class PduSessionReleasePayload:
    session_id: str
    dnn: str
    bytes_up: int
    bytes_down: int


@dataclass(frozen=True)
class TrafficVolumePayload:
    session_id: str
    bytes_up: int
    bytes_down: int


@dataclass(frozen=True)
class QosChangePayload:
    session_id: str
    five_qi_before: int
    five_qi_after: int


@dataclass(frozen=True)
class UpPathChangePayload:
    session_id: str
    old_cell: CellId
    new_cell: CellId


PAYLOAD_TYPES: dict[EventKind, type] = {
    AmfEventKind.REGISTRATION_STATE: RegistrationStatePayload,
    AmfEventKind.CONNECTIVITY_STATE: ConnectivityStatePayload,
    AmfEventKind.LOCATION_REPORT: LocationReportPayload,
    AmfEventKind.HANDOVER: HandoverPayload,
    AmfEventKind.PRESENCE_IN_AOI: PresencePayload,
    AmfEventKind.REACHABILITY: ReachabilityPayload,
    SmfEventKind.PDU_SESSION_ESTABLISHMENT: PduSessionPayload,
    SmfEventKind.PDU_SESSION_RELEASE: PduSessionReleasePayload,
    SmfEventKind.TRAFFIC_VOLUME_REPORT: TrafficVolumePayload,
    SmfEventKind.QOS_CHANGE: QosChangePayload,
    SmfEventKind.UP_PATH_CHANGE: UpPathChangePayload,
}

_ENUM_FIELDS = {"state"}


def _payload_to_json(payload: Any) -> dict:
    out = {}
    for f in fields(payload):
        value = getattr(payload, f.name)
        if isinstance(value, CellId):
            value = value.to_json()
        elif isinstance(value, Enum):
            value = value.value
        out[f.name] = value
    return out


def _payload_from_json(kind: EventKind, obj: dict) -> Any:
    cls = PAYLOAD_TYPES[kind]
    kwargs = {}
    for f in fields(cls):
        if f.name not in obj:
            raise ValueError(f"{kind.value} payload missing field {f.name!r}")
        value = obj[f.name]
        if f.type == "CellId":
            value = CellId.from_json(value)
        elif f.name in _ENUM_FIELDS:
            value = RmState(value) if cls is RegistrationStatePayload else CmState(value)
        kwargs[f.name] = value
    return cls(**kwargs)


@dataclass(frozen=True)
class NetworkEvent:
    kind: EventKind
    timestamp: SimInstant
    supi: Supi
    payload: Any

    @property
    def is_amf(self) -> bool:
        return isinstance(self.kind, AmfEventKind)

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "timestamp": self.timestamp.to_json(),
            "supi": self.supi,
            "payload": _payload_to_json(self.payload),
        }

    @classmethod
    def from_json(cls, obj: dict) -> NetworkEvent:
        kind = parse_event_kind(obj["kind"])
        return cls(
            kind=kind,
            timestamp=SimInstant.from_json(obj["timestamp"]),
            supi=obj["supi"],
            payload=_payload_from_json(kind, obj["payload"]),
        )

    def dumps(self) -> str:
        return canonical_json(self.to_json())

    @classmethod
    def loads(cls, text: str) -> NetworkEvent:
        return cls.from_json(json.loads(text))


def validate_event(event: NetworkEvent) -> list[str]:
    """Return every invariant violation of ``event``; an empty list means valid."""
    problems = []
    if not isinstance(event.supi, str) or not event.supi:
        problems.append("empty supi")
    expected = PAYLOAD_TYPES.get(event.kind)
    if expected is None:
        problems.append(f"unknown kind {event.kind!r}")
    elif not isinstance(event.payload, expected):
        problems.append("payload/kind mismatch")
    elif isinstance(event.payload, HandoverPayload) and event.payload.source == event.payload.target:
        problems.append("source equals target")
    elif isinstance(event.payload, UpPathChangePayload) and event.payload.old_cell == event.payload.new_cell:
        problems.append("old_cell equals new_cell")
    return problems


@dataclass(frozen=True)
class AreaOfInterest:
    """Axis-aligned rectangle used for PRESENCE_IN_AOI reporting."""

    aoi_id: str
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"area {self.aoi_id!r} has inverted bounds")

    def contains(self, pos: Position) -> bool:
        return self.x_min <= pos.x <= self.x_max and self.y_min <= pos.y <= self.y_max


class SimClock:
    """Shared simulated clock; only the scheduler advances it."""

    def __init__(self, epoch: datetime = DEFAULT_EPOCH, offset_s: float = 0.0) -> None:
        if epoch.microsecond:
            raise ValueError("scenario start must be at whole-second resolution")
        self.epoch = epoch
        self.offset_s = offset_s

    def now(self) -> SimInstant:
        return SimInstant(self.offset_s, self.epoch)

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise ValueError("clock cannot run backwards")
        self.offset_s += dt

    def set(self, offset_s: float) -> None:
        if offset_s < self.offset_s:
            raise ValueError("clock cannot run backwards")
        self.offset_s = offset_s
