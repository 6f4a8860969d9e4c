"""Simulated AMF and SMF with a shared event-exposure engine.

Each NF owns a subscription store, matches emitted events against it and POSTs
one notification per matching subscription to the subscriber's notify URI.
Cross-NF effects (deregistration releasing sessions, handover moving the user
plane path) travel as ordinary transport requests.
"""

from __future__ import annotations

import heapq
import logging
import re
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .domain import (
    AmfEventKind,
    CellId,
    CmState,
    ConnectivityStatePayload,
    EventKind,
    HandoverPayload,
    LocationReportPayload,
    NetworkEvent,
    PduSessionPayload,
    PduSessionReleasePayload,
    PresencePayload,
    QosChangePayload,
    ReachabilityPayload,
    RegistrationStatePayload,
    RmState,
    SimClock,
    SmfEventKind,
    Supi,
    TrafficVolumePayload,
    UpPathChangePayload,
    validate_event,
)
from .sba import HttpishRequest, HttpishResponse, Transport, TransportError, error, split_uri

log = logging.getLogger(__name__)

RETRY_DELAYS_S = (0.1, 1.0, 10.0)

_URI_RE = re.compile(r"^[a-z][a-z0-9+.-]*://[^/\s]+(/\S*)?$")


class NfError(Exception):
    """A request or procedure was rejected; ``status`` is the HTTP-ish code."""

    def __init__(self, status: int, detail: str) -> None:
        super().__init__(detail)
        self.status = status
        self.detail = detail


@dataclass(frozen=True)
class Subscription:
    subscription_id: str
    subscriber: str
    notify_uri: str
    event_kinds: frozenset
    supi_filter: Optional[frozenset] = None

    def matches(self, event: NetworkEvent) -> bool:
        if event.kind not in self.event_kinds:
            return False
        return self.supi_filter is None or event.supi in self.supi_filter


@dataclass(order=True)
class _PendingRetry:
    due: float
    seq: int
    notify_uri: str = field(compare=False)
    body: dict = field(compare=False)
    attempts: int = field(compare=False)


class ExposureEngine:
    """Subscription store, event matching and notification dispatch for one NF."""

    def __init__(self, nf_type: str, kinds: type[Enum], transport: Transport, clock: SimClock) -> None:
        self.nf_type = nf_type
        self.kinds = kinds
        self.transport = transport
        self.clock = clock
        self.subscriptions: dict[str, Subscription] = {}
        self.events: list[NetworkEvent] = []
        self.dispatch_total = 0
        self.dispatch_by_kind: Counter = Counter()
        self.delivered_by_uri: Counter = Counter()
        self.failures = 0
        self.retries = 0
        self.notify_wall_s: list[float] = []
        self._counter = 0
        self._retry_seq = 0
        self._pending: list[_PendingRetry] = []

    def subscribe(
        self,
        subscriber: str,
        notify_uri: str,
        event_kinds: Iterable[str | EventKind],
        supi_filter: Iterable[Supi] | None = None,
    ) -> str:
        kinds = set()
        for k in event_kinds:
            try:
                kinds.add(self.kinds(k.value if isinstance(k, Enum) else k))
            except ValueError:
                raise NfError(400, f"event kind {k!s} is not exposed by {self.nf_type}") from None
        if not kinds:
            raise NfError(400, "eventKinds must be non-empty")
        if not isinstance(notify_uri, str) or not _URI_RE.match(notify_uri):
            raise NfError(400, f"invalid notifyUri {notify_uri!r}")
        self._counter += 1
        sub_id = f"{self.nf_type}-SUB-{self._counter:06d}"
        supis = None if supi_filter is None else frozenset(supi_filter)
        self.subscriptions[sub_id] = Subscription(sub_id, subscriber, notify_uri, frozenset(kinds), supis)
        log.debug("%s stored subscription %s for %s", self.nf_type, sub_id, subscriber)
        return sub_id

    def unsubscribe(self, subscription_id: str) -> None:
        if self.subscriptions.pop(subscription_id, None) is None:
            raise NfError(404, f"no subscription {subscription_id}")

    def matching(self, event: NetworkEvent) -> list[Subscription]:
        return [s for s in self.subscriptions.values() if s.matches(event)]

    def send_event_notification(self, event: NetworkEvent) -> int:
        """Log ``event`` and notify every matching subscriber; returns the dispatch count."""
        problems = validate_event(event)
        if problems:
            raise ValueError(f"invalid event {event.kind}: {', '.join(problems)}")
        self.events.append(event)
        targets = self.matching(event)
        if not targets:
            return 0
        wire_event = event.to_json()
        for sub in targets:
            body = {"subscriptionId": sub.subscription_id, "event": wire_event}
            self.dispatch_total += 1
            self.dispatch_by_kind[event.kind.value] += 1
            self._deliver(sub.notify_uri, body, attempts=0)
        return len(targets)

    def _deliver(self, notify_uri: str, body: dict, attempts: int) -> None:
        t0 = time.perf_counter()
        try:
            base, path = split_uri(notify_uri)
            resp = self.transport.send(HttpishRequest("POST", path, body), base)
            ok = resp.ok
        except (TransportError, ValueError) as exc:
            log.debug("notification to %s failed: %s", notify_uri, exc)
            ok = False
        self.notify_wall_s.append(time.perf_counter() - t0)
        if ok:
            self.delivered_by_uri[notify_uri] += 1
            return
        if attempts < len(RETRY_DELAYS_S):
            self._retry_seq += 1
            due = self.clock.offset_s + RETRY_DELAYS_S[attempts]
            heapq.heappush(self._pending, _PendingRetry(due, self._retry_seq, notify_uri, body, attempts + 1))
        else:
            self.failures += 1
            log.warning("%s dropped notification to %s after %d retries", self.nf_type, notify_uri, attempts)

    def pump(self) -> None:
        """Re-attempt failed deliveries whose backoff has elapsed."""
        now = self.clock.offset_s
        while self._pending and self._pending[0].due <= now:
            item = heapq.heappop(self._pending)
            self.retries += 1
            self._deliver(item.notify_uri, item.body, item.attempts)

    @property
    def pending_retries(self) -> int:
        return len(self._pending)

    def handle_subscriptions(self, request: HttpishRequest, prefix: str) -> HttpishResponse:
        route = request.route
        if request.method == "POST" and route == prefix:
            body = request.body
            if not isinstance(body, dict):
                return error(400, "body must be a JSON object")
            try:
                sub_id = self.subscribe(
                    body.get("subscriber", ""),
                    body.get("notifyUri"),
                    body.get("eventKinds") or [],
                    body.get("supiFilter"),
                )
            except NfError as exc:
                return error(exc.status, exc.detail)
            return HttpishResponse(201, {"subscriptionId": sub_id})
        if request.method == "DELETE" and route.startswith(prefix + "/"):
            try:
                self.unsubscribe(route[len(prefix) + 1:])
            except NfError as exc:
                return error(exc.status, exc.detail)
            return HttpishResponse(204)
        return error(404, f"no route {request.method} {route}")


@dataclass
class UeContext:
    supi: Supi
    rm_state: RmState = RmState.DEREGISTERED
    cm_state: CmState = CmState.IDLE
    serving_cell: Optional[CellId] = None
    last_two_cells: list = field(default_factory=list)
    reachable: bool = False

    def check(self) -> list[str]:
        problems = []
        if (self.serving_cell is not None) != (self.rm_state is RmState.REGISTERED):
            problems.append("serving_cell present iff REGISTERED")
        if self.rm_state is RmState.DEREGISTERED and self.cm_state is not CmState.IDLE:
            problems.append("DEREGISTERED implies IDLE")
        if len(self.last_two_cells) > 2:
            problems.append("last_two_cells longer than 2")
        return problems


def _events_from(body) -> list[NetworkEvent]:
    return [NetworkEvent.from_json(e) for e in (body or {}).get("events", [])]


class Amf:
    """Access and mobility management: registration, connectivity and handover."""

    SERVICE = "namf-evts"
    COMM_SERVICE = "namf-comm"
    SUBS_PREFIX = "/namf-evts/v1/subscriptions"
    CONTEXT_PREFIX = "/namf-comm/v1/ue-contexts/"

    def __init__(self, transport: Transport, clock: SimClock, nf_instance_id: str = "amf-1") -> None:
        self.nf_instance_id = nf_instance_id
        self.engine = ExposureEngine("AMF", AmfEventKind, transport, clock)
        self.transport = transport
        self.clock = clock
        self.contexts: dict[Supi, UeContext] = {}
        self.smf_uri: Optional[str] = None
        self._lock = threading.RLock()

    def context(self, supi: Supi) -> UeContext:
        return self.contexts.setdefault(supi, UeContext(supi))

    def handle(self, request: HttpishRequest) -> HttpishResponse:
        with self._lock:
            if request.route.startswith(self.CONTEXT_PREFIX) and request.method == "GET":
                ctx = self.contexts.get(request.route[len(self.CONTEXT_PREFIX):])
                if ctx is None:
                    return error(404, "unknown UE")
                return HttpishResponse(200, {
                    "supi": ctx.supi,
                    "rmState": ctx.rm_state.value,
                    "cmState": ctx.cm_state.value,
                    "servingCell": ctx.serving_cell.to_json() if ctx.serving_cell else None,
                })
            return self.engine.handle_subscriptions(request, self.SUBS_PREFIX)

    def _emit(self, kind: AmfEventKind, supi: Supi, payload) -> NetworkEvent:
        event = NetworkEvent(kind, self.clock.now(), supi, payload)
        self.engine.send_event_notification(event)
        return event

    def _call_smf(self, path: str, body: dict) -> list[NetworkEvent]:
        if self.smf_uri is None:
            return []
        try:
            resp = self.transport.send(HttpishRequest("POST", path, body), self.smf_uri)
        except TransportError as exc:
            log.error("SMF unreachable: %s", exc)
            return []
        if not resp.ok:
            log.error("SMF rejected %s: %s", path, resp.body)
            return []
        return _events_from(resp.body)

    def register(self, supi: Supi, cell: CellId) -> list[NetworkEvent]:
        with self._lock:
            ctx = self.context(supi)
            if ctx.rm_state is RmState.REGISTERED:
                raise NfError(400, f"{supi} already registered")
            ctx.rm_state = RmState.REGISTERED
            ctx.cm_state = CmState.CONNECTED
            ctx.serving_cell = cell
            ctx.reachable = True
            return [
                self._emit(AmfEventKind.REGISTRATION_STATE, supi, RegistrationStatePayload(RmState.REGISTERED)),
                self._emit(AmfEventKind.CONNECTIVITY_STATE, supi, ConnectivityStatePayload(CmState.CONNECTED)),
                self._emit(AmfEventKind.LOCATION_REPORT, supi, LocationReportPayload(cell)),
            ]

    def deregister(self, supi: Supi) -> list[NetworkEvent]:
        with self._lock:
            ctx = self.contexts.get(supi)
            if ctx is None or ctx.rm_state is not RmState.REGISTERED:
                raise NfError(400, f"{supi} not registered")
            ctx.rm_state = RmState.DEREGISTERED
            ctx.cm_state = CmState.IDLE
            ctx.serving_cell = None
            ctx.reachable = False
            events = [
                self._emit(AmfEventKind.CONNECTIVITY_STATE, supi, ConnectivityStatePayload(CmState.IDLE)),
                self._emit(AmfEventKind.REGISTRATION_STATE, supi, RegistrationStatePayload(RmState.DEREGISTERED)),
            ]
            events += self._call_smf(f"{Smf.PDU_PREFIX}{supi}/release", {})
            return events

    def handover(self, supi: Supi, target: CellId) -> list[NetworkEvent]:
        with self._lock:
            ctx = self.contexts.get(supi)
            if ctx is None or ctx.rm_state is not RmState.REGISTERED:
                raise NfError(400, f"{supi} not registered")
            source = ctx.serving_cell
            if target == source:
                raise NfError(400, f"{supi} already served by {target}")
            ctx.serving_cell = target
            ctx.last_two_cells = [source] + ctx.last_two_cells[:1]
            events = [
                self._emit(AmfEventKind.HANDOVER, supi, HandoverPayload(source, target)),
                self._emit(AmfEventKind.LOCATION_REPORT, supi, LocationReportPayload(target)),
            ]
            events += self._call_smf(
                f"{Smf.PDU_PREFIX}{supi}/up-path-change",
                {"oldCell": source.to_json(), "newCell": target.to_json()},
            )
            return events

    def radio_loss(self, supi: Supi) -> list[NetworkEvent]:
        """UE left all coverage: it stays registered but becomes idle and unreachable."""
        with self._lock:
            ctx = self.contexts.get(supi)
            if ctx is None or ctx.rm_state is not RmState.REGISTERED or ctx.cm_state is CmState.IDLE:
                raise NfError(400, f"{supi} not connected")
            ctx.cm_state = CmState.IDLE
            ctx.reachable = False
            return [
                self._emit(AmfEventKind.CONNECTIVITY_STATE, supi, ConnectivityStatePayload(CmState.IDLE)),
                self._emit(AmfEventKind.REACHABILITY, supi, ReachabilityPayload(False)),
            ]

    def radio_restore(self, supi: Supi, cell: CellId) -> list[NetworkEvent]:
        """UE is back in coverage; re-entry at another cell is reported as a handover."""
        with self._lock:
            ctx = self.contexts.get(supi)
            if ctx is None or ctx.rm_state is not RmState.REGISTERED or ctx.cm_state is CmState.CONNECTED:
                raise NfError(400, f"{supi} not in radio loss")
            ctx.cm_state = CmState.CONNECTED
            ctx.reachable = True
            events = [
                self._emit(AmfEventKind.CONNECTIVITY_STATE, supi, ConnectivityStatePayload(CmState.CONNECTED)),
                self._emit(AmfEventKind.REACHABILITY, supi, ReachabilityPayload(True)),
            ]
            if cell != ctx.serving_cell:
                events += self.handover(supi, cell)
            return events

    def report_presence(self, supi: Supi, aoi_id: str, inside: bool) -> NetworkEvent:
        with self._lock:
            ctx = self.contexts.get(supi)
            if ctx is None or ctx.rm_state is not RmState.REGISTERED:
                raise NfError(400, f"{supi} not registered")
            return self._emit(AmfEventKind.PRESENCE_IN_AOI, supi, PresencePayload(aoi_id, inside))


@dataclass
class PduSession:
    session_id: str
    supi: Supi
    dnn: str
    anchor_cell: CellId
    active: bool = True
    bytes_up: int = 0
    bytes_down: int = 0
    five_qi: int = 9


class Smf:
    """Session management: PDU session lifecycle and user-plane path."""

    SERVICE = "nsmf-evts"
    PDU_SERVICE = "nsmf-pdusession"
    SUBS_PREFIX = "/nsmf-evts/v1/subscriptions"
    PDU_PREFIX = "/nsmf-pdusession/v1/ue-contexts/"

    def __init__(self, transport: Transport, clock: SimClock, nf_instance_id: str = "smf-1") -> None:
        self.nf_instance_id = nf_instance_id
        self.engine = ExposureEngine("SMF", SmfEventKind, transport, clock)
        self.transport = transport
        self.clock = clock
        self.sessions: dict[str, PduSession] = {}
        self.amf_uri: Optional[str] = None
        self._counter = 0
        self._lock = threading.RLock()

    def handle(self, request: HttpishRequest) -> HttpishResponse:
        with self._lock:
            route = request.route
            if request.method == "POST" and route.startswith(self.PDU_PREFIX):
                supi, _, action = route[len(self.PDU_PREFIX):].partition("/")
                if action == "release":
                    events = self.release_all(supi)
                elif action == "up-path-change":
                    body = request.body or {}
                    try:
                        old, new = CellId.from_json(body["oldCell"]), CellId.from_json(body["newCell"])
                    except (KeyError, TypeError, ValueError):
                        return error(400, "oldCell and newCell required")
                    events = self.up_path_change(supi, old, new)
                else:
                    return error(404, f"no action {action!r}")
                return HttpishResponse(200, {"events": [e.to_json() for e in events]})
            return self.engine.handle_subscriptions(request, self.SUBS_PREFIX)

    def _emit(self, kind: SmfEventKind, supi: Supi, payload) -> NetworkEvent:
        event = NetworkEvent(kind, self.clock.now(), supi, payload)
        self.engine.send_event_notification(event)
        return event

    def _ue_registered(self, supi: Supi) -> bool:
        if self.amf_uri is None:
            raise NfError(500, "SMF has no AMF to consult")
        try:
            resp = self.transport.send(HttpishRequest("GET", Amf.CONTEXT_PREFIX + supi), self.amf_uri)
        except TransportError as exc:
            raise NfError(500, f"AMF unreachable: {exc}") from exc
        return resp.status == 200 and resp.body["rmState"] == RmState.REGISTERED.value

    def _active(self, session_id: str) -> PduSession:
        sess = self.sessions.get(session_id)
        if sess is None:
            raise NfError(404, f"no session {session_id}")
        if not sess.active:
            raise NfError(400, f"session {session_id} already released")
        return sess

    def active_sessions(self, supi: Supi) -> list[PduSession]:
        return [s for s in self.sessions.values() if s.supi == supi and s.active]

    def establish(self, supi: Supi, dnn: str, anchor_cell: CellId) -> tuple[str, NetworkEvent]:
        with self._lock:
            if not self._ue_registered(supi):
                raise NfError(400, f"{supi} not registered")
            self._counter += 1
            session_id = f"PDU-{self._counter:06d}"
            self.sessions[session_id] = PduSession(session_id, supi, dnn, anchor_cell)
            event = self._emit(SmfEventKind.PDU_SESSION_ESTABLISHMENT, supi, PduSessionPayload(session_id, dnn))
            return session_id, event

    def release(self, session_id: str) -> NetworkEvent:
        with self._lock:
            sess = self._active(session_id)
            sess.active = False
            return self._emit(
                SmfEventKind.PDU_SESSION_RELEASE,
                sess.supi,
                PduSessionReleasePayload(session_id, sess.dnn, sess.bytes_up, sess.bytes_down),
            )

    def release_all(self, supi: Supi) -> list[NetworkEvent]:
        with self._lock:
            return [self.release(s.session_id) for s in self.active_sessions(supi)]

    def traffic_tick(self, session_id: str, bytes_up: int, bytes_down: int) -> NetworkEvent:
        if bytes_up < 0 or bytes_down < 0:
            raise NfError(400, "traffic volumes must be non-negative")
        with self._lock:
            sess = self._active(session_id)
            sess.bytes_up += bytes_up
            sess.bytes_down += bytes_down
            return self._emit(
                SmfEventKind.TRAFFIC_VOLUME_REPORT, sess.supi, TrafficVolumePayload(session_id, bytes_up, bytes_down)
            )

    def qos_change(self, session_id: str, five_qi: int) -> NetworkEvent:
        with self._lock:
            sess = self._active(session_id)
            before, sess.five_qi = sess.five_qi, five_qi
            return self._emit(SmfEventKind.QOS_CHANGE, sess.supi, QosChangePayload(session_id, before, five_qi))

    def up_path_change(self, supi: Supi, old_cell: CellId, new_cell: CellId) -> list[NetworkEvent]:
        with self._lock:
            events = []
            for sess in self.active_sessions(supi):
                sess.anchor_cell = new_cell
                events.append(
                    self._emit(SmfEventKind.UP_PATH_CHANGE, supi, UpPathChangePayload(sess.session_id, old_cell, new_cell))
                )
            return events
