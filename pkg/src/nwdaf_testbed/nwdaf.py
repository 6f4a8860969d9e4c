"""The analytics function: subscribes to AMF/SMF events, receives and persists them."""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Iterable, Iterator, Optional, Protocol

import yaml

from .corenf import Amf, Smf
from .domain import AmfEventKind, NetworkEvent, SimClock, SimInstant, SmfEventKind, canonical_json
from .sba import HttpishRequest, HttpishResponse, NfProfile, NfService, Transport, TransportError, error

log = logging.getLogger(__name__)

NF_SERVICES = {"AMF": (Amf.SERVICE, Amf.SUBS_PREFIX), "SMF": (Smf.SERVICE, Smf.SUBS_PREFIX)}
NF_KINDS = {"AMF": AmfEventKind, "SMF": SmfEventKind}


class NwdafStartupError(RuntimeError):
    pass


@dataclass(frozen=True)
class SubscriptionEntry:
    nf_type: str
    event_kinds: tuple[str, ...]
    supi_filter: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.nf_type not in NF_KINDS:
            raise ValueError(f"unknown nf {self.nf_type!r}; expected amf or smf")
        kinds = NF_KINDS[self.nf_type]
        for k in self.event_kinds:
            try:
                kinds(k)
            except ValueError:
                raise ValueError(f"event {k!r} is not an {self.nf_type} event") from None


@dataclass(frozen=True)
class SubscriptionConfig:
    entries: tuple[SubscriptionEntry, ...] = ()

    @classmethod
    def from_mapping(cls, data: Any) -> SubscriptionConfig:
        if data is None:
            return cls()
        if not isinstance(data, dict) or not isinstance(data.get("subscriptions", []), list):
            raise ValueError("nwdaf config needs a 'subscriptions' list")
        entries = []
        for i, raw in enumerate(data.get("subscriptions") or []):
            if not isinstance(raw, dict) or "nf" not in raw or "events" not in raw:
                raise ValueError(f"subscriptions[{i}] needs 'nf' and 'events'")
            supis = raw.get("supis")
            entries.append(SubscriptionEntry(
                nf_type=str(raw["nf"]).upper(),
                event_kinds=tuple(str(e) for e in raw["events"]),
                supi_filter=None if supis is None else tuple(str(s) for s in supis),
            ))
        return cls(tuple(entries))

    @classmethod
    def load(cls, path: str | Path) -> SubscriptionConfig:
        with open(path) as fh:
            return cls.from_mapping(yaml.safe_load(fh))

    def to_mapping(self) -> dict:
        out = []
        for e in self.entries:
            item: dict[str, Any] = {"nf": e.nf_type.lower(), "events": list(e.event_kinds)}
            if e.supi_filter is not None:
                item["supis"] = list(e.supi_filter)
            out.append(item)
        return {"subscriptions": out}


def subscribe_all() -> SubscriptionConfig:
    return SubscriptionConfig((
        SubscriptionEntry("AMF", tuple(k.value for k in AmfEventKind)),
        SubscriptionEntry("SMF", tuple(k.value for k in SmfEventKind)),
    ))


@dataclass(frozen=True)
class Receipt:
    subscription_id: str
    received_at: SimInstant
    event: NetworkEvent

    def to_json(self) -> dict:
        return {
            "subscription_id": self.subscription_id,
            "received_at": self.received_at.to_json(),
            "event": self.event.to_json(),
        }

    def dumps(self) -> str:
        return canonical_json(self.to_json())

    @classmethod
    def from_json(cls, obj: dict) -> Receipt:
        return cls(obj["subscription_id"], SimInstant.from_json(obj["received_at"]), NetworkEvent.from_json(obj["event"]))


def read_log(path: str | Path) -> tuple[list[Receipt], int]:
    """Parse an NDJSON event log; returns (receipts, corrupt line count)."""
    receipts, corrupt = [], 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                receipts.append(Receipt.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                corrupt += 1
                log.warning("%s:%d: skipping corrupt line (%s)", path, lineno, exc)
    return receipts, corrupt


class EventStore:
    """Append-only receipt store, optionally mirrored line-by-line to an NDJSON file."""

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path else None
        self._receipts: list[Receipt] = []
        self._lock = threading.Lock()
        self._fh: Optional[IO[str]] = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")

    def __len__(self) -> int:
        return len(self._receipts)

    def append(self, receipt: Receipt) -> None:
        line = receipt.dumps()
        with self._lock:
            self._receipts.append(receipt)
            if self._fh:
                self._fh.write(line + "\n")

    def snapshot(self) -> list[Receipt]:
        with self._lock:
            return list(self._receipts)

    def events(self) -> list[NetworkEvent]:
        return [r.event for r in self.snapshot()]

    def flush(self) -> None:
        with self._lock:
            if self._fh:
                self._fh.flush()

    def close(self) -> None:
        with self._lock:
            if self._fh:
                self._fh.close()
                self._fh = None

    @classmethod
    def replay(cls, path: str | Path) -> EventStore:
        store = cls()
        receipts, corrupt = read_log(path)
        if corrupt:
            raise ValueError(f"{path}: {corrupt} corrupt lines")
        store._receipts = receipts
        return store


class Discovery(Protocol):
    def discover(self, target_nf_type: str, service_name: str) -> list[str]: ...

    def register_nf(self, profile: NfProfile) -> Any: ...


class Nwdaf:
    """Collects AMF/SMF events via subscription and persists every notification."""

    NOTIFY_PREFIX = "/nwdaf-notify/v1/"
    SERVICE = "nwdaf-notify"

    def __init__(
        self,
        transport: Transport,
        registry: Discovery,
        clock: SimClock,
        log_path: str | Path | None = None,
        nf_instance_id: str = "nwdaf-1",
    ) -> None:
        self.transport = transport
        self.registry = registry
        self.clock = clock
        self.nf_instance_id = nf_instance_id
        self.store = EventStore(log_path)
        self.base_uri: Optional[str] = None
        self.active: dict[str, tuple[str, str]] = {}  # subscription id -> (nf type, nf base uri)
        self.rejected = 0
        self.ack_latency_s: list[float] = []
        self.handle_latency_s: list[float] = []
        self._started = False
        self._lock = threading.Lock()

    def bind(self) -> str:
        """Serve the notification endpoint and advertise it in the registry."""
        self.base_uri = self.transport.serve(self.nf_instance_id, self.handle)
        self.registry.register_nf(
            NfProfile(self.nf_instance_id, "NWDAF", (NfService(self.SERVICE, self.base_uri),))
        )
        return self.base_uri

    def start(self, config: SubscriptionConfig) -> list[str]:
        if self.base_uri is None:
            self.bind()
        if not config.entries:
            log.warning("NWDAF started with an empty subscription config")
        endpoints: dict[str, str] = {}
        for entry in config.entries:
            service, _ = NF_SERVICES[entry.nf_type]
            if entry.nf_type not in endpoints:
                found = self.registry.discover(entry.nf_type, service)
                if not found:
                    raise NwdafStartupError(f"no {entry.nf_type} instance offers {service}")
                endpoints[entry.nf_type] = found[0]
        ids = []
        for entry in config.entries:
            service, prefix = NF_SERVICES[entry.nf_type]
            body: dict[str, Any] = {
                "subscriber": self.nf_instance_id,
                "notifyUri": f"{self.base_uri}{self.NOTIFY_PREFIX}{entry.nf_type.lower()}",
                "eventKinds": list(entry.event_kinds),
            }
            if entry.supi_filter is not None:
                body["supiFilter"] = list(entry.supi_filter)
            t0 = time.perf_counter()
            try:
                resp = self.transport.send(HttpishRequest("POST", prefix, body), endpoints[entry.nf_type])
            except TransportError as exc:
                raise NwdafStartupError(f"{service} unreachable: {exc}") from exc
            self.ack_latency_s.append(time.perf_counter() - t0)
            if resp.status != 201:
                raise NwdafStartupError(f"subscription {entry} rejected with {resp.status}: {resp.body}")
            sub_id = resp.body["subscriptionId"]
            with self._lock:
                self.active[sub_id] = (entry.nf_type, endpoints[entry.nf_type])
            ids.append(sub_id)
        self._started = True
        return ids

    def handle(self, request: HttpishRequest) -> HttpishResponse:
        if request.method != "POST" or not request.route.startswith(self.NOTIFY_PREFIX):
            return error(404, f"no route {request.method} {request.route}")
        return self.handle_notification(request.body)

    def handle_notification(self, body: Any) -> HttpishResponse:
        t0 = time.perf_counter()
        if isinstance(body, (str, bytes)):
            try:
                body = json.loads(body)
            except json.JSONDecodeError:
                return error(400, "malformed JSON")
        if not isinstance(body, dict) or "subscriptionId" not in body or "event" not in body:
            return error(400, "notification needs subscriptionId and event")
        sub_id = body["subscriptionId"]
        with self._lock:
            known = sub_id in self.active
            if not known:
                self.rejected += 1
        if not known:
            return error(404, f"unknown subscription {sub_id}")
        try:
            event = NetworkEvent.from_json(body["event"])
        except (KeyError, TypeError, ValueError) as exc:
            return error(400, f"malformed event: {exc}")
        self.store.append(Receipt(sub_id, self.clock.now(), event))
        self.handle_latency_s.append(time.perf_counter() - t0)
        return HttpishResponse(204)

    def shutdown(self) -> None:
        with self._lock:
            active = list(self.active.items())
            self.active.clear()
        for sub_id, (nf_type, base) in active:
            _, prefix = NF_SERVICES[nf_type]
            try:
                resp = self.transport.send(HttpishRequest("DELETE", f"{prefix}/{sub_id}"), base)
                if resp.status == 404:
                    log.info("subscription %s already gone", sub_id)
            except TransportError as exc:
                log.warning("could not delete %s: %s", sub_id, exc)
        self.store.flush()
        self._started = False

    def close(self) -> None:
        self.store.close()

    def events(self) -> list[NetworkEvent]:
        return self.store.events()


def events_of(receipts: Iterable[Receipt]) -> list[NetworkEvent]:
    return [r.event for r in receipts]


def iter_events(path: str | Path) -> Iterator[NetworkEvent]:
    receipts, _ = read_log(path)
    return iter(events_of(receipts))

