"""Service registry plus request/response transports (in-process and HTTP over TCP)."""

from __future__ import annotations

import http.client
import json
import logging
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, HTTPServer, ThreadingHTTPServer
from typing import Any, Callable, Protocol
from urllib.parse import parse_qs, urlsplit

from .domain import canonical_json

log = logging.getLogger(__name__)

METHODS = ("GET", "POST", "DELETE", "PUT")
STATUSES = (200, 201, 204, 400, 404, 500)
NF_TYPES = ("AMF", "SMF", "NWDAF")


class TransportError(Exception):
    """Destination could not be reached; distinct from any HTTP-ish status."""


@dataclass(frozen=True)
class HttpishRequest:
    method: str
    path: str
    body: Any = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unsupported method {self.method!r}")

    @property
    def route(self) -> str:
        return urlsplit(self.path).path

    @property
    def query(self) -> dict[str, str]:
        return {k: v[0] for k, v in parse_qs(urlsplit(self.path).query).items()}


@dataclass(frozen=True)
class HttpishResponse:
    status: int
    body: Any = None

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"status {self.status} outside the supported set")

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300


Handler = Callable[[HttpishRequest], HttpishResponse]


def encode_body(body: Any) -> bytes:
    return b"" if body is None else canonical_json(body).encode("utf-8")


def decode_body(raw: bytes) -> Any:
    return json.loads(raw.decode("utf-8")) if raw else None


def error(status: int, detail: str) -> HttpishResponse:
    return HttpishResponse(status, {"detail": detail})


def split_uri(uri: str) -> tuple[str, str]:
    """Split ``scheme://host/path`` into (base_uri, path)."""
    parts = urlsplit(uri)
    if not parts.scheme or not parts.netloc:
        raise ValueError(f"not an absolute uri: {uri!r}")
    path = parts.path or "/"
    if parts.query:
        path += "?" + parts.query
    return f"{parts.scheme}://{parts.netloc}", path


class Transport(Protocol):
    def serve(self, name: str, handler: Handler) -> str: ...

    def send(self, request: HttpishRequest, to: str) -> HttpishResponse: ...

    def close(self) -> None: ...


class InProcTransport:
    """Synchronous, deterministic delivery between handlers in one process.

    Bodies still pass through canonical JSON so both bindings see the same bytes.
    Each destination handles requests serially.
    """

    def __init__(self) -> None:
        self._handlers: dict[str, tuple[Handler, threading.RLock]] = {}
        self.delivered = 0

    def serve(self, name: str, handler: Handler) -> str:
        uri = f"inproc://{name}"
        self._handlers[uri] = (handler, threading.RLock())
        return uri

    def send(self, request: HttpishRequest, to: str) -> HttpishResponse:
        try:
            handler, lock = self._handlers[to]
        except KeyError:
            raise TransportError(f"no handler bound at {to}") from None
        wire = HttpishRequest(request.method, request.path, decode_body(encode_body(request.body)))
        with lock:
            self.delivered += 1
            response = handler(wire)
        return HttpishResponse(response.status, decode_body(encode_body(response.body)))

    def close(self) -> None:
        self._handlers.clear()


class _QuietServer(ThreadingHTTPServer):
    allow_reuse_address = True
    daemon_threads = True


def _make_http_handler(handler: Handler):
    serial = threading.Lock()

    class _RequestHandler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def _dispatch(self) -> None:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            try:
                request = HttpishRequest(self.command, self.path, decode_body(raw))
                with serial:
                    response = handler(request)
            except json.JSONDecodeError:
                response = error(400, "malformed JSON body")
            except Exception:  # handler bug must not kill the server thread
                log.exception("handler failed for %s %s", self.command, self.path)
                response = error(500, "internal error")
            payload = encode_body(response.body)
            self.send_response(response.status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            if payload:
                self.wfile.write(payload)

        do_GET = do_POST = do_PUT = do_DELETE = _dispatch

        def log_message(self, format: str, *args: Any) -> None:
            log.debug("%s " + format, self.address_string(), *args)

    return _RequestHandler


class TcpTransport:
    """HTTP/1.1 over loopback TCP.

    Connections are served on their own threads but each handler runs under a
    lock, so a destination still processes one request at a time.
    """

    def __init__(self, host: str = "127.0.0.1", timeout: float = 5.0) -> None:
        self.host = host
        self.timeout = timeout
        self._servers: list[tuple[HTTPServer, threading.Thread]] = []
        self._conns: dict[str, http.client.HTTPConnection] = {}
        self._lock = threading.Lock()

    def serve(self, name: str, handler: Handler) -> str:
        server = _QuietServer((self.host, 0), _make_http_handler(handler))
        thread = threading.Thread(target=server.serve_forever, name=f"sba-{name}", daemon=True)
        thread.start()
        self._servers.append((server, thread))
        return f"http://{self.host}:{server.server_address[1]}"

    def send(self, request: HttpishRequest, to: str) -> HttpishResponse:
        parts = urlsplit(to)
        if parts.scheme != "http":
            raise TransportError(f"tcp transport cannot reach {to}")
        payload = encode_body(request.body)
        headers = {"Content-Type": "application/json", "Content-Length": str(len(payload))}
        # one connection per calling thread and destination; one request in flight on each
        key = f"{threading.get_ident()}:{parts.netloc}"
        for attempt in (0, 1):
            with self._lock:
                conn = self._conns.get(key)
                if conn is None:
                    conn = http.client.HTTPConnection(parts.hostname, parts.port, timeout=self.timeout)
                    self._conns[key] = conn
            try:
                conn.request(request.method, request.path, body=payload, headers=headers)
                resp = conn.getresponse()
                raw = resp.read()
                return HttpishResponse(resp.status, decode_body(raw))
            except (OSError, http.client.HTTPException) as exc:
                conn.close()
                with self._lock:
                    self._conns.pop(key, None)
                if attempt or isinstance(exc, ConnectionRefusedError):
                    raise TransportError(f"{to} unreachable: {exc}") from exc
        raise AssertionError("unreachable")

    def close(self) -> None:
        with self._lock:
            for conn in self._conns.values():
                conn.close()
            self._conns.clear()
        for server, thread in self._servers:
            server.shutdown()
            server.server_close()
            thread.join(timeout=2)
        self._servers.clear()


def make_transport(kind: str) -> InProcTransport | TcpTransport:
    if kind == "inproc":
        return InProcTransport()
    if kind == "tcp":
        return TcpTransport()
    raise ValueError(f"unknown transport {kind!r}")


# -- registry ---------------------------------------------------------------


@dataclass(frozen=True)
class NfService:
    service_name: str
    base_uri: str


@dataclass(frozen=True)
class NfProfile:
    nf_instance_id: str
    nf_type: str
    services: tuple[NfService, ...] = ()

    def validate(self) -> None:
        if not self.nf_instance_id:
            raise ValueError("nf_instance_id must be non-empty")
        if self.nf_type not in NF_TYPES:
            raise ValueError(f"unknown nf_type {self.nf_type!r}")
        for svc in self.services:
            if not svc.service_name:
                raise ValueError("service_name must be non-empty")
            if not svc.base_uri:
                raise ValueError(f"service {svc.service_name!r} has no base_uri")

    def to_json(self) -> dict:
        return {
            "nfInstanceId": self.nf_instance_id,
            "nfType": self.nf_type,
            "services": [{"serviceName": s.service_name, "baseUri": s.base_uri} for s in self.services],
        }

    @classmethod
    def from_json(cls, obj: dict) -> NfProfile:
        return cls(
            nf_instance_id=obj["nfInstanceId"],
            nf_type=obj["nfType"],
            services=tuple(NfService(s["serviceName"], s["baseUri"]) for s in obj.get("services", [])),
        )


class NfRegistry:
    """NRF-style registry. Immediately consistent; safe for concurrent use."""

    NFM_PREFIX = "/nnrf-nfm/v1/nf-instances/"
    DISC_ROUTE = "/nnrf-disc/v1/nf-instances"

    def __init__(self) -> None:
        self._profiles: dict[str, NfProfile] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._profiles)

    def register_nf(self, profile: NfProfile) -> bool:
        """Store ``profile``; returns True when it replaced an existing entry."""
        profile.validate()
        with self._lock:
            replaced = profile.nf_instance_id in self._profiles
            self._profiles[profile.nf_instance_id] = profile
        return replaced

    def discover(self, target_nf_type: str, service_name: str) -> list[str]:
        with self._lock:
            profiles = list(self._profiles.values())
        return [
            svc.base_uri
            for p in profiles
            if p.nf_type == target_nf_type
            for svc in p.services
            if svc.service_name == service_name
        ]

    def handle(self, request: HttpishRequest) -> HttpishResponse:
        route = request.route
        if request.method == "PUT" and route.startswith(self.NFM_PREFIX):
            nf_id = route[len(self.NFM_PREFIX):]
            try:
                profile = NfProfile.from_json(request.body or {})
                if profile.nf_instance_id != nf_id:
                    return error(400, "nfInstanceId does not match path")
                replaced = self.register_nf(profile)
            except (KeyError, TypeError, ValueError) as exc:
                return error(400, f"malformed profile: {exc}")
            return HttpishResponse(200 if replaced else 201, profile.to_json())
        if request.method == "GET" and route == self.DISC_ROUTE:
            q = request.query
            if "target-nf-type" not in q or "service-name" not in q:
                return error(400, "target-nf-type and service-name are required")
            return HttpishResponse(200, {"instances": self.discover(q["target-nf-type"], q["service-name"])})
        return error(404, f"no route {request.method} {route}")


@dataclass
class RegistryClient:
    """Talks to an :class:`NfRegistry` through a transport."""

    transport: Transport
    nrf_uri: str
    calls: int = field(default=0, init=False)

    def register_nf(self, profile: NfProfile) -> None:
        self.calls += 1
        resp = self.transport.send(
            HttpishRequest("PUT", NfRegistry.NFM_PREFIX + profile.nf_instance_id, profile.to_json()),
            self.nrf_uri,
        )
        if resp.status not in (200, 201):
            raise ValueError(f"registration of {profile.nf_instance_id} rejected: {resp.body}")

    def discover(self, target_nf_type: str, service_name: str) -> list[str]:
        self.calls += 1
        path = f"{NfRegistry.DISC_ROUTE}?target-nf-type={target_nf_type}&service-name={service_name}"
        resp = self.transport.send(HttpishRequest("GET", path), self.nrf_uri)
        if resp.status != 200:
            raise ValueError(f"discovery failed: {resp.body}")
        return list(resp.body["instances"])
