from __future__ import annotations

import http.client
from urllib.parse import urlsplit

import pytest

from nwdaf_testbed import harness
from nwdaf_testbed.sba import (
    HttpishRequest,
    HttpishResponse,
    InProcTransport,
    NfProfile,
    NfRegistry,
    NfService,
    RegistryClient,
    TcpTransport,
    TransportError,
    make_transport,
    split_uri,
)
from nwdaf_testbed.scenario import load_scenario


def echo(req: HttpishRequest) -> HttpishResponse:
    return HttpishResponse(200, {"method": req.method, "route": req.route, "query": req.query, "body": req.body})


def test_request_and_response_validation():
    with pytest.raises(ValueError):
        HttpishRequest("PATCH", "/x")
    with pytest.raises(ValueError):
        HttpishResponse(302)
    req = HttpishRequest("GET", "/a/b?x=1&y=two")
    assert req.route == "/a/b" and req.query == {"x": "1", "y": "two"}
    assert HttpishResponse(204).ok and not HttpishResponse(404).ok


def test_split_uri():
    assert split_uri("inproc://nwdaf-1/nwdaf-notify/v1/amf") == ("inproc://nwdaf-1", "/nwdaf-notify/v1/amf")
    assert split_uri("http://127.0.0.1:8080") == ("http://127.0.0.1:8080", "/")
    with pytest.raises(ValueError):
        split_uri("/relative")


def test_inproc_round_trips_bodies_through_json():
    t = InProcTransport()
    uri = t.serve("echo", echo)
    resp = t.send(HttpishRequest("POST", "/p", {"t": (1, 2)}), uri)
    assert resp.body["body"] == {"t": [1, 2]}
    with pytest.raises(TransportError):
        t.send(HttpishRequest("GET", "/"), "inproc://missing")


@pytest.fixture
def tcp():
    t = TcpTransport()
    yield t
    t.close()


def test_tcp_binding_matches_inproc(tcp):
    inproc = InProcTransport()
    req = HttpishRequest("PUT", "/thing/1?k=v", {"nested": {"a": [1, 2.5, None]}})
    a = inproc.send(req, inproc.serve("echo", echo))
    b = tcp.send(req, tcp.serve("echo", echo))
    assert (a.status, a.body) == (b.status, b.body)


def test_tcp_rejects_malformed_json(tcp):
    uri = tcp.serve("echo", echo)
    host = urlsplit(uri).netloc
    conn = http.client.HTTPConnection(host, timeout=5)
    conn.request("POST", "/x", body=b"{not json", headers={"Content-Type": "application/json"})
    assert conn.getresponse().status == 400
    conn.close()


def test_tcp_unreachable_raises(tcp):
    with pytest.raises(TransportError):
        tcp.send(HttpishRequest("GET", "/"), "http://127.0.0.1:9")


def test_make_transport():
    assert isinstance(make_transport("inproc"), InProcTransport)
    with pytest.raises(ValueError):
        make_transport("carrier-pigeon")


def amf_profile(uri: str = "inproc://amf-1", nf_id: str = "amf-1") -> NfProfile:
    return NfProfile(nf_id, "AMF", (NfService("namf-evts", uri), NfService("namf-comm", uri)))


def test_registry_register_and_discover():
    reg = NfRegistry()
    assert reg.register_nf(amf_profile()) is False
    assert reg.register_nf(amf_profile("inproc://amf-moved")) is True
    assert len(reg) == 1
    assert reg.discover("AMF", "namf-evts") == ["inproc://amf-moved"]
    assert reg.discover("SMF", "namf-evts") == []
    with pytest.raises(ValueError):
        reg.register_nf(NfProfile("x", "UPF"))
    with pytest.raises(ValueError):
        reg.register_nf(NfProfile("", "AMF"))


def test_registry_routes():
    reg = NfRegistry()
    body = amf_profile().to_json()
    assert reg.handle(HttpishRequest("PUT", NfRegistry.NFM_PREFIX + "amf-1", body)).status == 201
    assert reg.handle(HttpishRequest("PUT", NfRegistry.NFM_PREFIX + "amf-1", body)).status == 200
    assert reg.handle(HttpishRequest("PUT", NfRegistry.NFM_PREFIX + "other", body)).status == 400
    assert reg.handle(HttpishRequest("PUT", NfRegistry.NFM_PREFIX + "x", {"nfType": "AMF"})).status == 400
    assert reg.handle(HttpishRequest("GET", NfRegistry.DISC_ROUTE + "?target-nf-type=AMF")).status == 400
    assert reg.handle(HttpishRequest("DELETE", "/nowhere")).status == 404
    found = reg.handle(HttpishRequest("GET", NfRegistry.DISC_ROUTE + "?target-nf-type=AMF&service-name=namf-comm"))
    assert found.body == {"instances": ["inproc://amf-1"]}


def test_profile_json_round_trip():
    p = amf_profile()
    assert NfProfile.from_json(p.to_json()) == p
    assert set(p.to_json()) == {"nfInstanceId", "nfType", "services"}


@pytest.mark.parametrize("kind", ["inproc", "tcp"])
def test_registry_client_over_transport(kind):
    t = make_transport(kind)
    try:
        reg = NfRegistry()
        client = RegistryClient(t, t.serve("nrf", reg.handle))
        client.register_nf(amf_profile())
        assert client.discover("AMF", "namf-evts") == ["inproc://amf-1"]
        assert client.calls == 2
    finally:
        t.close()


def test_tcp_run_produces_identical_log(tmp_path):
    scenario = load_scenario("default", duration_s=3600.0)
    harness.run(scenario, tmp_path / "inproc", evaluate=False)
    harness.run(scenario.with_overrides(transport="tcp"), tmp_path / "tcp", evaluate=False)
    a = (tmp_path / "inproc" / harness.LOG_NAME).read_bytes()
    b = (tmp_path / "tcp" / harness.LOG_NAME).read_bytes()
    assert a and a == b
