from __future__ import annotations

import json
import math
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nwdaf_testbed.domain import (
    DEFAULT_EPOCH,
    PAYLOAD_TYPES,
    AmfEventKind,
    AreaOfInterest,
    CellId,
    CmState,
    ConnectivityStatePayload,
    HandoverPayload,
    LocationReportPayload,
    NetworkEvent,
    PduSessionPayload,
    PduSessionReleasePayload,
    Position,
    PresencePayload,
    QosChangePayload,
    ReachabilityPayload,
    RegistrationStatePayload,
    RmState,
    SimClock,
    SimInstant,
    SmfEventKind,
    TimeCategory,
    TrafficVolumePayload,
    UpPathChangePayload,
    canonical_json,
    parse_event_kind,
    time_category_of,
    time_category_of_hour,
    validate_event,
)

A, B = CellId("A", 1), CellId("B", 2)

SAMPLE_PAYLOADS = {
    AmfEventKind.REGISTRATION_STATE: RegistrationStatePayload(RmState.REGISTERED),
    AmfEventKind.CONNECTIVITY_STATE: ConnectivityStatePayload(CmState.IDLE),
    AmfEventKind.LOCATION_REPORT: LocationReportPayload(A),
    AmfEventKind.HANDOVER: HandoverPayload(A, B),
    AmfEventKind.PRESENCE_IN_AOI: PresencePayload("zone", True),
    AmfEventKind.REACHABILITY: ReachabilityPayload(False),
    SmfEventKind.PDU_SESSION_ESTABLISHMENT: PduSessionPayload("PDU-000001", "internet"),
    SmfEventKind.PDU_SESSION_RELEASE: PduSessionReleasePayload("PDU-000001", "internet", 10, 20),
    SmfEventKind.TRAFFIC_VOLUME_REPORT: TrafficVolumePayload("PDU-000001", 5, 7),
    SmfEventKind.QOS_CHANGE: QosChangePayload("PDU-000001", 9, 5),
    SmfEventKind.UP_PATH_CHANGE: UpPathChangePayload("PDU-000001", A, B),
}


def test_canonical_json_is_sorted_and_compact():
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
    with pytest.raises(ValueError):
        canonical_json({"x": math.nan})


@pytest.mark.parametrize("hour,expected", [
    (0, TimeCategory.NIGHT), (5.999, TimeCategory.NIGHT), (6, TimeCategory.MORNING),
    (10.99, TimeCategory.MORNING), (11, TimeCategory.LUNCH), (13.5, TimeCategory.LUNCH),
    (14, TimeCategory.AFTERNOON), (18, TimeCategory.EVENING), (21.99, TimeCategory.EVENING),
    (22, TimeCategory.NIGHT), (23.9, TimeCategory.NIGHT),
])
def test_time_category_bands(hour, expected):
    assert time_category_of_hour(hour) is expected


def test_time_category_of_instant_uses_wall_clock():
    assert time_category_of(SimInstant(6 * 3600.0)) is TimeCategory.MORNING
    # one day plus 12:30 lands in lunch
    assert time_category_of(SimInstant(86_400 + 12.5 * 3600)) is TimeCategory.LUNCH
    shifted = datetime(2025, 1, 6, 20, 0, tzinfo=timezone.utc)
    assert time_category_of(SimInstant(3 * 3600.0, shifted)) is TimeCategory.NIGHT
    assert time_category_of(datetime(2025, 1, 1, 18, tzinfo=timezone.utc)) is TimeCategory.EVENING


def test_sim_instant_json_form():
    obj = SimInstant(90.0).to_json()
    assert obj == {"offset_s": 90.0, "utc": "2025-01-06T00:01:30Z"}
    assert SimInstant.from_json(obj) == SimInstant(90.0)


@given(
    offset=st.floats(0, 1e8, allow_nan=False),
    epoch_s=st.integers(0, 2_000_000_000),
)
def test_sim_instant_round_trip(offset, epoch_s):
    epoch = datetime.fromtimestamp(epoch_s, tz=timezone.utc)
    inst = SimInstant(offset, epoch)
    back = SimInstant.from_json(json.loads(json.dumps(inst.to_json())))
    assert back == inst


def test_sim_instant_rejects_negative_and_nan():
    for bad in (-1.0, math.nan, math.inf):
        with pytest.raises(ValueError):
            SimInstant(bad)


def test_sim_instant_ordering():
    assert SimInstant(1.0) < SimInstant(2.0)
    assert SimInstant(2.0) <= SimInstant(2.0)


def test_every_kind_has_a_payload_and_round_trips():
    assert set(PAYLOAD_TYPES) == set(AmfEventKind) | set(SmfEventKind)
    for kind, payload in SAMPLE_PAYLOADS.items():
        event = NetworkEvent(kind, SimInstant(12.25), "imsi-1", payload)
        assert validate_event(event) == []
        assert NetworkEvent.loads(event.dumps()) == event
        assert NetworkEvent.from_json(json.loads(event.dumps())).is_amf == isinstance(kind, AmfEventKind)


cell_ids = st.builds(CellId, st.text("abcxyz-0123", min_size=1, max_size=6), st.integers(0, 2**24))


@given(
    src=cell_ids, dst=cell_ids,
    offset=st.floats(0, 1e7, allow_nan=False),
    supi=st.text(min_size=1, max_size=20),
)
def test_handover_event_round_trip(src, dst, offset, supi):
    event = NetworkEvent(AmfEventKind.HANDOVER, SimInstant(offset), supi, HandoverPayload(src, dst))
    assert NetworkEvent.loads(event.dumps()) == event
    assert ("source equals target" in validate_event(event)) == (src == dst)


def test_validate_event_reports_each_problem():
    t = SimInstant(0.0)
    assert validate_event(NetworkEvent(AmfEventKind.HANDOVER, t, "", HandoverPayload(A, B))) == ["empty supi"]
    assert validate_event(NetworkEvent(AmfEventKind.HANDOVER, t, "u", LocationReportPayload(A))) == [
        "payload/kind mismatch"]
    assert validate_event(NetworkEvent(SmfEventKind.UP_PATH_CHANGE, t, "u", UpPathChangePayload("s", A, A))) == [
        "old_cell equals new_cell"]


def test_payload_missing_field_rejected():
    obj = NetworkEvent(AmfEventKind.HANDOVER, SimInstant(0.0), "u", HandoverPayload(A, B)).to_json()
    del obj["payload"]["target"]
    with pytest.raises(ValueError, match="target"):
        NetworkEvent.from_json(obj)


def test_parse_event_kind():
    assert parse_event_kind("HANDOVER") is AmfEventKind.HANDOVER
    assert parse_event_kind("QOS_CHANGE") is SmfEventKind.QOS_CHANGE
    with pytest.raises(ValueError):
        parse_event_kind("TELEPORT")


def test_position_and_area():
    assert Position(0, 0).distance_to(Position(3, 4)) == 5.0
    with pytest.raises(ValueError):
        Position(math.inf, 0)
    area = AreaOfInterest("z", 0, 0, 10, 10)
    assert area.contains(Position(10, 0)) and not area.contains(Position(10.01, 5))
    with pytest.raises(ValueError):
        AreaOfInterest("bad", 5, 0, 1, 10)


def test_sim_clock():
    clock = SimClock()
    clock.advance(2.5)
    clock.set(4.0)
    assert clock.now() == SimInstant(4.0, DEFAULT_EPOCH)
    with pytest.raises(ValueError):
        clock.set(3.0)
    with pytest.raises(ValueError):
        clock.advance(-1)
    with pytest.raises(ValueError):
        SimClock(DEFAULT_EPOCH + timedelta(microseconds=5))
