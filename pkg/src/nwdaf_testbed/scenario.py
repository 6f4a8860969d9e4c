"""Scenario configuration: YAML schema, validation and bundled defaults."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from .domain import AreaOfInterest, CellId, Position, TimeCategory, parse_utc
from .mobility import ActivityLocation, MobilityProfile, NormalSpec, UeBehavior, UeMode, validate_weights
from .nwdaf import SubscriptionConfig, subscribe_all
from .ran import CellSite, RadioConfig

BUNDLED = ("default", "cyclic")


class ScenarioError(ValueError):
    """Invalid scenario; the message names the offending field and its line."""


@dataclass(frozen=True)
class TrafficConfig:
    interval_s: float = 60.0
    bytes_up: tuple[int, int] = (1_000, 200_000)
    bytes_down: tuple[int, int] = (10_000, 2_000_000)
    dnn: str = "internet"


@dataclass(frozen=True)
class QosChange:
    at_s: float
    supi: str
    five_qi: int


@dataclass(frozen=True)
class Scenario:
    seed: int
    start: datetime
    duration_s: float
    gnbs: tuple[CellSite, ...]
    ues: tuple[UeBehavior, ...]
    locations: tuple[ActivityLocation, ...]
    weights: dict
    mobility: MobilityProfile = MobilityProfile()
    radio: RadioConfig = RadioConfig()
    nwdaf_config: SubscriptionConfig = field(default_factory=subscribe_all)
    tick_dt_s: float = 1.0
    acceleration: Union[float, str] = "max"
    transport: str = "inproc"
    traffic: TrafficConfig = TrafficConfig()
    qos_changes: tuple[QosChange, ...] = ()
    areas: tuple[AreaOfInterest, ...] = ()
    models: tuple[str, ...] = ("dt", "knn")
    output_dir: Optional[str] = None
    name: str = "scenario"

    @property
    def n_ticks(self) -> int:
        return round(self.duration_s / self.tick_dt_s)

    def with_overrides(self, **changes: Any) -> Scenario:
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)


def _line_map(node: yaml.Node, path: str = "", out: Optional[dict] = None) -> dict[str, int]:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            _line_map(value, f"{path}.{key.value}" if path else str(key.value), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_map(item, f"{path}[{i}]", out)
    return out


class _Reader:
    """Typed field access that reports errors as ``path (line N): message``."""

    def __init__(self, lines: dict[str, int], source: str) -> None:
        self.lines = lines
        self.source = source

    def fail(self, path: str, message: str) -> ScenarioError:
        probe = path
        while probe and probe not in self.lines:
            probe = probe.rpartition(".")[0] if "." in probe else ""
        line = self.lines.get(probe)
        where = f"{self.source}:{line}" if line else self.source
        return ScenarioError(f"{where}: {path or '<root>'}: {message}")

    def get(self, obj: dict, key: str, path: str, kind=None, default: Any = ..., required: bool = True):
        full = f"{path}.{key}" if path else key
        if not isinstance(obj, dict):
            raise self.fail(path, "expected a mapping")
        if key not in obj:
            if default is not ...:
                return default
            raise self.fail(full, "missing required field")
        value = obj[key]
        if kind is None:
            return value
        try:
            if kind is float and isinstance(value, bool):
                raise TypeError
            return kind(value)
        except (TypeError, ValueError):
            raise self.fail(full, f"expected {kind.__name__}, got {value!r}") from None

    def seq(self, obj: dict, key: str, path: str, required: bool = True) -> list:
        value = self.get(obj, key, path, default=None if not required else ...)
        if value is None:
            return []
        if not isinstance(value, list):
            raise self.fail(f"{path}.{key}" if path else key, "expected a list")
        return value


def _normal(r: _Reader, obj: Any, path: str, default: NormalSpec) -> NormalSpec:
    if obj is None:
        return default
    try:
        return NormalSpec(r.get(obj, "mean_s", path, float), r.get(obj, "std_s", path, float))
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise r.fail(path, str(exc)) from None


def parse_scenario(data: Any, lines: Optional[dict[str, int]] = None, source: str = "<scenario>") -> Scenario:
    r = _Reader(lines or {}, source)
    if not isinstance(data, dict):
        raise r.fail("", "scenario must be a mapping")

    try:
        start = parse_utc(str(r.get(data, "start_datetime", "", default="2025-01-06T00:00:00Z")))
    except ValueError:
        raise r.fail("start_datetime", "not an ISO-8601 timestamp") from None
    if start.microsecond:
        raise r.fail("start_datetime", "must be whole seconds")

    duration = r.get(data, "duration_s", "", float)
    tick = r.get(data, "tick_dt_s", "", float, default=1.0)
    if duration <= 0 or tick <= 0:
        raise r.fail("duration_s", "duration and tick must be positive")
    if abs(duration / tick - round(duration / tick)) > 1e-9:
        raise r.fail("tick_dt_s", "duration must be a whole number of ticks")
    accel = r.get(data, "acceleration", "", default="max")
    if accel != "max":
        try:
            accel = float(accel)
            if accel <= 0:
                raise ValueError
        except (TypeError, ValueError):
            raise r.fail("acceleration", "expected 'max' or a positive number") from None
    transport = str(r.get(data, "transport", "", default="inproc"))
    if transport not in ("inproc", "tcp"):
        raise r.fail("transport", f"unknown transport {transport!r}")

    radio_raw = r.get(data, "radio", "", default={}) or {}
    try:
        radio = RadioConfig(
            r.get(radio_raw, "dbm_per_unit", "radio", float, default=1.0),
            r.get(radio_raw, "hysteresis_db", "radio", float, default=3.0),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise r.fail("radio", str(exc)) from None

    gnbs, seen_ids, seen_tacs = [], set(), set()
    for i, g in enumerate(r.seq(data, "gnbs", "")):
        p = f"gnbs[{i}]"
        cid = str(r.get(g, "id", p))
        tac = r.get(g, "tac", p, int)
        if cid in seen_ids:
            raise r.fail(f"{p}.id", f"duplicate cell id {cid!r}")
        if tac in seen_tacs:
            raise r.fail(f"{p}.tac", f"duplicate TAC {tac}")
        seen_ids.add(cid)
        seen_tacs.add(tac)
        try:
            gnbs.append(CellSite(
                CellId(cid, tac),
                Position(r.get(g, "x", p, float), r.get(g, "y", p, float)),
                r.get(g, "coverage_radius", p, float, default=120.0),
                r.get(g, "threshold_dbm", p, float, default=-120.0),
            ))
        except ScenarioError:
            raise
        except ValueError as exc:
            raise r.fail(p, str(exc)) from None
    if not gnbs:
        raise r.fail("gnbs", "at least one gNB is required")

    locations: dict[str, ActivityLocation] = {}
    for i, raw in enumerate(r.seq(data, "locations", "")):
        p = f"locations[{i}]"
        name = str(r.get(raw, "name", p))
        if name in locations:
            raise r.fail(f"{p}.name", f"duplicate location {name!r}")
        owner = r.get(raw, "owner", p, default=None)
        try:
            locations[name] = ActivityLocation(
                name=name,
                position=Position(r.get(raw, "x", p, float), r.get(raw, "y", p, float)),
                activity_type=str(r.get(raw, "type", p)),
                dwell_mean_s=r.get(raw, "dwell_mean_s", p, float),
                dwell_std_s=r.get(raw, "dwell_std_s", p, float),
                personal_owner=None if owner is None else str(owner),
            )
        except ScenarioError:
            raise
        except ValueError as exc:
            raise r.fail(p, str(exc)) from None
    known_types = {loc.activity_type for loc in locations.values()}

    weights_raw = r.get(data, "weights", "")
    if not isinstance(weights_raw, dict):
        raise r.fail("weights", "expected a mapping of time category to weights")
    weights = {}
    for key, row in weights_raw.items():
        try:
            cat = TimeCategory(key)
        except ValueError:
            raise r.fail(f"weights.{key}", "unknown time category") from None
        if not isinstance(row, dict):
            raise r.fail(f"weights.{key}", "expected activity_type: weight pairs")
        weights[cat] = {str(k): r.get(row, k, f"weights.{key}", float) for k in row}
    try:
        validate_weights(weights, known_types)
    except ValueError as exc:
        raise r.fail("weights", str(exc)) from None

    mob = r.get(data, "mobility", "", default={}) or {}
    modifiers = {}
    for i, m in enumerate(r.seq(mob, "speed_modifiers", "mobility", required=False)):
        p = f"mobility.speed_modifiers[{i}]"
        atype = str(r.get(m, "type", p))
        if atype not in known_types:
            raise r.fail(f"{p}.type", f"unknown activity type {atype!r}")
        try:
            cat = TimeCategory(r.get(m, "category", p))
        except ValueError:
            raise r.fail(f"{p}.category", "unknown time category") from None
        modifiers[(atype, cat)] = r.get(m, "factor", p, float)
    try:
        mobility = MobilityProfile(
            epsilon=r.get(mob, "epsilon", "mobility", float, default=0.3),
            v_min=r.get(mob, "v_min", "mobility", float, default=1.0),
            v_max=r.get(mob, "v_max", "mobility", float, default=2.0),
            speed_modifiers=modifiers,
            dwell_floor_s=r.get(mob, "dwell_floor_s", "mobility", float, default=60.0),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise r.fail("mobility", str(exc)) from None

    def lookup(name: Any, path: str) -> ActivityLocation:
        if str(name) not in locations:
            raise r.fail(path, f"unknown location {name!r}")
        return locations[str(name)]

    ues, supis = [], set()
    for i, u in enumerate(r.seq(data, "ues", "")):
        p = f"ues[{i}]"
        supi = str(r.get(u, "supi", p))
        if not supi:
            raise r.fail(f"{p}.supi", "must be non-empty")
        if supi in supis:
            raise r.fail(f"{p}.supi", f"duplicate supi {supi!r}")
        supis.add(supi)
        try:
            mode = UeMode(str(r.get(u, "mode", p, default="DYNAMIC")).upper())
        except ValueError:
            raise r.fail(f"{p}.mode", "expected ALWAYS_ON or DYNAMIC") from None
        home = lookup(r.get(u, "home", p), f"{p}.home")
        if home.activity_type != "home" or home.personal_owner != supi:
            raise r.fail(f"{p}.home", f"location {home.name!r} is not a home owned by {supi}")
        work = None
        if r.get(u, "work", p, default=None) is not None:
            work = lookup(u["work"], f"{p}.work")
            if work.personal_owner != supi:
                raise r.fail(f"{p}.work", f"location {work.name!r} is not owned by {supi}")
        itinerary = tuple(lookup(n, f"{p}.itinerary[{j}]") for j, n in enumerate(r.seq(u, "itinerary", p, False)))
        ues.append(UeBehavior(
            supi=supi,
            mode=mode,
            home=home,
            work=work,
            on_duration=_normal(r, u.get("on_duration"), f"{p}.on_duration", NormalSpec(6060.0, 300.0)),
            off_duration=_normal(r, u.get("off_duration"), f"{p}.off_duration", NormalSpec(2310.0, 120.0)),
            duration_floor_s=r.get(u, "duration_floor_s", p, float, default=60.0),
            itinerary=itinerary,
        ))
    if not ues:
        raise r.fail("ues", "at least one UE is required")
    for loc in locations.values():
        if loc.personal_owner is not None and loc.personal_owner not in supis:
            raise r.fail("locations", f"{loc.name!r} is owned by unknown UE {loc.personal_owner!r}")

    tr = r.get(data, "traffic", "", default={}) or {}

    def _range(key: str, default: tuple[int, int]) -> tuple[int, int]:
        value = r.get(tr, key, "traffic", default=list(default))
        if not (isinstance(value, list) and len(value) == 2 and 0 <= int(value[0]) <= int(value[1])):
            raise r.fail(f"traffic.{key}", "expected [min, max] with 0 <= min <= max")
        return int(value[0]), int(value[1])

    traffic = TrafficConfig(
        interval_s=r.get(tr, "interval_s", "traffic", float, default=60.0),
        bytes_up=_range("bytes_up", TrafficConfig.bytes_up),
        bytes_down=_range("bytes_down", TrafficConfig.bytes_down),
        dnn=str(r.get(tr, "dnn", "traffic", default="internet")),
    )
    if traffic.interval_s <= 0:
        raise r.fail("traffic.interval_s", "must be positive")

    qos = []
    for i, q in enumerate(r.seq(data, "qos_changes", "", required=False)):
        p = f"qos_changes[{i}]"
        supi = str(r.get(q, "supi", p))
        if supi not in supis:
            raise r.fail(f"{p}.supi", f"unknown UE {supi!r}")
        qos.append(QosChange(r.get(q, "at_s", p, float), supi, r.get(q, "five_qi", p, int)))

    areas = []
    for i, a in enumerate(r.seq(data, "areas_of_interest", "", required=False)):
        p = f"areas_of_interest[{i}]"
        try:
            areas.append(AreaOfInterest(
                str(r.get(a, "id", p)),
                r.get(a, "x_min", p, float), r.get(a, "y_min", p, float),
                r.get(a, "x_max", p, float), r.get(a, "y_max", p, float),
            ))
        except ScenarioError:
            raise
        except ValueError as exc:
            raise r.fail(p, str(exc)) from None

    nwdaf_raw = r.get(data, "nwdaf", "", default=None)
    try:
        if nwdaf_raw is None:
            nwdaf_config = subscribe_all()
        elif isinstance(nwdaf_raw, str):
            base = Path(source).parent if source and not source.startswith("<") else Path(".")
            nwdaf_config = SubscriptionConfig.load(base / nwdaf_raw)
        else:
            nwdaf_config = SubscriptionConfig.from_mapping(nwdaf_raw)
    except (OSError, ValueError) as exc:
        raise r.fail("nwdaf", str(exc)) from None

    models = tuple(str(m) for m in r.seq(data, "models", "", required=False)) or ("dt", "knn")

    return Scenario(
        seed=r.get(data, "seed", "", int, default=42),
        start=start,
        duration_s=duration,
        gnbs=tuple(gnbs),
        ues=tuple(ues),
        locations=tuple(locations.values()),
        weights=weights,
        mobility=mobility,
        radio=radio,
        nwdaf_config=nwdaf_config,
        tick_dt_s=tick,
        acceleration=accel,
        transport=transport,
        traffic=traffic,
        qos_changes=tuple(sorted(qos, key=lambda q: q.at_s)),
        areas=tuple(areas),
        models=models,
        output_dir=r.get(data, "output_dir", "", default=None),
        name=str(r.get(data, "name", "", default=Path(source).stem if source else "scenario")),
    )


def parse_scenario_text(text: str, source: str = "<scenario>") -> Scenario:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{source}: invalid YAML: {exc}") from None
    lines = _line_map(node) if node is not None else {}
    return parse_scenario(data, lines, source)


def load_scenario(path: str | Path, **overrides: Any) -> Scenario:
    """Load a scenario file, or one of the bundled names ("default", "cyclic")."""
    if str(path) in BUNDLED:
        text = resources.files("nwdaf_testbed.data").joinpath(f"{path}.yaml").read_text()
        scenario = parse_scenario_text(text, f"{path}.yaml")
    else:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ScenarioError(f"{path}: cannot read scenario: {exc}") from None
        scenario = parse_scenario_text(text, str(p))
    return scenario.with_overrides(**overrides)
