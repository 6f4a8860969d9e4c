"""Wire registry, AMF, SMF, NWDAF, RAN and mobility together and run the clock."""

from __future__ import annotations

import json
import logging
import resource
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Any, Optional, Sequence

from .analytics import compute_report, write_report
from .corenf import Amf, Smf
from .domain import CellId, CmState, Position, SimClock, canonical_json
from .mobility import TRAFFIC_STREAM, UeAgent, ue_rng
from .nwdaf import Nwdaf, read_log
from .predictor import SplitSpec, build_dataset, train_eval as _train_eval, write_dataset_csv
from .predictor.encoding import MIN_ROWS
from .ran import CellSite, Handover, RadioLoss, best_cell, handover_decision
from .sba import NfProfile, NfRegistry, NfService, RegistryClient, make_transport
from .scenario import Scenario

log = logging.getLogger(__name__)

LOG_NAME = "events.ndjson"
CELLS_NAME = "cells.json"
DATASET_NAME = "dataset.csv"
EVALUATION_NAME = "evaluation.json"
SUMMARY_NAME = "summary.json"
REPORT_DIR = "report"


class DatasetTooSmall(ValueError):
    def __init__(self, n_rows: int) -> None:
        super().__init__(f"dataset has {n_rows} rows; at least {MIN_ROWS} are needed")
        self.n_rows = n_rows


@dataclass
class RunSummary:
    ticks: int
    events_emitted: dict[str, int]
    events_collected: int
    dispatch_total: int
    notification_failures: int
    notifications_rejected: int
    runtime_wall_s: float
    paths: dict[str, str] = field(default_factory=dict)
    metrics: dict[str, Any] = field(default_factory=dict)

    @property
    def emitted_total(self) -> int:
        return sum(self.events_emitted.values())

    def to_json(self) -> dict:
        return {
            "ticks": self.ticks,
            "events_emitted": self.events_emitted,
            "events_emitted_total": self.emitted_total,
            "events_collected": self.events_collected,
            "dispatch_total": self.dispatch_total,
            "notification_failures": self.notification_failures,
            "notifications_rejected": self.notifications_rejected,
            "runtime_wall_s": self.runtime_wall_s,
            "paths": self.paths,
            "metrics": self.metrics,
        }


@dataclass
class _UeRuntime:
    agent: UeAgent
    traffic_rng: Any
    registered: bool = False
    pending_attach: bool = False
    session_id: Optional[str] = None
    next_traffic_at: float = 0.0
    inside: dict = field(default_factory=dict)


def write_cells(gnbs: Sequence[CellSite], path: Path) -> Path:
    cells = [{"id": g.cell.id, "tac": g.cell.tac, "x": g.position.x, "y": g.position.y} for g in gnbs]
    path.write_text(canonical_json({"cells": cells}) + "\n")
    return path


def read_cells(path: str | Path) -> dict[str, Position]:
    data = json.loads(Path(path).read_text())
    return {c["id"]: Position(float(c["x"]), float(c["y"])) for c in data["cells"]}


class Testbed:
    """All network functions of one scenario, bound to one transport."""

    def __init__(self, scenario: Scenario, out_dir: str | Path) -> None:
        self.scenario = scenario
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.out_dir / LOG_NAME
        if self.log_path.exists():
            self.log_path.unlink()
        self.clock = SimClock(scenario.start)
        self.transport = make_transport(scenario.transport)
        self.registry = NfRegistry()
        nrf_uri = self.transport.serve("nrf", self.registry.handle)
        self.registry_client = RegistryClient(self.transport, nrf_uri)

        self.amf = Amf(self.transport, self.clock)
        self.smf = Smf(self.transport, self.clock)
        amf_uri = self.transport.serve(self.amf.nf_instance_id, self.amf.handle)
        smf_uri = self.transport.serve(self.smf.nf_instance_id, self.smf.handle)
        self.registry_client.register_nf(NfProfile(self.amf.nf_instance_id, "AMF", (
            NfService(Amf.SERVICE, amf_uri), NfService(Amf.COMM_SERVICE, amf_uri))))
        self.registry_client.register_nf(NfProfile(self.smf.nf_instance_id, "SMF", (
            NfService(Smf.SERVICE, smf_uri), NfService(Smf.PDU_SERVICE, smf_uri))))
        self.amf.smf_uri = self.registry_client.discover("SMF", Smf.PDU_SERVICE)[0]
        self.smf.amf_uri = self.registry_client.discover("AMF", Amf.COMM_SERVICE)[0]

        self.nwdaf = Nwdaf(self.transport, self.registry_client, self.clock, self.log_path)
        self.sites = list(scenario.gnbs)
        self.ues = [
            _UeRuntime(
                UeAgent(b, scenario.mobility, scenario.weights, scenario.locations, scenario.seed, self.clock.now()),
                ue_rng(scenario.seed, b.supi, TRAFFIC_STREAM),
            )
            for b in sorted(scenario.ues, key=lambda b: b.supi)
        ]
        self._qos = list(scenario.qos_changes)
        self.ticks = 0

    # -- per-UE procedures ------------------------------------------------

    def _try_register(self, ue: _UeRuntime) -> None:
        found = best_cell(ue.agent.position, self.sites, self.scenario.radio)
        if found is None:
            return
        cell = found[0]
        self.amf.register(ue.agent.supi, cell)
        ue.registered, ue.pending_attach = True, False
        ue.session_id, _ = self.smf.establish(ue.agent.supi, self.scenario.traffic.dnn, cell)
        ue.next_traffic_at = self.clock.offset_s + self.scenario.traffic.interval_s
        ue.inside = {a.aoi_id: a.contains(ue.agent.position) for a in self.scenario.areas}

    def _deregister(self, ue: _UeRuntime) -> None:
        self.amf.deregister(ue.agent.supi)
        ue.registered = False
        ue.session_id = None
        ue.inside = {}

    def _radio_update(self, ue: _UeRuntime) -> None:
        supi, pos = ue.agent.supi, ue.agent.position
        ctx = self.amf.contexts[supi]
        if ctx.cm_state is CmState.CONNECTED:
            decision = handover_decision(ctx.serving_cell, pos, self.sites, self.scenario.radio)
            if isinstance(decision, Handover):
                self.amf.handover(supi, decision.target)
            elif isinstance(decision, RadioLoss):
                self.amf.radio_loss(supi)
                return
        else:
            found = best_cell(pos, self.sites, self.scenario.radio)
            if found is None:
                return
            self.amf.radio_restore(supi, found[0])
        for area in self.scenario.areas:
            inside = area.contains(pos)
            if inside != ue.inside.get(area.aoi_id, False):
                ue.inside[area.aoi_id] = inside
                self.amf.report_presence(supi, area.aoi_id, inside)

    def _traffic(self, ue: _UeRuntime) -> None:
        now = self.clock.offset_s
        if ue.session_id is None or now < ue.next_traffic_at:
            return
        tr = self.scenario.traffic
        ue.next_traffic_at += tr.interval_s
        if self.amf.contexts[ue.agent.supi].cm_state is not CmState.CONNECTED:
            return
        up = int(ue.traffic_rng.integers(tr.bytes_up[0], tr.bytes_up[1] + 1))
        down = int(ue.traffic_rng.integers(tr.bytes_down[0], tr.bytes_down[1] + 1))
        self.smf.traffic_tick(ue.session_id, up, down)

    def _apply_qos(self) -> None:
        now = self.clock.offset_s
        while self._qos and self._qos[0].at_s <= now:
            change = self._qos.pop(0)
            ue = next(u for u in self.ues if u.agent.supi == change.supi)
            if ue.session_id is not None:
                self.smf.qos_change(ue.session_id, change.five_qi)

    # -- scheduler ----------------------------------------------------------

    def start(self) -> list[str]:
        ids = self.nwdaf.start(self.scenario.nwdaf_config)
        for ue in self.ues:
            self._try_register(ue)
            if not ue.registered:
                ue.pending_attach = True
        return ids

    def tick(self) -> None:
        dt = self.scenario.tick_dt_s
        self.ticks += 1
        self.clock.set(self.ticks * dt)
        now = self.clock.now()
        for ue in self.ues:
            toggle = ue.agent.attach_detach_tick(now)
            if toggle == "detach":
                if ue.registered:
                    self._deregister(ue)
                ue.pending_attach = False
            elif toggle == "attach":
                ue.pending_attach = True
            moved = ue.agent.advance(now, dt)
            if ue.pending_attach:
                self._try_register(ue)
            elif ue.registered and moved:
                self._radio_update(ue)
            if ue.registered:
                self._traffic(ue)
        if self._qos:
            self._apply_qos()
        self.amf.engine.pump()
        self.smf.engine.pump()

    def run_clock(self) -> None:
        accel = self.scenario.acceleration
        wall0 = time.perf_counter()
        for _ in range(self.scenario.n_ticks):
            self.tick()
            if accel != "max":
                lag = self.clock.offset_s / float(accel) - (time.perf_counter() - wall0)
                if lag > 0:
                    time.sleep(lag)

    def finish(self) -> None:
        self.nwdaf.shutdown()
        self.nwdaf.close()
        self.transport.close()


def _metrics(testbed: Testbed) -> dict[str, Any]:
    ms = lambda xs: round(1000 * fmean(xs), 4) if xs else None  # noqa: E731
    usage = resource.getrusage(resource.RUSAGE_SELF)
    return {
        "subscription_ack_ms_mean": ms(testbed.nwdaf.ack_latency_s),
        "notification_roundtrip_ms_mean": ms(testbed.amf.engine.notify_wall_s + testbed.smf.engine.notify_wall_s),
        "notification_handling_ms_mean": ms(testbed.nwdaf.handle_latency_s),
        "process_cpu_s": round(usage.ru_utime + usage.ru_stime, 3),
        "max_rss_mb": round(usage.ru_maxrss / 1024, 1),
        "notification_retries": testbed.amf.engine.retries + testbed.smf.engine.retries,
    }


def run(scenario: Scenario, out_dir: str | Path | None = None, evaluate: bool = True) -> RunSummary:
    """Simulate ``scenario`` and write the log, analytics, dataset and evaluation."""
    out = Path(out_dir or scenario.output_dir or "out")
    wall0 = time.perf_counter()
    testbed = Testbed(scenario, out)
    try:
        testbed.start()
        testbed.run_clock()
    finally:
        testbed.finish()
    runtime = time.perf_counter() - wall0

    emitted = Counter(e.kind.value for e in testbed.amf.engine.events + testbed.smf.engine.events)
    paths = {"log": str(testbed.log_path), "cells": str(write_cells(scenario.gnbs, out / CELLS_NAME))}
    events = testbed.nwdaf.events()
    report_paths = write_report(compute_report(events), out / REPORT_DIR)
    paths.update({f"report_{k}": str(v) for k, v in report_paths.items()})

    rows = build_dataset(events, {g.cell.id: g.position for g in scenario.gnbs})
    paths["dataset"] = str(write_dataset_csv(rows, out / DATASET_NAME))
    if evaluate:
        if len(rows) >= MIN_ROWS:
            result = _train_eval(rows, scenario.models, SplitSpec(seed=scenario.seed))
            (out / EVALUATION_NAME).write_text(canonical_json(result.to_json()) + "\n")
            paths["evaluation"] = str(out / EVALUATION_NAME)
        else:
            log.warning("only %d dataset rows; skipping model evaluation", len(rows))

    summary = RunSummary(
        ticks=testbed.ticks,
        events_emitted=dict(sorted(emitted.items())),
        events_collected=len(testbed.nwdaf.store),
        dispatch_total=testbed.amf.engine.dispatch_total + testbed.smf.engine.dispatch_total,
        notification_failures=testbed.amf.engine.failures + testbed.smf.engine.failures,
        notifications_rejected=testbed.nwdaf.rejected,
        runtime_wall_s=round(runtime, 3),
        paths=paths,
        metrics=_metrics(testbed),
    )
    (out / SUMMARY_NAME).write_text(json.dumps(summary.to_json(), indent=2, sort_keys=True) + "\n")
    summary.paths["summary"] = str(out / SUMMARY_NAME)
    return summary


@dataclass
class ReportOutcome:
    paths: dict[str, Path]
    n_events: int
    corrupt: int

    @property
    def corrupt_fraction(self) -> float:
        total = self.n_events + self.corrupt
        return self.corrupt / total if total else 0.0


def report(log_path: str | Path, out_dir: str | Path) -> ReportOutcome:
    receipts, corrupt = read_log(log_path)
    events = [r.event for r in receipts]
    return ReportOutcome(write_report(compute_report(events), out_dir), len(events), corrupt)


def train_eval(
    log_path: str | Path,
    kinds: Sequence[str] = ("dt", "knn"),
    split_seed: int = 0,
    cells_path: str | Path | None = None,
    strategy: str = "random",
    include_supi: bool = True,
):
    """Build the dataset from a log and evaluate each requested model kind."""
    log_path = Path(log_path)
    cells = read_cells(cells_path or log_path.parent / CELLS_NAME)
    receipts, _ = read_log(log_path)
    rows = build_dataset([r.event for r in receipts], cells)
    if len(rows) < MIN_ROWS:
        raise DatasetTooSmall(len(rows))
    return _train_eval(rows, kinds, SplitSpec(seed=split_seed, strategy=strategy), include_supi=include_supi)
