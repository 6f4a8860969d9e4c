"""Mobility and session analytics over collected events.

All functions take events in arrival order. Open intervals (a UE still
registered at the end of the log) run until ``end``, which defaults to the last
event timestamp.
"""

from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Optional, Sequence

from .domain import AmfEventKind, NetworkEvent, RmState, Supi, canonical_json


@dataclass(frozen=True)
class Interval:
    start: float
    end: float
    closed: bool


def _end_of(events: Sequence[NetworkEvent], end: Optional[float]) -> float:
    if end is not None:
        return end
    return max((e.timestamp.offset_s for e in events), default=0.0)


def registered_intervals(events: Sequence[NetworkEvent], end: Optional[float] = None) -> dict[Supi, list[Interval]]:
    """REGISTERED spans per UE, one per attach cycle."""
    end = _end_of(events, end)
    opened: dict[Supi, float] = {}
    spans: dict[Supi, list[Interval]] = defaultdict(list)
    for e in events:
        if e.kind is not AmfEventKind.REGISTRATION_STATE:
            continue
        t = e.timestamp.offset_s
        if e.payload.state is RmState.REGISTERED:
            opened.setdefault(e.supi, t)
        elif e.supi in opened:
            spans[e.supi].append(Interval(opened.pop(e.supi), t, True))
    for supi, t in opened.items():
        spans[supi].append(Interval(t, max(t, end), False))
    return dict(spans)


def active_ue_series(
    events: Sequence[NetworkEvent], bucket_s: float = 3600.0, end: Optional[float] = None
) -> dict[int, int]:
    """Distinct UEs whose registered span overlaps each bucket, keyed by bucket index."""
    end = _end_of(events, end)
    n_buckets = max(1, math.ceil(end / bucket_s)) if end > 0 or events else 0
    series = {b: set() for b in range(n_buckets)}
    for supi, spans in registered_intervals(events, end).items():
        for span in spans:
            first = int(span.start // bucket_s)
            # half-open span; an instantaneous span still occupies its own bucket
            last = first if span.end <= span.start else math.ceil(span.end / bucket_s) - 1
            for b in range(first, min(last, n_buckets - 1) + 1):
                series[b].add(supi)
    return {b: len(s) for b, s in series.items()}


@dataclass(frozen=True)
class StateDurations:
    active_mean_s: Optional[float]
    inactive_mean_s: Optional[float]
    active_count: int
    inactive_count: int

    def to_json(self) -> dict:
        return {
            "active_mean_s": self.active_mean_s,
            "inactive_mean_s": self.inactive_mean_s,
            "active_count": self.active_count,
            "inactive_count": self.inactive_count,
        }


def state_duration_stats(events: Sequence[NetworkEvent], end: Optional[float] = None) -> dict[Supi, StateDurations]:
    """Mean registered and deregistered durations per UE.

    Only completed registered spans count, unless a UE never deregistered, in
    which case its single open span is used. Inactive spans are the gaps
    between consecutive attach cycles.
    """
    out = {}
    for supi, spans in sorted(registered_intervals(events, end).items()):
        closed = [s for s in spans if s.closed]
        active = closed or spans
        gaps = [b.start - a.end for a, b in zip(spans, spans[1:])]
        out[supi] = StateDurations(
            active_mean_s=fmean(s.end - s.start for s in active) if active else None,
            inactive_mean_s=fmean(gaps) if gaps else None,
            active_count=len(active),
            inactive_count=len(gaps),
        )
    return out


def handover_matrix(events: Sequence[NetworkEvent]) -> tuple[dict[tuple[str, str], int], dict[int, int]]:
    """Counts per ordered (source, target) cell pair, and per wall-clock hour of day."""
    matrix: Counter = Counter()
    hourly = {h: 0 for h in range(24)}
    for e in events:
        if e.kind is AmfEventKind.HANDOVER:
            matrix[(e.payload.source.id, e.payload.target.id)] += 1
            hourly[e.timestamp.wall.hour] += 1
    return dict(sorted(matrix.items())), hourly


def dwell_per_cell(events: Sequence[NetworkEvent]) -> dict[str, float]:
    """Mean residence time per cell, from entry (registration or handover-in) to exit."""
    current: dict[Supi, tuple[str, float]] = {}
    samples: dict[str, list[float]] = defaultdict(list)
    for e in events:
        t = e.timestamp.offset_s
        if e.kind is AmfEventKind.LOCATION_REPORT:
            current[e.supi] = (e.payload.cell.id, t)
        elif e.kind is AmfEventKind.HANDOVER or (
            e.kind is AmfEventKind.REGISTRATION_STATE and e.payload.state is RmState.DEREGISTERED
        ):
            entered = current.pop(e.supi, None)
            if entered is not None:
                samples[entered[0]].append(t - entered[1])
    return {cell: fmean(v) for cell, v in sorted(samples.items())}


@dataclass
class AnalyticsReport:
    active_ue_series: dict[int, int]
    state_durations: dict[Supi, StateDurations]
    handover_matrix: dict[tuple[str, str], int]
    dwell_per_cell: dict[str, float]
    hourly_handovers: dict[int, int]
    bucket_s: float = 3600.0
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "bucket_s": self.bucket_s,
            "active_ue_series": {str(k): v for k, v in self.active_ue_series.items()},
            "state_durations": {k: v.to_json() for k, v in self.state_durations.items()},
            "handover_matrix": [
                {"source": s, "target": t, "count": c} for (s, t), c in self.handover_matrix.items()
            ],
            "dwell_per_cell": self.dwell_per_cell,
            "hourly_handovers": {str(k): v for k, v in self.hourly_handovers.items()},
            **self.meta,
        }


def compute_report(
    events: Sequence[NetworkEvent], bucket_s: float = 3600.0, end: Optional[float] = None
) -> AnalyticsReport:
    matrix, hourly = handover_matrix(events)
    return AnalyticsReport(
        active_ue_series=active_ue_series(events, bucket_s, end),
        state_durations=state_duration_stats(events, end),
        handover_matrix=matrix,
        dwell_per_cell=dwell_per_cell(events),
        hourly_handovers=hourly,
        bucket_s=bucket_s,
    )


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_report(report: AnalyticsReport, out_dir: str | Path) -> dict[str, Path]:
    """Write the report as JSON plus one CSV per figure panel."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    json_path = out / "analytics.json"
    json_path.write_text(canonical_json(report.to_json()) + "\n")
    paths["analytics"] = json_path
    paths["active_ues"] = _write_csv(
        out / "active_ues.csv", ["bucket", "start_offset_s", "active_ues"],
        [(b, b * report.bucket_s, n) for b, n in report.active_ue_series.items()],
    )
    paths["state_durations"] = _write_csv(
        out / "state_durations.csv", ["supi", "active_mean_s", "inactive_mean_s", "active_count", "inactive_count"],
        [(s, d.active_mean_s, "" if d.inactive_mean_s is None else d.inactive_mean_s, d.active_count, d.inactive_count)
         for s, d in report.state_durations.items()],
    )
    paths["dwell_per_cell"] = _write_csv(
        out / "dwell_per_cell.csv", ["cell", "mean_dwell_s"], sorted(report.dwell_per_cell.items())
    )
    paths["handover_matrix"] = _write_csv(
        out / "handover_matrix.csv", ["source", "target", "count"],
        [(s, t, c) for (s, t), c in report.handover_matrix.items()],
    )
    paths["hourly_handovers"] = _write_csv(
        out / "hourly_handovers.csv", ["hour", "handovers"], sorted(report.hourly_handovers.items())
    )
    return paths
