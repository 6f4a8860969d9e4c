"""Turn an event log into labelled next-cell rows."""

from __future__ import annotations

import csv
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from ..domain import AmfEventKind, NetworkEvent, Position, time_category_of

log = logging.getLogger(__name__)

CSV_HEADER = ("supi", "prev_cell_1", "prev_cell_2", "time_category", "cell_x", "cell_y", "visit_frequency", "label")


@dataclass(frozen=True)
class FeatureRow:
    supi: str
    prev_cell_1: str
    prev_cell_2: str
    time_category: str
    cell_x: float
    cell_y: float
    visit_frequency: float
    label: str
    # not exported: when the features were last updated and when the label event happened
    feature_time_s: float = field(default=0.0, compare=False)
    label_time_s: float = field(default=0.0, compare=False)

    def csv_values(self) -> tuple:
        return (self.supi, self.prev_cell_1, self.prev_cell_2, self.time_category,
                self.cell_x, self.cell_y, self.visit_frequency, self.label)


@dataclass
class _UeHistory:
    visits: list = field(default_factory=list)  # consecutive duplicates collapsed
    entries: Counter = field(default_factory=Counter)  # (cell, category) -> entry count
    entries_per_category: Counter = field(default_factory=Counter)
    entered_at: float = 0.0
    entered_category: str = ""


def build_dataset(events: Sequence[NetworkEvent], cells: Mapping[str, Position]) -> list[FeatureRow]:
    """One row per handover whose UE has already visited two distinct cells.

    Features only use events that precede the handover: the two most recent
    distinct cells, the time category at which the current cell was entered,
    the current cell's coordinates and how often the UE entered that cell
    within the same time category. The label is the handover target.
    """
    history: dict[str, _UeHistory] = defaultdict(_UeHistory)
    rows = []
    dropped = 0
    for e in events:
        if e.kind is AmfEventKind.LOCATION_REPORT:
            h = history[e.supi]
            cell = e.payload.cell.id
            cat = time_category_of(e.timestamp).value
            if not h.visits or h.visits[-1] != cell:
                h.visits.append(cell)
            h.entries[(cell, cat)] += 1
            h.entries_per_category[cat] += 1
            h.entered_at = e.timestamp.offset_s
            h.entered_category = cat
        elif e.kind is AmfEventKind.HANDOVER:
            h = history.get(e.supi)
            if h is None or len(h.visits) < 2:
                continue
            current, previous = h.visits[-1], h.visits[-2]
            t = e.timestamp.offset_s
            if current != e.payload.source.id or not h.entered_at < t:
                dropped += 1
                continue
            cat = h.entered_category
            pos = cells[current]
            rows.append(FeatureRow(
                supi=e.supi,
                prev_cell_1=current,
                prev_cell_2=previous,
                time_category=cat,
                cell_x=float(pos.x),
                cell_y=float(pos.y),
                visit_frequency=h.entries[(current, cat)] / h.entries_per_category[cat],
                label=e.payload.target.id,
                feature_time_s=h.entered_at,
                label_time_s=t,
            ))
    if dropped:
        log.info("dropped %d handovers whose history was incomplete", dropped)
    return rows


def write_dataset_csv(rows: Sequence[FeatureRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.csv_values())
    return path


def read_dataset_csv(path: str | Path) -> list[FeatureRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [
            FeatureRow(r[0], r[1], r[2], r[3], float(r[4]), float(r[5]), float(r[6]), r[7])
            for r in reader if r
        ]
