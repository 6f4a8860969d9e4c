"""Independent recomputations used as test oracles.

These work on raw JSON dictionaries (or plain Python lists) and share no code
with the package, so agreement is evidence rather than tautology.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from fractions import Fraction
from pathlib import Path


def load_raw(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _mean(values: list[float]) -> float:
    return math.fsum(values) / len(values)


def _registered_spans(events: list[dict], end: float) -> dict[str, list[tuple[float, float, bool]]]:
    per_ue = defaultdict(list)
    for e in events:
        if e["kind"] == "REGISTRATION_STATE":
            per_ue[e["supi"]].append((e["timestamp"]["offset_s"], e["payload"]["state"]))
    spans = {}
    for supi, changes in per_ue.items():
        out, start = [], None
        for t, state in changes:
            if state == "REGISTERED" and start is None:
                start = t
            elif state == "DEREGISTERED" and start is not None:
                out.append((start, t, True))
                start = None
        if start is not None:
            out.append((start, max(start, end), False))
        if out:
            spans[supi] = out
    return spans


def brute_force_report(lines: list[dict], bucket_s: float = 3600.0) -> dict:
    """Recompute every analytics field from receipt dictionaries, in report JSON form."""
    events = [line["event"] for line in lines]
    end = max((e["timestamp"]["offset_s"] for e in events), default=0.0)
    spans = _registered_spans(events, end)

    n_buckets = max(1, math.ceil(end / bucket_s)) if events else 0
    active = {}
    for b in range(n_buckets):
        lo, hi = b * bucket_s, (b + 1) * bucket_s
        count = 0
        for ue_spans in spans.values():
            if any((s < hi and e > lo) or (s == e and lo <= s < hi) for s, e, _ in ue_spans):
                count += 1
        active[str(b)] = count

    durations = {}
    for supi in sorted(spans):
        ue_spans = spans[supi]
        closed = [e - s for s, e, c in ue_spans if c]
        lengths = closed or [e - s for s, e, _ in ue_spans]
        gaps = [ue_spans[i + 1][0] - ue_spans[i][1] for i in range(len(ue_spans) - 1)]
        durations[supi] = {
            "active_mean_s": _mean(lengths),
            "inactive_mean_s": _mean(gaps) if gaps else None,
            "active_count": len(lengths),
            "inactive_count": len(gaps),
        }

    pairs = Counter()
    hourly = {str(h): 0 for h in range(24)}
    for e in events:
        if e["kind"] == "HANDOVER":
            pairs[(e["payload"]["source"]["id"], e["payload"]["target"]["id"])] += 1
            hour = int(e["timestamp"]["utc"][11:13])
            hourly[str(hour)] += 1
    matrix = [{"source": s, "target": t, "count": pairs[(s, t)]} for s, t in sorted(pairs)]

    samples = defaultdict(list)
    for supi in {e["supi"] for e in events}:
        inside = None
        for e in events:
            if e["supi"] != supi:
                continue
            t = e["timestamp"]["offset_s"]
            leaving = e["kind"] == "HANDOVER" or (
                e["kind"] == "REGISTRATION_STATE" and e["payload"]["state"] == "DEREGISTERED"
            )
            if e["kind"] == "LOCATION_REPORT":
                inside = (e["payload"]["cell"]["id"], t)
            elif leaving and inside is not None:
                samples[inside[0]].append(t - inside[1])
                inside = None
    dwell = {cell: _mean(v) for cell, v in sorted(samples.items())}

    return {
        "bucket_s": bucket_s,
        "active_ue_series": active,
        "state_durations": durations,
        "handover_matrix": matrix,
        "dwell_per_cell": dwell,
        "hourly_handovers": hourly,
    }


# -- reference decision tree ----------------------------------------------------


def _majority(labels: list[str]) -> str:
    counts = Counter(labels)
    return min(counts, key=lambda lab: (-counts[lab], lab))


def _score(labels_left: list[str], labels_right: list[str]) -> Fraction:
    out = Fraction(0)
    for part in (labels_left, labels_right):
        for c in Counter(part).values():
            out += Fraction(c * c, len(part))
    return out


def reference_tree(X: list[list[float]], y: list[str], max_depth: int | None = None):
    """Exhaustive CART: try every feature and every midpoint, exact Gini arithmetic.

    Returns nested tuples: ("leaf", label) or ("split", feature, threshold, left, right).
    """

    def grow(rows: list[int], depth: int):
        labels = [y[i] for i in rows]
        if len(set(labels)) == 1 or len(rows) < 2 or (max_depth is not None and depth >= max_depth):
            return ("leaf", _majority(labels))
        best = None
        for j in range(len(X[0])):
            values = sorted({X[i][j] for i in rows})
            for a, b in zip(values, values[1:]):
                thr = (a + b) / 2
                if thr >= b:
                    thr = a
                left = [i for i in rows if X[i][j] <= thr]
                right = [i for i in rows if X[i][j] > thr]
                score = _score([y[i] for i in left], [y[i] for i in right])
                if best is None or score > best[0]:
                    best = (score, j, thr, left, right)
        if best is None:
            return ("leaf", _majority(labels))
        _, j, thr, left, right = best
        return ("split", j, thr, grow(left, depth + 1), grow(right, depth + 1))

    return grow(list(range(len(X))), 0)


def reference_predict(tree, x: list[float]) -> str:
    while tree[0] == "split":
        _, j, thr, left, right = tree
        tree = left if x[j] <= thr else right
    return tree[1]
