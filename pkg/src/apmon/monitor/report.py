"""Per-window run reports built from verdicts."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..rulec import fmt
from .cep import DetectionVerdict
from .manager import Detection

FIXED_COLUMNS = ("window_start_s", "window_end_s", "avg_rt_s")


@dataclass
class WindowRow:
    start: float
    end: float
    avg_rt_s: Optional[float] = None
    utilization: Dict[str, float] = field(default_factory=dict)
    throughput_per_s: Optional[float] = None


@dataclass
class RunReport:
    epoch: float
    fired: List[Detection]
    windows: List[WindowRow]
    counters: Dict[str, int]

    def resources(self) -> List[str]:
        return sorted({r for row in self.windows for r in row.utilization})

    def to_csv(self) -> str:
        res = self.resources()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(FIXED_COLUMNS) + [f"utilization_{r}" for r in res] + ["throughput_per_s"])
        for row in self.windows:
            cells = [fmt(row.start), fmt(row.end), _cell(row.avg_rt_s)]
            cells += [_cell(row.utilization.get(r)) for r in res]
            cells.append(_cell(row.throughput_per_s))
            w.writerow(cells)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "fired": [
                {"instance": d.instance_id,
                 "evidence": [{"rule": v.rule_id, "window": [v.window_start, v.window_end],
                               "prev_window": v.prev_window, "observed": v.observed, "threshold": v.threshold}
                              for v in d.evidence]}
                for d in self.fired if d.fired
            ],
            "windows": [
                {"start": r.start, "end": r.end, "avg_rt_s": r.avg_rt_s, "utilization": r.utilization,
                 "throughput_per_s": r.throughput_per_s}
                for r in self.windows
            ],
            "counters": self.counters,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _cell(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def _partition(verdicts: Sequence[DetectionVerdict]) -> List[Tuple[float, float]]:
    plans = sorted({v.plan for v in verdicts})
    bounds = set()
    for init, size, end in plans:
        n = int(round((end - init) / size))
        bounds.update((init + k * size, init + (k + 1) * size) for k in range(n))
    return sorted(bounds)


def _apply(row: WindowRow, values: Dict[str, float]) -> None:
    for k, x in values.items():
        if k == "avg_rt_s":
            row.avg_rt_s = x
        elif k == "throughput_per_s":
            row.throughput_per_s = x
        elif k.startswith("utilization_"):
            row.utilization[k[len("utilization_"):]] = x


def window_table(verdicts: Iterable[DetectionVerdict]) -> List[WindowRow]:
    """One row per window of the union of the verdicts' window plans.

    Values come from the aggregates carried by each verdict; pair verdicts
    also fill the predecessor window.  No verdicts gives no rows.
    """
    verdicts = list(verdicts)
    rows = {b: WindowRow(*b) for b in _partition(verdicts)}
    for v in sorted(verdicts, key=lambda v: (v.rule_id, v.window)):
        init, size, _ = v.plan
        if v.prev_window is not None:
            prev = {k[5:]: x for k, x in v.values if k.startswith("prev.")}
            b = (init + v.prev_window * size, init + (v.prev_window + 1) * size)
            if b in rows:
                _apply(rows[b], prev)
        cur = {k: x for k, x in v.values if not k.startswith("prev.")}
        _apply(rows[(v.window_start, v.window_end)], cur)
    return [rows[b] for b in sorted(rows)]


def build_report(verdicts: Sequence[DetectionVerdict], detections: Sequence[Detection],
                 counters: Dict[str, int], epoch: float = 0.0) -> RunReport:
    return RunReport(epoch, [d for d in detections if d.fired], window_table(verdicts), dict(counters))
