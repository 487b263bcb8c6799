"""Windowed complex-event processing of monitor rules.

Each rule owns a :class:`RuleEvaluator`.  Events are assigned to the window
``floor((t - init) / size)``; when an event crosses a window boundary every
earlier window is closed, its aggregates are computed and the rule predicate
is evaluated, giving at most one verdict per window (or window pair for
slope-style predicates).
"""

from __future__ import annotations

import heapq
import logging
import operator
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from ..rulec import AggKind, AggregationSpec, MonitorRule, WindowPlan
from .events import EventRecord

log = logging.getLogger(__name__)

COMPARE = {">": operator.gt, ">=": operator.ge, "<": operator.lt, "<=": operator.le}


@dataclass(frozen=True)
class DetectionVerdict:
    rule_id: str
    instance_id: str
    window: int
    window_start: float
    window_end: float
    prev_window: Optional[int]
    observed: float
    threshold: float
    violated: bool
    fired: bool
    values: Tuple[Tuple[str, float], ...] = ()
    plan: Tuple[float, float, float] = (0.0, 1.0, 1.0)

    def value(self, name: str, default=None):
        for k, v in self.values:
            if k == name:
                return v
        return default


# --- aggregations -----------------------------------------------------------

class _AvgRt:
    def __init__(self, spec: AggregationSpec, plan: WindowPlan):
        self.spec, self.plan = spec, plan
        self.start_type, self.end_type = spec.inputs
        self.pending: Dict[str, deque] = defaultdict(deque)
        self.acc: Dict[int, List[float]] = {}
        self.unmatched_ends = 0

    def on_event(self, e: EventRecord, w: int) -> float:
        if e.event_type == self.start_type:
            self.pending[e.correlation_id].append(e.timestamp)
        elif e.event_type == self.end_type:
            q = self.pending.get(e.correlation_id)
            if not q:
                self.unmatched_ends += 1
                return e.timestamp
            t0 = q.popleft()
            if not q:
                del self.pending[e.correlation_id]
            if 0 <= w < self.plan.n_windows:
                a = self.acc.setdefault(w, [0.0, 0])
                a[0] += e.timestamp - t0
                a[1] += 1
        return e.timestamp

    def value(self, w: int) -> Optional[float]:
        a = self.acc.pop(w, None)
        return None if a is None else a[0] / a[1]

    @property
    def residue(self) -> int:
        return sum(len(q) for q in self.pending.values())


class _Utilization:
    """Union of busy intervals per device, clipped to window bounds.

    Busy events are stamped at the start of the interval; since events are
    processed in timestamp order, a running ``covered`` mark per device turns
    overlapping intervals into their union.
    """

    def __init__(self, spec: AggregationSpec, plan: WindowPlan):
        self.spec, self.plan = spec, plan
        self.covered: Dict[str, float] = {}
        self.busy: Dict[int, Dict[str, float]] = {}

    def on_event(self, e: EventRecord, w: int) -> float:
        duration = float(e.get("duration", 0.0))
        device = str(e.get("device", ""))
        a = max(e.timestamp, self.covered.get(device, -1.0))
        b = e.timestamp + max(duration, 0.0)
        self.covered[device] = max(self.covered.get(device, -1.0), b)
        plan = self.plan
        a, b = max(a, plan.init), min(b, plan.end)
        if b <= a:
            return e.timestamp + duration
        k = plan.index(a)
        while k < plan.n_windows:
            lo, hi = plan.bounds(k)
            if lo >= b:
                break
            part = min(b, hi) - max(a, lo)
            if part > 0:
                d = self.busy.setdefault(k, {})
                d[device] = d.get(device, 0.0) + part
            k += 1
        return e.timestamp + duration

    def value(self, w: int) -> float:
        d = self.busy.pop(w, None)
        if not d:
            return 0.0
        return min(1.0, max(d.values()) / self.plan.size)


class _Throughput:
    def __init__(self, spec: AggregationSpec, plan: WindowPlan):
        self.spec, self.plan = spec, plan
        self.counts: Dict[int, int] = {}

    def on_event(self, e: EventRecord, w: int) -> float:
        if 0 <= w < self.plan.n_windows:
            self.counts[w] = self.counts.get(w, 0) + 1
        return e.timestamp

    def value(self, w: int) -> float:
        return self.counts.pop(w, 0) / self.plan.size


class _Count(_Throughput):
    def value(self, w: int) -> float:
        return float(self.counts.pop(w, 0))


class _Concurrency:
    def __init__(self, spec: AggregationSpec, plan: WindowPlan):
        self.spec, self.plan = spec, plan
        self.start_type, self.end_type = spec.inputs
        self.level = 0
        self.peak: Dict[int, int] = {}

    def on_event(self, e: EventRecord, w: int) -> float:
        inside = 0 <= w < self.plan.n_windows
        if inside and w not in self.peak:
            self.peak[w] = self.level
        if e.event_type == self.start_type:
            self.level += 1
        elif e.event_type == self.end_type:
            self.level = max(0, self.level - 1)
        if inside:
            self.peak[w] = max(self.peak[w], self.level)
        return e.timestamp

    def value(self, w: int) -> float:
        return float(self.peak.pop(w, self.level))


_AGGREGATORS = {
    AggKind.AVG_RT: _AvgRt,
    AggKind.UTILIZATION: _Utilization,
    AggKind.THROUGHPUT: _Throughput,
    AggKind.CONCURRENCY: _Concurrency,
    AggKind.COUNT: _Count,
}


# --- per-rule evaluation ----------------------------------------------------

class RuleEvaluator:
    def __init__(self, rule: MonitorRule):
        self.rule = rule
        self.plan = rule.window
        self.aggs = [_AGGREGATORS[a.kind](a, self.plan) for a in rule.aggregations]
        self.by_type: Dict[str, list] = defaultdict(list)
        for agg in self.aggs:
            for t in agg.spec.inputs:
                if agg not in self.by_type[t]:
                    self.by_type[t].append(agg)
        self.next_window = 0
        self.last_instant: Optional[float] = None
        self.cmp = COMPARE[rule.predicate.comparator]
        self._prev: Optional[Tuple[int, float, dict]] = None
        self._run = 0
        self._total = 0.0

    def feed(self, e: EventRecord) -> List[DetectionVerdict]:
        w = self.plan.index(e.timestamp)
        out = self._advance(w)
        for agg in self.by_type.get(e.event_type, ()):
            reach = agg.on_event(e, w)
            if self.last_instant is None or reach > self.last_instant:
                self.last_instant = reach
        return out

    def flush(self, until: Optional[float] = None) -> List[DetectionVerdict]:
        """Close every window up to the one holding the latest observed instant
        (or ``until``, the run's clock, when that is later)."""
        instants = [t for t in (self.last_instant, until) if t is not None]
        if not instants:
            return []
        last = min(self.plan.index(max(instants)), self.plan.n_windows - 1)
        return self._advance(last + 1)

    def _advance(self, upto: int) -> List[DetectionVerdict]:
        out = []
        upto = min(upto, self.plan.n_windows)
        while self.next_window < upto:
            v = self._close(self.next_window)
            if v is not None:
                out.append(v)
            self.next_window += 1
        return out

    def _verdict(self, w: int, prev: Optional[int], observed: float, threshold: float, violated: bool,
                 fired: bool, values: dict) -> DetectionVerdict:
        lo, hi = self.plan.bounds(w)
        vals = tuple(sorted((k, float(v)) for k, v in values.items() if v is not None))
        return DetectionVerdict(self.rule.id, self.rule.instance_id, w, lo, hi, prev, float(observed),
                                float(threshold), bool(violated), bool(fired), vals,
                                (self.plan.init, self.plan.size, self.plan.end))

    def _close(self, w: int) -> Optional[DetectionVerdict]:
        values = {agg.spec.output: agg.value(w) for agg in self.aggs}
        p = self.rule.predicate
        need = self.rule.consecutive_violations_required
        ops = [values[o] for o in p.operands]
        form = p.form

        if form in ("window", "occurrence", "unbalance"):
            present = [v for v in ops if v is not None]
            if not present:
                return None
            if form == "unbalance":
                observed = max(present)
                violated = any(self.cmp(a, p.threshold) and b <= p.lower_threshold
                               for i, a in enumerate(present) for j, b in enumerate(present) if i != j)
            elif form == "occurrence":
                observed = present[0]
                violated = observed > 0
            else:
                observed = max(present) if p.comparator in (">", ">=") else min(present)
                violated = self.cmp(observed, p.threshold)
            self._run = self._run + 1 if violated else 0
            return self._verdict(w, None, observed, p.threshold, violated, self._run >= need, values)

        x = ops[0]
        if x is None:
            return None  # empty window: skipped in the chain
        prev = self._prev
        self._prev = (w, x, values)
        if prev is None:
            return None
        pw, px, pvalues = prev
        pair_values = dict(values)
        pair_values.update({f"prev.{k}": v for k, v in pvalues.items()})

        if form == "slope":
            d = x - px
            if p.absolute:
                d = abs(d)
            violated = self.cmp(d, p.threshold)
            self._run = self._run + 1 if violated else 0
            return self._verdict(w, pw, d, p.threshold, violated, self._run >= need, pair_values)
        if form == "monotonic":
            violated = x > px
            if violated:
                self._run += 1
                self._total += x - px
            else:
                self._run, self._total = 0, 0.0
            fired = self._run >= need and self.cmp(self._total, p.threshold)
            return self._verdict(w, pw, self._total, p.threshold, violated, fired, pair_values)
        if form == "decline":
            conc = ops[1] if ops[1] is not None else 0.0
            violated = x < px and self.cmp(conc, p.threshold)
            self._run = self._run + 1 if violated else 0
            return self._verdict(w, pw, conc, p.threshold, violated, self._run >= need, pair_values)
        raise ValueError(f"unknown predicate form {form}")

    @property
    def unmatched(self) -> Dict[str, int]:
        starts = sum(a.residue for a in self.aggs if isinstance(a, _AvgRt))
        ends = sum(a.unmatched_ends for a in self.aggs if isinstance(a, _AvgRt))
        return {"unmatched_starts": starts, "unmatched_ends": ends}


class ComplexEventProcessor:
    """Routes events to rule evaluators in timestamp order.

    ``reorder_horizon`` bounds how far back in time a late event may arrive;
    events are held until the newest timestamp seen is ``reorder_horizon``
    ahead of them.  Anything older than that watermark is rejected and counted.
    """

    def __init__(self, reorder_horizon: float = 0.0):
        self.reorder_horizon = float(reorder_horizon)
        self.evaluators: Dict[str, RuleEvaluator] = {}
        self.consumed_event_types: set = set()
        self.rejected = 0
        self.processed = 0
        self._heap: list = []
        self._seq = 0
        self._max_seen: Optional[float] = None

    def add_rule(self, rule: MonitorRule) -> None:
        if rule.id in self.evaluators:
            raise ValueError(f"rule {rule.id} already loaded")
        self.evaluators[rule.id] = RuleEvaluator(rule)

    def remove_rule(self, rule_id: str) -> None:
        self.evaluators.pop(rule_id, None)

    @property
    def subscriptions(self) -> set:
        return {t for ev in self.evaluators.values() for t in ev.rule.subscriptions}

    def process(self, e: EventRecord) -> List[DetectionVerdict]:
        if self._max_seen is not None and e.timestamp < self._max_seen - self.reorder_horizon:
            self.rejected += 1
            log.warning("rejected %s at t=%r: older than the reordering horizon", e.event_type, e.timestamp)
            return []
        self._max_seen = e.timestamp if self._max_seen is None else max(self._max_seen, e.timestamp)
        heapq.heappush(self._heap, (e.timestamp, self._seq, e))
        self._seq += 1
        out: List[DetectionVerdict] = []
        limit = self._max_seen - self.reorder_horizon
        while self._heap and self._heap[0][0] <= limit:
            out.extend(self._dispatch(heapq.heappop(self._heap)[2]))
        return out

    def _dispatch(self, e: EventRecord) -> List[DetectionVerdict]:
        out = []
        self.processed += 1
        for ev in self.evaluators.values():
            if e.event_type in ev.by_type:
                self.consumed_event_types.add(e.event_type)
                out.extend(ev.feed(e))
        return out

    def flush(self) -> List[DetectionVerdict]:
        out: List[DetectionVerdict] = []
        while self._heap:
            out.extend(self._dispatch(heapq.heappop(self._heap)[2]))
        # every rule is closed up to the latest instant any rule observed
        clock = max((ev.last_instant for ev in self.evaluators.values() if ev.last_instant is not None),
                    default=None)
        for ev in self.evaluators.values():
            out.extend(ev.flush(clock))
        return out

    def counters(self) -> Dict[str, int]:
        c = {"rejected": self.rejected, "unmatched_starts": 0, "unmatched_ends": 0}
        for ev in self.evaluators.values():
            for k, v in ev.unmatched.items():
                c[k] += v
        return c
