"""Monitoring manager, consumer channels, detection and log replay."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..precalc import AntipatternInstance
from ..rulec import MonitorRule, fmt
from .bus import MonitoringBus, ProbeInstruction
from .cep import ComplexEventProcessor, DetectionVerdict
from .events import EventRecord

log = logging.getLogger(__name__)


class Channel:
    """Verdict channel of one consumer (one antipattern instance)."""

    def __init__(self, instance_id: str):
        self.instance_id = instance_id
        self.closed = False
        self._q: deque = deque()

    def put(self, verdict: DetectionVerdict) -> None:
        if not self.closed:
            self._q.append(verdict)

    def drain(self) -> List[DetectionVerdict]:
        out = []
        while self._q:
            out.append(self._q.popleft())
        return out

    def close(self) -> None:
        self.closed = True

    def __len__(self) -> int:
        return len(self._q)


class Manager:
    """Wires consumers, the CEP and the bus together.

    Registering a consumer loads its rules into the CEP, widens the probe
    instruction to the rules' event types and subscribes the CEP to them.
    In live mode late events are tolerated up to one window length.
    """

    def __init__(self, bus: Optional[MonitoringBus] = None, live: bool = False):
        self.bus = bus or MonitoringBus()
        self.live = live
        self.cep = ComplexEventProcessor(0.0)
        self.channels: Dict[str, Channel] = {}
        self.rules: Dict[str, List[MonitorRule]] = {}
        self.verdicts: List[DetectionVerdict] = []
        self._handles: Dict[str, Tuple[str, int]] = {}

    def register_consumer(self, instance: AntipatternInstance | str, rules: Sequence[MonitorRule]) -> Channel:
        iid = instance if isinstance(instance, str) else instance.id
        if iid in self.channels:
            raise ValueError(f"instance {iid} already registered")
        for r in rules:
            if r.instance_id != iid:
                raise ValueError(f"rule {r.id} belongs to {r.instance_id}, not {iid}")
            self.cep.add_rule(r)
        self.rules[iid] = list(rules)
        ch = self.channels[iid] = Channel(iid)
        self._refresh()
        return ch

    def unregister(self, instance_id: str) -> None:
        for r in self.rules.pop(instance_id, []):
            self.cep.remove_rule(r.id)
        ch = self.channels.pop(instance_id, None)
        if ch is not None:
            ch.close()
        self._refresh()

    @property
    def probe_instruction(self) -> ProbeInstruction:
        return self.bus.instruction

    def _refresh(self) -> None:
        wanted = self.cep.subscriptions
        for t in list(self._handles):
            if t not in wanted:
                self.bus.unsubscribe(self._handles.pop(t))
        for t in sorted(wanted):
            if t not in self._handles:
                self._handles[t] = self.bus.subscribe(t, self._on_event)
        self.bus.instruct(ProbeInstruction(frozenset(wanted)))
        if self.live:
            sizes = [r.window.size for rs in self.rules.values() for r in rs]
            self.cep.reorder_horizon = max(sizes, default=0.0)

    def _on_event(self, e: EventRecord) -> None:
        self._dispatch(self.cep.process(e))

    def _dispatch(self, verdicts: Iterable[DetectionVerdict]) -> None:
        for v in verdicts:
            self.verdicts.append(v)
            ch = self.channels.get(v.instance_id)
            if ch is not None:
                ch.put(v)

    def publish(self, e: EventRecord) -> bool:
        return self.bus.publish(e)

    def flush(self) -> None:
        self._dispatch(self.cep.flush())

    def counters(self) -> Dict[str, int]:
        c = self.cep.counters()
        c["dropped"] = self.bus.dropped
        return c


def replay(events: Iterable[EventRecord], manager: Manager) -> List[DetectionVerdict]:
    """Publish a recorded log in timestamp order (stable for ties) and flush."""
    start = len(manager.verdicts)
    for e in sorted(events, key=lambda e: e.timestamp):
        manager.publish(e)
    manager.flush()
    return manager.verdicts[start:]


@dataclass(frozen=True)
class Detection:
    instance_id: str
    fired: bool
    evidence: Tuple[DetectionVerdict, ...]


def detect(instance: AntipatternInstance | str, verdicts: Iterable[DetectionVerdict]) -> Detection:
    """Decide whether an instance occurred.

    A rule fires on a verdict flagged ``fired``: the required run of
    consecutive violations was reached (one violation for threshold-style
    rules).  Evidence is every violated run that reached firing.
    """
    iid = instance if isinstance(instance, str) else instance.id
    runs: Dict[str, List[DetectionVerdict]] = {}
    evidence: List[DetectionVerdict] = []
    for v in verdicts:
        if v.instance_id != iid:
            continue
        run = runs.setdefault(v.rule_id, [])
        if not v.violated:
            run.clear()
            continue
        run.append(v)
        if v.fired:
            for x in run:
                if x not in evidence:
                    evidence.append(x)
    return Detection(iid, bool(evidence), tuple(evidence))


# --- verdict log ----------------------------------------------------------

VERDICT_HEADER = ("rule_id", "instance_id", "window_start_s", "window_end_s", "prev_window_start_s",
                  "observed", "threshold", "violated", "fired", "plan", "values")


def format_verdict(v: DetectionVerdict) -> str:
    init, size, end = v.plan
    prev = "-" if v.prev_window is None else fmt(init + v.prev_window * size)
    values = ",".join(f"{k}={x!r}" for k, x in v.values)
    return "\t".join([v.rule_id, v.instance_id, fmt(v.window_start), fmt(v.window_end), prev,
                      repr(v.observed), repr(v.threshold), str(v.violated).lower(), str(v.fired).lower(),
                      f"{fmt(init)}:{fmt(size)}:{fmt(end)}", values])


def parse_verdict(line: str) -> DetectionVerdict:
    f = line.rstrip("\n").split("\t")
    if len(f) != len(VERDICT_HEADER):
        raise ValueError(f"verdict line has {len(f)} fields, expected {len(VERDICT_HEADER)}")
    init, size, end = (float(x) for x in f[9].split(":"))
    start = float(f[2])
    w = int(round((start - init) / size))
    prev = None if f[4] == "-" else int(round((float(f[4]) - init) / size))
    values = []
    if f[10]:
        for item in f[10].split(","):
            k, _, x = item.partition("=")
            values.append((k, float(x)))
    return DetectionVerdict(f[0], f[1], w, start, float(f[3]), prev, float(f[5]), float(f[6]),
                            f[7] == "true", f[8] == "true", tuple(values), (init, size, end))


def dumps_verdicts(verdicts: Iterable[DetectionVerdict]) -> str:
    lines = ["#" + "\t".join(VERDICT_HEADER)]
    lines.extend(format_verdict(v) for v in verdicts)
    return "\n".join(lines) + "\n"


def loads_verdicts(text: str) -> List[DetectionVerdict]:
    return [parse_verdict(l) for l in text.splitlines() if l.strip() and not l.startswith("#")]
