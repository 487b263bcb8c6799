"""Translate actual property models into executable monitor rules.

A quantitative property becomes one rule: its metrics expressions are
lowered to window aggregations and its comparator/threshold to a predicate
over the window aggregates.  A qualitative property becomes an event-pattern
occurrence rule.  ``render_rule`` produces the textual listing of a rule:
a fixed skeleton with the expression-derived parts filled in.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

from .pmm import EventSet, Expr, Nature, Property, PropertyModel, dumps_property_model

OPERATORS = frozenset({"diff", "avg", "sum", "count", "ratio"})
LEAVES = frozenset({"ts", "attr", "window"})


class CompileError(ValueError):
    pass


class AggKind(str, enum.Enum):
    AVG_RT = "AVG_RT"
    UTILIZATION = "UTILIZATION"
    THROUGHPUT = "THROUGHPUT"
    CONCURRENCY = "CONCURRENCY"
    COUNT = "COUNT"


@dataclass(frozen=True)
class WindowPlan:
    init: float
    size: float
    end: float

    def __post_init__(self):
        if not self.size > 0 or not self.init < self.end:
            raise ValueError(f"invalid window plan {self.init}/{self.size}/{self.end}")
        q = (self.end - self.init) / self.size
        if abs(q - round(q)) > 1e-9:
            raise ValueError("window plan: (end - init) must be a multiple of size")

    @property
    def n_windows(self) -> int:
        return int(round((self.end - self.init) / self.size))

    def index(self, t: float) -> int:
        """Window index of ``t``; -1 before ``init``, ``n_windows`` at or after ``end``."""
        if t < self.init:
            return -1
        if t >= self.end:
            return self.n_windows
        return min(int((t - self.init) // self.size), self.n_windows - 1)

    def bounds(self, w: int) -> Tuple[float, float]:
        return self.init + w * self.size, self.init + (w + 1) * self.size


@dataclass(frozen=True)
class AggregationSpec:
    kind: AggKind
    inputs: Tuple[str, ...]  # event types; AVG_RT and CONCURRENCY: (start, end)
    key: Optional[str]
    output: str

    def __post_init__(self):
        if self.kind is AggKind.AVG_RT and (len(self.inputs) != 2 or not self.key):
            raise ValueError("AVG_RT needs exactly two event sets and a correlation key")
        if self.kind is AggKind.UTILIZATION and len(self.inputs) != 1:
            raise ValueError("UTILIZATION needs one busy-interval event set")


@dataclass(frozen=True)
class PredicateSpec:
    form: str  # window | slope | monotonic | unbalance | decline | occurrence
    operands: Tuple[str, ...]
    comparator: str
    threshold: float
    lower_threshold: Optional[float] = None
    absolute: bool = False


@dataclass(frozen=True)
class MonitorRule:
    id: str
    source: str
    instance_id: str
    subscriptions: Tuple[str, ...]
    window: WindowPlan
    aggregations: Tuple[AggregationSpec, ...]
    predicate: PredicateSpec
    consecutive_violations_required: int = 1
    workload: Optional[Tuple[int, float]] = None

    def __post_init__(self):
        outputs = {a.output for a in self.aggregations}
        missing = set(self.predicate.operands) - outputs
        if missing:
            raise ValueError(f"rule {self.id}: predicate uses unproduced aggregate(s) {sorted(missing)}")
        uncovered = {i for a in self.aggregations for i in a.inputs} - set(self.subscriptions)
        if uncovered:
            raise ValueError(f"rule {self.id}: event type(s) {sorted(uncovered)} not subscribed")
        if self.consecutive_violations_required < 1:
            raise ValueError(f"rule {self.id}: consecutive_violations_required must be positive")


# --- lowering ---------------------------------------------------------------

def _check_operators(e: Expr) -> None:
    if e.op not in OPERATORS and e.op not in LEAVES:
        raise CompileError(f"unsupported expression operator '{e.op}'")
    for a in e.args:
        if isinstance(a, Expr):
            _check_operators(a)


def _sets(value: Any) -> Tuple[EventSet, ...]:
    if isinstance(value, EventSet):
        return (value,)
    if isinstance(value, tuple) and all(isinstance(v, EventSet) for v in value):
        return value
    raise CompileError(f"metrics parameter is not bound to event sets: {value!r}")


def _is(e: Any, op: str, arity: Optional[int] = None) -> bool:
    return isinstance(e, Expr) and e.op == op and (arity is None or len(e.args) == arity)


def resource_of(event_type: str) -> str:
    return event_type[: -len(".busy")] if event_type.endswith(".busy") else event_type


def _lower(expr: Expr, actuals: dict, key: Optional[str]) -> List[AggregationSpec]:
    _check_operators(expr)
    # avg(ts(end) - ts(start))
    if _is(expr, "avg", 1) and _is(expr.args[0], "diff", 2) \
            and _is(expr.args[0].args[0], "ts") and _is(expr.args[0].args[1], "ts"):
        (end,) = _sets(actuals[expr.args[0].args[0].args[0]])
        (start,) = _sets(actuals[expr.args[0].args[1].args[0]])
        return [AggregationSpec(AggKind.AVG_RT, (start.event_type.name, end.event_type.name),
                                key or "correlation_id", "avg_rt_s")]
    # sum(r.duration) / window
    if _is(expr, "ratio", 2) and _is(expr.args[1], "window") and _is(expr.args[0], "sum", 1) \
            and _is(expr.args[0].args[0], "attr"):
        sets = _sets(actuals[expr.args[0].args[0].args[0]])
        return [AggregationSpec(AggKind.UTILIZATION, (s.event_type.name,), None,
                                f"utilization_{resource_of(s.event_type.name)}") for s in sets]
    # count(ts(e)) / window
    if _is(expr, "ratio", 2) and _is(expr.args[1], "window") and _is(expr.args[0], "count", 1) \
            and _is(expr.args[0].args[0], "ts"):
        (s,) = _sets(actuals[expr.args[0].args[0].args[0]])
        return [AggregationSpec(AggKind.THROUGHPUT, (s.event_type.name,), None, "throughput_per_s")]
    # count(ts(start)) - count(ts(end))
    if _is(expr, "diff", 2) and all(_is(a, "count", 1) and _is(a.args[0], "ts") for a in expr.args):
        (start,) = _sets(actuals[expr.args[0].args[0].args[0]])
        (end,) = _sets(actuals[expr.args[1].args[0].args[0]])
        return [AggregationSpec(AggKind.CONCURRENCY, (start.event_type.name, end.event_type.name),
                                key or "correlation_id", "concurrency")]
    raise CompileError(f"unsupported metrics expression {expr}")


def _placeholders(pm: PropertyModel) -> List[str]:
    return sorted(set(re.findall(r'"(\$[^"]+)"', dumps_property_model(pm))))


def _num(v: Any, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise CompileError(f"{what} must be numeric, got {v!r}")
    return float(v)


def _compile_property(pm: PropertyModel, p: Property, instance_id: str,
                      consecutive: int, absolute_slope: bool) -> Optional[MonitorRule]:
    if p.interval is None:
        raise CompileError(f"property {p.name}: no observation interval")
    window = WindowPlan(_num(p.interval.init, "interval init"), _num(p.interval.size, "interval size"),
                        _num(p.interval.end, "interval end"))
    workload = None
    if p.workload is not None:
        workload = (int(p.workload.population), float(p.workload.think_time))
    rid = f"{pm.name}/{p.name}"
    if p.nature is Nature.QUALITATIVE:
        (pattern,) = _sets(p.pattern)
        agg = AggregationSpec(AggKind.COUNT, (pattern.event_type.name,), None, "occurrences")
        return MonitorRule(rid, p.name, instance_id, agg.inputs, window, (agg,),
                           PredicateSpec("occurrence", ("occurrences",), ">", 0.0), 1, workload)
    aggs: List[AggregationSpec] = []
    for mname in p.metrics:
        try:
            metric = pm.metric(mname)
            template = pm.template(metric.template)
        except KeyError as exc:
            raise CompileError(f"property {p.name}: unknown metrics or template {exc}") from None
        aggs.extend(_lower(template.expression, dict(metric.actuals), metric.constraint))
    if not aggs:
        return None  # property bound to no resources: nothing to monitor
    form = p.predicate
    if form not in ("window", "slope", "monotonic", "unbalance", "decline"):
        raise CompileError(f"property {p.name}: unknown predicate form '{form}'")
    lower = None if p.lower_threshold is None else _num(p.lower_threshold, "lower threshold")
    if form == "unbalance" and lower is None:
        raise CompileError(f"property {p.name}: unbalance needs a lower threshold")
    if form == "decline":
        kinds = [a.kind for a in aggs]
        if kinds != [AggKind.THROUGHPUT, AggKind.CONCURRENCY]:
            raise CompileError(f"property {p.name}: decline needs throughput then concurrency metrics")
    pred = PredicateSpec(form, tuple(a.output for a in aggs), p.comparator, _num(p.threshold, "threshold"),
                         lower, absolute_slope if form == "slope" else False)
    required = consecutive if form in ("slope", "monotonic", "decline") else 1
    subs = tuple(sorted({i for a in aggs for i in a.inputs}))
    return MonitorRule(rid, p.name, instance_id, subs, window, tuple(aggs), pred, required, workload)


def compile(actual: PropertyModel, instance_id: Optional[str] = None, consecutive: int = 2,
            absolute_slope: bool = False) -> List[MonitorRule]:
    """Compile every property of an actual model into monitor rules.

    Raises CompileError on unbound parameters and on expressions outside
    the supported operator set.
    """
    if actual.parameters:
        raise CompileError(f"unbound parameter {actual.parameters[0].name}")
    left = _placeholders(actual)
    if left:
        raise CompileError(f"unbound parameter {left[0]}")
    rules = []
    for p in actual.properties:
        try:
            rule = _compile_property(actual, p, instance_id or actual.name, consecutive, absolute_slope)
        except ValueError as exc:
            if isinstance(exc, CompileError):
                raise
            raise CompileError(str(exc)) from None
        if rule is not None:
            rules.append(rule)
    return rules


# --- listing ----------------------------------------------------------------

def fmt(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


_AGG_TEXT = {
    AggKind.AVG_RT: lambda a: f"avg(ts({a.inputs[1]}) - ts({a.inputs[0]})) matched by {a.key}",
    AggKind.UTILIZATION: lambda a: f"union(busy {a.inputs[0]}) / window",
    AggKind.THROUGHPUT: lambda a: f"count({a.inputs[0]}) / window",
    AggKind.CONCURRENCY: lambda a: f"max in flight count({a.inputs[0]}) - count({a.inputs[1]})",
    AggKind.COUNT: lambda a: f"count({a.inputs[0]})",
}


def _predicate_text(rule: MonitorRule) -> List[str]:
    p = rule.predicate
    th = fmt(p.threshold)
    ops = p.operands
    if p.form == "window":
        return [f"any of {', '.join(o + '[k]' for o in ops)} {p.comparator} {th}"]
    if p.form == "slope":
        d = f"{ops[0]}[k] - {ops[0]}[k-1]"
        return [f"{'|' + d + '|' if p.absolute else d} {p.comparator} {th}",
                "skip windows without completions"]
    if p.form == "monotonic":
        return [f"{ops[0]}[k] > {ops[0]}[k-1] over the run", f"run increase {p.comparator} {th}"]
    if p.form == "unbalance":
        return [f"exists i != j: {{{', '.join(ops)}}}[i] >= {th} and [j] <= {fmt(p.lower_threshold)}"]
    if p.form == "decline":
        return [f"{ops[0]}[k] < {ops[0]}[k-1] and {ops[1]}[k] {p.comparator} {th}"]
    return [f"{ops[0]}[k] > 0"]


def render_rule(rule: MonitorRule) -> str:
    """Deterministic textual listing of a rule."""
    w = rule.window
    lines = [
        f'rule "{rule.id}"',
        f"  instance {rule.instance_id}",
        f"  source   {rule.source}",
        f"  window   init={fmt(w.init)} size={fmt(w.size)} end={fmt(w.end)}",
    ]
    if rule.workload is not None:
        lines.append(f"  workload closed population={rule.workload[0]} think={fmt(rule.workload[1])}")
    lines.append(f"  subscribe {', '.join(rule.subscriptions)}")
    lines.append("when")
    for a in rule.aggregations:
        lines.append(f"  {a.kind.value} {a.output} := {_AGG_TEXT[a.kind](a)}")
    lines.append("then")
    lines.append(f"  {rule.predicate.form}")
    lines.extend(f"    {t}" for t in _predicate_text(rule))
    lines.append(f"  fire after {rule.consecutive_violations_required} consecutive violation(s)")
    lines.append("end")
    return "\n".join(lines) + "\n"


def rule_filename(rule: MonitorRule) -> str:
    return re.sub(r"[^A-Za-z0-9_.@-]+", "_", rule.id) + ".rule"


# --- serialization ----------------------------------------------------------

def rule_to_dict(rule: MonitorRule) -> dict:
    p = rule.predicate
    return {
        "id": rule.id,
        "source": rule.source,
        "instance_id": rule.instance_id,
        "subscriptions": list(rule.subscriptions),
        "window": {"init": rule.window.init, "size": rule.window.size, "end": rule.window.end},
        "aggregations": [{"kind": a.kind.value, "inputs": list(a.inputs), "key": a.key, "output": a.output}
                         for a in rule.aggregations],
        "predicate": {"form": p.form, "operands": list(p.operands), "comparator": p.comparator,
                      "threshold": p.threshold, "lower_threshold": p.lower_threshold, "absolute": p.absolute},
        "consecutive_violations_required": rule.consecutive_violations_required,
        "workload": None if rule.workload is None else list(rule.workload),
    }


def rule_from_dict(d: dict) -> MonitorRule:
    w, p = d["window"], d["predicate"]
    return MonitorRule(
        d["id"], d["source"], d["instance_id"], tuple(d["subscriptions"]),
        WindowPlan(float(w["init"]), float(w["size"]), float(w["end"])),
        tuple(AggregationSpec(AggKind(a["kind"]), tuple(a["inputs"]), a.get("key"), a["output"])
              for a in d["aggregations"]),
        PredicateSpec(p["form"], tuple(p["operands"]), p["comparator"], float(p["threshold"]),
                      p.get("lower_threshold"), bool(p.get("absolute", False))),
        int(d.get("consecutive_violations_required", 1)),
        None if d.get("workload") is None else (int(d["workload"][0]), float(d["workload"][1])),
    )


def dumps_rules(rules: Sequence[MonitorRule]) -> str:
    return json.dumps({"rules": [rule_to_dict(r) for r in rules]}, indent=2, sort_keys=True) + "\n"


def loads_rules(text: str) -> List[MonitorRule]:
    return [rule_from_dict(d) for d in json.loads(text)["rules"]]
