"""Property meta-model, the library of generic property models, and actualization.

A generic property model leaves its event sets, workload and thresholds as
``$``-prefixed parameters.  Actualization substitutes every parameter with a
concrete value; the pre-calculus supplies the event sets and workload, the
thresholds come from the model's ThresholdSet or from an operator.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple

from .model import SystemModel, ThresholdSet
from .precalc import AntipatternInstance, AntipatternKind


class ActualizationError(ValueError):
    def __init__(self, parameter: str, message: str):
        self.parameter = parameter
        super().__init__(message)


class Mode(str, enum.Enum):
    PRESCRIPTIVE = "PRESCRIPTIVE"
    DESCRIPTIVE = "DESCRIPTIVE"


class Nature(str, enum.Enum):
    QUANTITATIVE = "quantitative"
    QUALITATIVE = "qualitative"


PARAMETER_KINDS = ("real", "integer", "seconds", "probability", "name", "eventset", "eventset_list")
COMPARATORS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class Parameter:
    name: str
    kind: str


@dataclass(frozen=True)
class EventType:
    name: str
    attributes: Tuple[str, ...] = ()


@dataclass(frozen=True)
class EventSet:
    name: str
    event_type: EventType
    filter: Tuple[Tuple[str, str], ...] = ()


Value = Any  # a concrete value or a "$name" placeholder


@dataclass(frozen=True)
class Expr:
    """Event-based expression node.

    Operators: ``diff``, ``avg``, ``sum``, ``count``, ``ratio``.  Leaves are
    ``ts`` (timestamp of an event of a formal set), ``attr`` (an attribute
    of such an event) and ``window`` (length of the observation window).
    """

    op: str
    args: Tuple[Any, ...] = ()

    def formals(self) -> set:
        if self.op in ("ts", "attr"):
            return {self.args[0]}
        out = set()
        for a in self.args:
            if isinstance(a, Expr):
                out |= a.formals()
        return out

    def to_list(self) -> list:
        return [self.op] + [a.to_list() if isinstance(a, Expr) else a for a in self.args]

    @classmethod
    def from_list(cls, doc: list) -> "Expr":
        return cls(doc[0], tuple(cls.from_list(a) if isinstance(a, list) else a for a in doc[1:]))

    def __str__(self) -> str:
        if self.op == "ts":
            return f"ts({self.args[0]})"
        if self.op == "attr":
            return f"{self.args[0]}.{self.args[1]}"
        if self.op == "window":
            return "window"
        if self.op == "diff" and len(self.args) == 2:
            return f"({self.args[0]} - {self.args[1]})"
        return f"{self.op}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class MetricsTemplate:
    name: str
    measure: str
    parameters: Tuple[str, ...]
    expression: Expr

    def __post_init__(self):
        missing = set(self.parameters) - self.expression.formals()
        if missing:
            raise ValueError(f"template {self.name}: formal parameter(s) {sorted(missing)} unused in expression")


@dataclass(frozen=True)
class Metrics:
    name: Value
    template: str
    actuals: Tuple[Tuple[str, Value], ...]
    constraint: Optional[str] = None  # correlation attribute relating the bound sets


@dataclass(frozen=True)
class Workload:
    population: Value
    think_time: Value


@dataclass(frozen=True)
class Interval:
    init: Value
    size: Value
    end: Value


@dataclass(frozen=True)
class Property:
    name: str
    mode: Mode
    nature: Nature
    predicate: str  # window | slope | monotonic | unbalance | decline | occurrence
    comparator: str = ">="
    threshold: Value = None
    lower_threshold: Value = None
    metrics: Tuple[Value, ...] = ()
    workload: Optional[Workload] = None
    interval: Optional[Interval] = None
    pattern: Value = None  # qualitative properties: the event set whose occurrence is checked

    def __post_init__(self):
        if self.nature is Nature.QUANTITATIVE and not self.metrics:
            raise ValueError(f"property {self.name}: quantitative properties need metrics")
        if self.nature is Nature.QUALITATIVE and self.pattern is None:
            raise ValueError(f"property {self.name}: qualitative properties need an event pattern")
        if self.comparator not in COMPARATORS:
            raise ValueError(f"property {self.name}: unknown comparator {self.comparator}")


@dataclass(frozen=True)
class PropertyModel:
    name: str
    kind: str
    parameters: Tuple[Parameter, ...]
    templates: Tuple[MetricsTemplate, ...]
    metrics: Tuple[Metrics, ...]
    properties: Tuple[Property, ...]

    @property
    def is_generic(self) -> bool:
        return bool(self.parameters)

    def parameter_names(self) -> Tuple[str, ...]:
        return tuple(p.name for p in self.parameters)

    def template(self, name: str) -> MetricsTemplate:
        for t in self.templates:
            if t.name == name:
                return t
        raise KeyError(name)

    def metric(self, name: str) -> Metrics:
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)


# --- templates ---------------------------------------------------------------

RT_AVG = MetricsTemplate("RT_AVG", "TIME", ("e1", "e2"),
                         Expr("avg", (Expr("diff", (Expr("ts", ("e2",)), Expr("ts", ("e1",)))),)))
UTIL = MetricsTemplate("UTIL", "RATIO", ("r",),
                       Expr("ratio", (Expr("sum", (Expr("attr", ("r", "duration")),)), Expr("window"))))
THROUGHPUT = MetricsTemplate("THROUGHPUT", "RATE", ("e2",),
                             Expr("ratio", (Expr("count", (Expr("ts", ("e2",)),)), Expr("window"))))
CONCURRENCY = MetricsTemplate("CONCURRENCY", "COUNT", ("e1", "e2"),
                              Expr("diff", (Expr("count", (Expr("ts", ("e1",)),)),
                                            Expr("count", (Expr("ts", ("e2",)),)))))

_WINDOW_PARAMS = (Parameter("$Th_initSlot", "seconds"), Parameter("$Th_sizeSlot", "seconds"),
                  Parameter("$Th_endSlot", "seconds"))
_WINDOW = Interval("$Th_initSlot", "$Th_sizeSlot", "$Th_endSlot")
_WORKLOAD = Workload("$p", "$Th")
_WORKLOAD_PARAMS = (Parameter("$p", "integer"), Parameter("$Th", "seconds"))
P, Q = Mode.PRESCRIPTIVE, Nature.QUANTITATIVE


def _blob() -> PropertyModel:
    return PropertyModel(
        "BlobPropertyModel", AntipatternKind.BLOB.value,
        (Parameter("$hwResources", "eventset_list"), Parameter("$netResources", "eventset_list"),
         Parameter("$Th_maxHwUtil", "probability"), Parameter("$Th_maxNetUtil", "probability")) + _WINDOW_PARAMS,
        (UTIL,),
        (Metrics("BlobHwUtil_Metrics", "UTIL", (("r", "$hwResources"),)),
         Metrics("BlobNetUtil_Metrics", "UTIL", (("r", "$netResources"),))),
        (Property("Blob-HwUtil-Property", P, Q, "window", ">=", "$Th_maxHwUtil",
                  metrics=("BlobHwUtil_Metrics",), interval=_WINDOW),
         Property("Blob-NetUtil-Property", P, Q, "window", ">=", "$Th_maxNetUtil",
                  metrics=("BlobNetUtil_Metrics",), interval=_WINDOW)),
    )


def _cth() -> PropertyModel:
    return PropertyModel(
        "CTHPropertyModel", AntipatternKind.CTH.value,
        (Parameter("$dbResources", "eventset_list"), Parameter("$Th_maxHwUtil", "probability")) + _WINDOW_PARAMS,
        (UTIL,),
        (Metrics("CTHDbUtil_Metrics", "UTIL", (("r", "$dbResources"),)),),
        (Property("CTH-DbUtil-Property", P, Q, "window", ">=", "$Th_maxHwUtil",
                  metrics=("CTHDbUtil_Metrics",), interval=_WINDOW),),
    )


def _rt_metrics() -> Metrics:
    return Metrics("$RT-AVG-OpI", "RT_AVG", (("e1", "$e1"), ("e2", "$e2")), constraint="correlation_id")


def _tj() -> PropertyModel:
    # One property stands for every consecutive slot pair of the interval.
    return PropertyModel(
        "TJPropertyModel", AntipatternKind.TJ.value,
        (Parameter("$RT-AVG-OpI", "name"), Parameter("$e1", "eventset"), Parameter("$e2", "eventset"),
         Parameter("$Th_OpRtVar", "seconds")) + _WORKLOAD_PARAMS + _WINDOW_PARAMS,
        (RT_AVG,),
        (_rt_metrics(),),
        (Property("AVG-RT-k-Property", P, Q, "slope", ">", "$Th_OpRtVar",
                  metrics=("$RT-AVG-OpI",), workload=_WORKLOAD, interval=_WINDOW),),
    )


def _ramp() -> PropertyModel:
    return PropertyModel(
        "RampPropertyModel", AntipatternKind.RAMP.value,
        (Parameter("$RT-AVG-OpI", "name"), Parameter("$e1", "eventset"), Parameter("$e2", "eventset"),
         Parameter("$Th_OpRtVar", "seconds")) + _WORKLOAD_PARAMS + _WINDOW_PARAMS,
        (RT_AVG,),
        (_rt_metrics(),),
        (Property("RT-Ramp-Property", P, Q, "monotonic", ">", "$Th_OpRtVar",
                  metrics=("$RT-AVG-OpI",), workload=_WORKLOAD, interval=_WINDOW),),
    )


def _cps() -> PropertyModel:
    return PropertyModel(
        "CPSPropertyModel", AntipatternKind.CPS.value,
        (Parameter("$nodeResources", "eventset_list"), Parameter("$Th_maxHwUtil", "probability"),
         Parameter("$Th_minHwUtil", "probability")) + _WINDOW_PARAMS,
        (UTIL,),
        (Metrics("CPSNodeUtil_Metrics", "UTIL", (("r", "$nodeResources"),)),),
        (Property("CPS-Unbalance-Property", P, Q, "unbalance", ">=", "$Th_maxHwUtil", "$Th_minHwUtil",
                  metrics=("CPSNodeUtil_Metrics",), interval=_WINDOW),),
    )


def _more_is_less() -> PropertyModel:
    return PropertyModel(
        "MoreIsLessPropertyModel", AntipatternKind.MORE_IS_LESS.value,
        (Parameter("$e1", "eventset"), Parameter("$e2", "eventset"),
         Parameter("$Th_maxParallelism", "integer")) + _WORKLOAD_PARAMS + _WINDOW_PARAMS,
        (THROUGHPUT, CONCURRENCY),
        (Metrics("Throughput_Metrics", "THROUGHPUT", (("e2", "$e2"),)),
         Metrics("Concurrency_Metrics", "CONCURRENCY", (("e1", "$e1"), ("e2", "$e2")), constraint="correlation_id")),
        (Property("MoreIsLess-Property", P, Q, "decline", ">", "$Th_maxParallelism",
                  metrics=("Throughput_Metrics", "Concurrency_Metrics"), workload=_WORKLOAD, interval=_WINDOW),),
    )


def library() -> Dict[AntipatternKind, PropertyModel]:
    """Generic property models for every supported antipattern kind."""
    return {
        AntipatternKind.BLOB: _blob(),
        AntipatternKind.CTH: _cth(),
        AntipatternKind.TJ: _tj(),
        AntipatternKind.CPS: _cps(),
        AntipatternKind.RAMP: _ramp(),
        AntipatternKind.MORE_IS_LESS: _more_is_less(),
    }


# --- actualization -----------------------------------------------------------

def _check(param: Parameter, value: Any) -> Any:
    def bad(expected: str):
        return ActualizationError(param.name, f"parameter {param.name} expects {expected}, got {value!r}")

    k = param.kind
    is_num = isinstance(value, (int, float)) and not isinstance(value, bool)
    if k == "real":
        if not is_num:
            raise bad("a real number")
        return float(value)
    if k == "seconds":
        if not is_num or value < 0:
            raise bad("a nonnegative duration in seconds")
        return float(value)
    if k == "probability":
        if not is_num or not 0 <= value <= 1:
            raise bad("a real number in [0, 1]")
        return float(value)
    if k == "integer":
        if not is_num or float(value) != int(value):
            raise bad("an integer")
        return int(value)
    if k == "name":
        if not isinstance(value, str) or not value or value.startswith("$"):
            raise bad("a name")
        return value
    if k == "eventset":
        if not isinstance(value, EventSet):
            raise bad("an EventSet")
        return value
    if k == "eventset_list":
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, EventSet) for v in value):
            raise bad("a list of EventSets")
        return tuple(value)
    raise bad(f"a value of unknown kind {k}")


def _substitute(obj: Any, values: Mapping[str, Any]) -> Any:
    if isinstance(obj, str):
        return values.get(obj, obj) if obj.startswith("$") else obj
    if isinstance(obj, tuple):
        return tuple(_substitute(o, values) for o in obj)
    if isinstance(obj, Expr):
        return obj
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        changes = {f.name: _substitute(getattr(obj, f.name), values) for f in dataclasses.fields(obj)}
        return dataclasses.replace(obj, **changes)
    return obj


def actualize(generic: PropertyModel, binding: Mapping[str, Any], name: Optional[str] = None) -> PropertyModel:
    """Bind every parameter of ``generic``; extra binding entries are ignored."""
    values = {}
    for p in generic.parameters:
        if p.name not in binding:
            raise ActualizationError(p.name, f"unbound parameter {p.name}")
        values[p.name] = _check(p, binding[p.name])
    actual = _substitute(dataclasses.replace(generic, parameters=()), values)
    return dataclasses.replace(actual, name=name or generic.name)


def threshold_binding(th: ThresholdSet) -> Dict[str, Any]:
    """``$Th_*`` parameter values taken from a ThresholdSet."""
    return {"$Th_" + f.name[3:]: getattr(th, f.name) for f in dataclasses.fields(th)}


def start_set(scenario: str) -> EventSet:
    return EventSet(f"{scenario}_start_Set", EventType(f"{scenario}.start", ("correlation_id",)))


def end_set(scenario: str) -> EventSet:
    return EventSet(f"{scenario}_end_Set", EventType(f"{scenario}.end", ("correlation_id",)))


def busy_set(resource: str) -> EventSet:
    return EventSet(f"{resource}_busy_Set", EventType(f"{resource}.busy", ("device", "duration")))


def actualization_request(instance: AntipatternInstance, model: SystemModel,
                          scenario: Optional[str] = None) -> Dict[str, Any]:
    """Event-set and workload bindings for ``instance``; thresholds stay unbound.

    For scenario-scoped kinds (TJ, Ramp, More is Less) ``scenario`` picks the
    operation to watch; it defaults to the first one the residual names.
    """
    kind = instance.kind
    links = {l.name for l in model.networks}
    if kind in (AntipatternKind.BLOB, AntipatternKind.CTH):
        targets = [i.target for i in instance.residual.indices]
        for t in targets:
            if t not in links and t not in {n.name for n in model.nodes}:
                raise ActualizationError("$resources", f"residual names unknown resource {t}")
        if kind is AntipatternKind.CTH:
            return {"$dbResources": tuple(busy_set(t) for t in targets)}
        return {"$hwResources": tuple(busy_set(t) for t in targets if t not in links),
                "$netResources": tuple(busy_set(t) for t in targets if t in links)}
    if kind is AntipatternKind.CPS:
        nodes = [i.target for i in instance.residual.indices]
        if len(nodes) < 2:
            raise ActualizationError("$nodeResources", "CPS needs at least two processing nodes")
        return {"$nodeResources": tuple(busy_set(n) for n in nodes)}
    named = [i.target for i in instance.residual.indices]
    if scenario is None:
        if not named:
            raise ActualizationError("$e1", f"{kind.value}: the model has no scenario to monitor")
        scenario = named[0]
    try:
        s = model.scenario(scenario)
    except KeyError:
        raise ActualizationError("$e1", f"{kind.value}: scenario {scenario} is not in the model") from None
    out = {"$e1": start_set(s.name), "$e2": end_set(s.name),
           "$p": s.workload.population, "$Th": s.workload.think_time}
    if kind in (AntipatternKind.TJ, AntipatternKind.RAMP):
        out["$RT-AVG-OpI"] = f"RT_{s.name}_Metrics"
    return out


# --- serialization -----------------------------------------------------------

def _value_to_doc(v: Any) -> Any:
    if isinstance(v, EventSet):
        return {"eventset": v.name, "event_type": v.event_type.name,
                "attributes": list(v.event_type.attributes), "filter": dict(v.filter)}
    if isinstance(v, tuple):
        return [_value_to_doc(x) for x in v]
    return v


def _value_from_doc(v: Any) -> Any:
    if isinstance(v, dict) and "eventset" in v:
        return EventSet(v["eventset"], EventType(v["event_type"], tuple(v.get("attributes", ()))),
                        tuple(sorted(v.get("filter", {}).items())))
    if isinstance(v, list):
        return tuple(_value_from_doc(x) for x in v)
    return v


def property_model_to_dict(pm: PropertyModel) -> dict:
    def prop(p: Property) -> dict:
        return {
            "name": p.name, "mode": p.mode.value, "nature": p.nature.value, "predicate": p.predicate,
            "comparator": p.comparator, "threshold": p.threshold, "lower_threshold": p.lower_threshold,
            "metrics": [_value_to_doc(m) for m in p.metrics],
            "workload": None if p.workload is None else
            {"population": p.workload.population, "think_time": p.workload.think_time},
            "interval": None if p.interval is None else
            {"init": p.interval.init, "size": p.interval.size, "end": p.interval.end},
            "pattern": _value_to_doc(p.pattern),
        }

    return {
        "name": pm.name,
        "kind": pm.kind,
        "parameters": [{"name": p.name, "kind": p.kind} for p in pm.parameters],
        "templates": [{"name": t.name, "measure": t.measure, "parameters": list(t.parameters),
                       "expression": t.expression.to_list()} for t in pm.templates],
        "metrics": [{"name": m.name, "template": m.template,
                     "actuals": {k: _value_to_doc(v) for k, v in m.actuals},
                     "constraint": m.constraint} for m in pm.metrics],
        "properties": [prop(p) for p in pm.properties],
    }


def property_model_from_dict(doc: dict) -> PropertyModel:
    def prop(d: dict) -> Property:
        wl, iv = d.get("workload"), d.get("interval")
        return Property(
            d["name"], Mode(d["mode"]), Nature(d["nature"]), d["predicate"], d["comparator"],
            d.get("threshold"), d.get("lower_threshold"), tuple(_value_from_doc(m) for m in d.get("metrics", [])),
            None if wl is None else Workload(wl["population"], wl["think_time"]),
            None if iv is None else Interval(iv["init"], iv["size"], iv["end"]),
            _value_from_doc(d.get("pattern")),
        )

    return PropertyModel(
        doc["name"], doc["kind"],
        tuple(Parameter(p["name"], p["kind"]) for p in doc.get("parameters", [])),
        tuple(MetricsTemplate(t["name"], t["measure"], tuple(t["parameters"]), Expr.from_list(t["expression"]))
              for t in doc.get("templates", [])),
        tuple(Metrics(m["name"], m["template"], tuple((k, _value_from_doc(v)) for k, v in m["actuals"].items()),
                      m.get("constraint")) for m in doc.get("metrics", [])),
        tuple(prop(p) for p in doc.get("properties", [])),
    )


def dumps_property_model(pm: PropertyModel) -> str:
    return json.dumps(property_model_to_dict(pm), indent=2, sort_keys=True) + "\n"


def loads_property_model(text: str) -> PropertyModel:
    return property_model_from_dict(json.loads(text))

