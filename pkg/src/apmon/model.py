"""Four-view system model: static, dynamic and deployment views plus thresholds.

The model file is a JSON document with the top-level keys ``components``,
``connectors``, ``scenarios``, ``nodes``, ``networks``, ``deployment`` and
``thresholds``.  Time quantities are written in milliseconds unless the
optional header ``"units": {"time": "s"}`` says otherwise; the loader
normalizes everything to seconds.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

TIME_UNITS = {"ms": 1e-3, "s": 1.0}


class ModelError(Exception):
    """Base error for model loading."""


class ModelParseError(ModelError):
    """The model file is not well-formed."""


class ModelValidationError(ModelError):
    """The model violates a structural invariant."""

    def __init__(self, violations: List[str]):
        self.violations = violations
        super().__init__(violations[0] if violations else "invalid model")


@dataclass(frozen=True)
class Component:
    name: str
    kind: str = "component"
    is_data_store: bool = False


@dataclass(frozen=True)
class Connector:
    source: str
    target: str


@dataclass(frozen=True)
class Message:
    sender: str
    receiver: str
    size_mbit: float = 0.0
    cpu_instructions: int = 0
    disk_accesses: int = 0
    name: str = ""


@dataclass(frozen=True)
class ClosedWorkloadSpec:
    population: int
    think_time: float  # seconds


@dataclass(frozen=True)
class Scenario:
    name: str
    messages: Tuple[Message, ...]
    workload: ClosedWorkloadSpec


@dataclass(frozen=True)
class ProcessingNode:
    name: str
    cpu_time_per_instruction: float  # seconds
    disk_time_per_access: float  # seconds
    per_user: bool = False  # one device per customer: no contention


@dataclass(frozen=True)
class NetworkLink:
    name: str
    endpoints: Tuple[str, str]
    bandwidth_mbit_per_s: float
    is_delay_center: bool = False


@dataclass(frozen=True)
class ThresholdSet:
    """Thresholds binding the antipattern predicates; times in seconds."""

    th_maxConnects: int = 4
    th_maxMsgs: int = 5
    th_maxHwUtil: float = 0.8
    th_maxNetUtil: float = 0.7
    th_initSlot: float = 0.0
    th_sizeSlot: float = 50.0
    th_endSlot: float = 1500.0
    th_OpRtVar: float = 0.3
    th_maxDbMsgs: Optional[int] = None
    th_minHwUtil: float = 0.1
    th_maxParallelism: int = 10000

    def __post_init__(self):
        if self.th_maxDbMsgs is None:
            object.__setattr__(self, "th_maxDbMsgs", self.th_maxMsgs)

    @property
    def n_windows(self) -> int:
        return int(round((self.th_endSlot - self.th_initSlot) / self.th_sizeSlot))


TIME_THRESHOLDS = ("th_initSlot", "th_sizeSlot", "th_endSlot", "th_OpRtVar")


@dataclass(frozen=True)
class SystemModel:
    name: str = "model"
    components: Tuple[Component, ...] = ()
    connectors: Tuple[Connector, ...] = ()
    scenarios: Tuple[Scenario, ...] = ()
    nodes: Tuple[ProcessingNode, ...] = ()
    networks: Tuple[NetworkLink, ...] = ()
    deployment: Dict[str, str] = field(default_factory=dict)
    thresholds: ThresholdSet = field(default_factory=ThresholdSet)
    source_time_unit: str = "s"

    def component(self, name: str) -> Component:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)

    def node(self, name: str) -> ProcessingNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def scenario(self, name: str) -> Scenario:
        for s in self.scenarios:
            if s.name == name:
                return s
        raise KeyError(name)

    def link_between(self, a: str, b: str) -> Optional[NetworkLink]:
        """Network link joining nodes ``a`` and ``b`` (first declared wins)."""
        for link in self.networks:
            if set(link.endpoints) == {a, b}:
                return link
        return None

    def node_of(self, component: str) -> str:
        return self.deployment[component]


@dataclass(frozen=True)
class DerivedMetrics:
    connections: Dict[str, int]
    msgs: Dict[Tuple[str, str], int]
    db_msgs: Dict[Tuple[str, str], int]


def derived_metrics(model: SystemModel) -> DerivedMetrics:
    """Per-component design counts consumed by the antipattern predicates.

    Connectors are counted as undirected incidences.  Message counts are
    keyed by ``(component, scenario)`` and cover every pair, zeros included.
    """
    names = [c.name for c in model.components]
    stores = {c.name for c in model.components if c.is_data_store}
    connections = dict.fromkeys(names, 0)
    for conn in model.connectors:
        for end in (conn.source, conn.target):
            if end in connections:
                connections[end] += 1
    msgs: Dict[Tuple[str, str], int] = {}
    db_msgs: Dict[Tuple[str, str], int] = {}
    for s in model.scenarios:
        sent = Counter(m.sender for m in s.messages)
        to_store = Counter(m.sender for m in s.messages if m.receiver in stores)
        for n in names:
            msgs[(n, s.name)] = sent.get(n, 0)
            db_msgs[(n, s.name)] = to_store.get(n, 0)
    return DerivedMetrics(connections, msgs, db_msgs)


def validate(model: SystemModel) -> List[str]:
    """Return one description per violated invariant; empty when valid."""
    out: List[str] = []
    names = [c.name for c in model.components]
    known = set(names)
    for name, count in Counter(names).items():
        if count > 1:
            out.append(f"component {name}: duplicate name")
    for conn in model.connectors:
        if conn.source == conn.target:
            out.append(f"connector {conn.source}->{conn.target}: self-connector")
        for end in (conn.source, conn.target):
            if end not in known:
                out.append(f"connector {conn.source}->{conn.target}: unknown component {end} (referential integrity)")
    for s in model.scenarios:
        for i, m in enumerate(s.messages):
            for end in (m.sender, m.receiver):
                if end not in known:
                    out.append(f"scenario {s.name} message {i}: unknown component {end} (referential integrity)")
            if m.size_mbit < 0 or m.cpu_instructions < 0 or m.disk_accesses < 0:
                out.append(f"scenario {s.name} message {i}: negative resource figure")
        if s.workload.population < 1:
            out.append(f"scenario {s.name}: workload population must be >= 1")
        if s.workload.think_time < 0:
            out.append(f"scenario {s.name}: think time must be >= 0")
    node_names = [n.name for n in model.nodes]
    for name, count in Counter(node_names).items():
        if count > 1:
            out.append(f"node {name}: duplicate name")
    for n in model.nodes:
        if not (n.cpu_time_per_instruction > 0 and n.disk_time_per_access > 0):
            out.append(f"node {n.name}: rates must be strictly positive")
    for link in model.networks:
        a, b = link.endpoints
        if a == b:
            out.append(f"network {link.name}: endpoints must be distinct")
        for end in (a, b):
            if end not in node_names:
                out.append(f"network {link.name}: unknown node {end}")
        if not link.bandwidth_mbit_per_s > 0:
            out.append(f"network {link.name}: bandwidth must be strictly positive")
    for c in names:
        if c not in model.deployment:
            out.append(f"deployment: component {c} is not deployed (deployment must be total)")
    for c, n in model.deployment.items():
        if c not in known:
            out.append(f"deployment: unknown component {c}")
        if n not in node_names:
            out.append(f"deployment: component {c} mapped to unknown node {n}")
    th = model.thresholds
    if not th.th_sizeSlot > 0:
        out.append("thresholds: th_sizeSlot must be > 0")
    if not th.th_initSlot < th.th_endSlot:
        out.append("thresholds: th_initSlot must be < th_endSlot")
    if th.th_sizeSlot > 0:
        q = (th.th_endSlot - th.th_initSlot) / th.th_sizeSlot
        if abs(q - round(q)) > 1e-9:
            out.append("thresholds: (th_endSlot - th_initSlot) must be divisible by th_sizeSlot")
    for f in ("th_maxHwUtil", "th_maxNetUtil", "th_minHwUtil"):
        if not 0.0 <= getattr(th, f) <= 1.0:
            out.append(f"thresholds: {f} must lie in [0, 1]")
    if not th.th_minHwUtil < th.th_maxHwUtil:
        out.append("thresholds: th_minHwUtil must be < th_maxHwUtil")
    return out


# --- file format -----------------------------------------------------------

def _require(obj: dict, key: str, where: str) -> Any:
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise ModelParseError(f"{where}: missing field '{key}'") from None


def model_from_dict(doc: dict) -> SystemModel:
    """Build an (unvalidated) model from a parsed document."""
    if not isinstance(doc, dict):
        raise ModelParseError("model document must be an object")
    unit = doc.get("units", {}).get("time", "ms")
    if unit not in TIME_UNITS:
        raise ModelParseError(f"units.time: unknown unit '{unit}'")
    k = TIME_UNITS[unit]
    try:
        components = tuple(
            Component(_require(c, "name", "component"), c.get("kind", "component"), bool(c.get("is_data_store", False)))
            for c in doc.get("components", [])
        )
        connectors = tuple(
            Connector(_require(c, "from", "connector"), _require(c, "to", "connector"))
            for c in doc.get("connectors", [])
        )
        scenarios = []
        for s in doc.get("scenarios", []):
            name = _require(s, "name", "scenario")
            wl = _require(s, "workload", f"scenario {name}")
            msgs = tuple(
                Message(
                    sender=_require(m, "sender", f"scenario {name} message"),
                    receiver=_require(m, "receiver", f"scenario {name} message"),
                    size_mbit=float(m.get("size_mbit", 0.0)),
                    cpu_instructions=int(m.get("cpu_instructions", 0)),
                    disk_accesses=int(m.get("disk_accesses", 0)),
                    name=str(m.get("name", "")),
                )
                for m in s.get("messages", [])
            )
            workload = ClosedWorkloadSpec(int(_require(wl, "population", f"scenario {name} workload")),
                                          float(wl.get("think_time", 0.0)) * k)
            scenarios.append(Scenario(name, msgs, workload))
        nodes = tuple(
            ProcessingNode(
                name=_require(n, "name", "node"),
                cpu_time_per_instruction=float(_require(n, f"cpu_time_per_instruction_{unit}", "node")) * k,
                disk_time_per_access=float(_require(n, f"disk_time_per_access_{unit}", "node")) * k,
                per_user=bool(n.get("per_user", False)),
            )
            for n in doc.get("nodes", [])
        )
        networks = []
        for n in doc.get("networks", []):
            ends = _require(n, "endpoints", "network")
            if not isinstance(ends, (list, tuple)) or len(ends) != 2:
                raise ModelParseError(f"network {n.get('name')}: endpoints must be a pair")
            networks.append(NetworkLink(_require(n, "name", "network"), (ends[0], ends[1]),
                                        float(_require(n, "bandwidth_mbit_per_s", "network")),
                                        bool(n.get("is_delay_center", False))))
        deployment = doc.get("deployment", {})
        if not isinstance(deployment, dict):
            raise ModelParseError("deployment must be an object")
        raw_th = dict(doc.get("thresholds", {}))
        unknown = set(raw_th) - set(ThresholdSet.__dataclass_fields__)
        if unknown:
            raise ModelParseError(f"thresholds: unknown field(s) {sorted(unknown)}")
        for f in TIME_THRESHOLDS:
            if f in raw_th:
                raw_th[f] = float(raw_th[f]) * k
        thresholds = ThresholdSet(**raw_th)
    except (TypeError, ValueError, AttributeError) as exc:
        raise ModelParseError(str(exc)) from None
    return SystemModel(
        name=str(doc.get("name", "model")),
        components=components,
        connectors=connectors,
        scenarios=tuple(scenarios),
        nodes=nodes,
        networks=tuple(networks),
        deployment=dict(deployment),
        thresholds=thresholds,
        source_time_unit=unit,
    )


def model_to_dict(model: SystemModel) -> dict:
    """Canonical form: times in seconds, explicit unit header."""
    th = asdict(model.thresholds)
    return {
        "name": model.name,
        "units": {"time": "s"},
        "components": [{"name": c.name, "kind": c.kind, "is_data_store": c.is_data_store} for c in model.components],
        "connectors": [{"from": c.source, "to": c.target} for c in model.connectors],
        "scenarios": [
            {
                "name": s.name,
                "workload": {"population": s.workload.population, "think_time": s.workload.think_time},
                "messages": [
                    {"name": m.name, "sender": m.sender, "receiver": m.receiver, "size_mbit": m.size_mbit,
                     "cpu_instructions": m.cpu_instructions, "disk_accesses": m.disk_accesses}
                    for m in s.messages
                ],
            }
            for s in model.scenarios
        ],
        "nodes": [
            {"name": n.name, "cpu_time_per_instruction_s": n.cpu_time_per_instruction,
             "disk_time_per_access_s": n.disk_time_per_access, "per_user": n.per_user}
            for n in model.nodes
        ],
        "networks": [
            {"name": l.name, "endpoints": list(l.endpoints), "bandwidth_mbit_per_s": l.bandwidth_mbit_per_s,
             "is_delay_center": l.is_delay_center}
            for l in model.networks
        ],
        "deployment": dict(model.deployment),
        "thresholds": th,
    }


def loads_model(text: str) -> SystemModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    model = model_from_dict(doc)
    problems = validate(model)
    if problems:
        raise ModelValidationError(problems)
    return model


def load_model(path) -> SystemModel:
    """Read, parse and validate a model file."""
    return loads_model(Path(path).read_text(encoding="utf-8"))


def dumps_model(model: SystemModel) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def save_model(model: SystemModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def structure_signature(model: SystemModel) -> SystemModel:
    """The model with every rate field blanked; equal signatures mean equal
    static, dynamic and deployment views."""
    return replace(
        model,
        nodes=tuple(replace(n, cpu_time_per_instruction=0.0, disk_time_per_access=0.0) for n in model.nodes),
        networks=tuple(replace(l, bandwidth_mbit_per_s=0.0) for l in model.networks),
    )
