"""Off-line pre-calculus of antipattern instances.

Design-gated antipatterns (Blob, CTH) are checked against the static,
dynamic and deployment views; an instance is produced only when those
sub-predicates hold, and it carries the residual performance predicate
that remains to be verified at runtime.  Performance-view-only antipatterns
(TJ, CPS, The Ramp, More is Less) are always included.

Blob follows the excessive-traffic reading (many connections, many messages
in one interaction, over-utilized device or network).  CTH uses the classic
database variant: many store requests addressed to a remote data store.
Both, and the residuals of the four performance-only kinds, are
reconstructions; see the README.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .model import DerivedMetrics, SystemModel, derived_metrics


class AntipatternKind(str, enum.Enum):
    BLOB = "Blob"
    CTH = "CTH"
    TJ = "TJ"
    CPS = "CPS"
    RAMP = "Ramp"
    MORE_IS_LESS = "MoreIsLess"

    @property
    def performance_only(self) -> bool:
        return self in PERFORMANCE_ONLY


PERFORMANCE_ONLY = frozenset({AntipatternKind.TJ, AntipatternKind.CPS, AntipatternKind.RAMP,
                              AntipatternKind.MORE_IS_LESS})
DESIGN_GATED = (AntipatternKind.BLOB, AntipatternKind.CTH)


class Form(str, enum.Enum):
    """Shape of a residual performance predicate."""

    THRESHOLD = "threshold"  # per-window compare, disjunction over indices
    SLOPE = "slope"  # consecutive-window increase of an average
    MONOTONIC = "monotonic"  # run of strictly increasing windows
    UNBALANCE = "unbalance"  # one node saturated while another idles
    DECLINE = "decline"  # throughput falls while concurrency is high


@dataclass(frozen=True, order=True)
class IndexRef:
    """A performance index on a model element, e.g. ``Utilization(LAN)``."""

    metric: str  # Utilization | RT | Throughput | Concurrency
    target: str

    def __str__(self) -> str:
        return f"{self.metric}({self.target})"

    @classmethod
    def parse(cls, text: str) -> "IndexRef":
        metric, _, rest = text.partition("(")
        if not rest.endswith(")"):
            raise ValueError(f"malformed index reference '{text}'")
        return cls(metric, rest[:-1])


@dataclass(frozen=True)
class ResidualPredicate:
    form: Form
    indices: Tuple[IndexRef, ...]
    comparator: str
    thresholds: Tuple[str, ...]  # ThresholdSet field names

    def __str__(self) -> str:
        idx = " | ".join(str(i) for i in self.indices)
        return f"{self.form.value}[{idx}] {self.comparator} {', '.join(self.thresholds)}"


@dataclass(frozen=True)
class AntipatternInstance:
    kind: AntipatternKind
    bindings: Tuple[Tuple[str, str], ...]
    residual: ResidualPredicate

    @property
    def id(self) -> str:
        if not self.bindings:
            return self.kind.value
        b = dict(self.bindings)
        return f"{self.kind.value}({b['swC']})"

    @property
    def binding(self) -> Dict[str, str]:
        return dict(self.bindings)


# --- design predicates ------------------------------------------------------

def _remote_links(model: SystemModel, c: str, peers: List[str]) -> List[str]:
    here = model.node_of(c)
    links = []
    for p in peers:
        there = model.node_of(p)
        if there == here:
            continue
        link = model.link_between(here, there)
        if link is not None and link.name not in links:
            links.append(link.name)
    return links


def blob_design_predicate(model: SystemModel, c: str,
                          metrics: Optional[DerivedMetrics] = None) -> Optional[AntipatternInstance]:
    """Blob candidate for component ``c`` or None.

    Requires more than ``th_maxConnects`` connections and more than
    ``th_maxMsgs`` messages sent in at least one scenario.  The residual
    watches the links towards remote peers of those scenarios, or the host
    node when every peer is co-deployed.
    """
    th = model.thresholds
    m = metrics or derived_metrics(model)
    if m.connections.get(c, 0) <= th.th_maxConnects:
        return None
    heavy = [s for s in model.scenarios if m.msgs.get((c, s.name), 0) > th.th_maxMsgs]
    if not heavy:
        return None
    peers: List[str] = []
    for s in heavy:
        for msg in s.messages:
            if msg.sender == c and msg.receiver != c and msg.receiver not in peers:
                peers.append(msg.receiver)
    links = _remote_links(model, c, peers)
    if links:
        residual = ResidualPredicate(Form.THRESHOLD, tuple(IndexRef("Utilization", l) for l in links),
                                     ">=", ("th_maxNetUtil",))
    else:
        residual = ResidualPredicate(Form.THRESHOLD, (IndexRef("Utilization", model.node_of(c)),),
                                     ">=", ("th_maxHwUtil",))
    return AntipatternInstance(AntipatternKind.BLOB, (("swC", c), ("scenario", heavy[0].name)), residual)


def cth_design_predicate(model: SystemModel, c: str,
                         metrics: Optional[DerivedMetrics] = None) -> Optional[AntipatternInstance]:
    """CTH candidate: more than ``th_maxDbMsgs`` requests to a remote data store
    within one scenario.  The residual watches the store's host utilization."""
    th = model.thresholds
    m = metrics or derived_metrics(model)
    stores = {x.name for x in model.components if x.is_data_store}
    if not stores:
        return None
    here = model.node_of(c)
    for s in model.scenarios:
        if m.db_msgs.get((c, s.name), 0) <= th.th_maxDbMsgs:
            continue
        remote = []
        for msg in s.messages:
            if msg.sender == c and msg.receiver in stores and model.node_of(msg.receiver) != here:
                if msg.receiver not in remote:
                    remote.append(msg.receiver)
        if remote:
            hosts = []
            for db in remote:
                if model.node_of(db) not in hosts:
                    hosts.append(model.node_of(db))
            residual = ResidualPredicate(Form.THRESHOLD, tuple(IndexRef("Utilization", h) for h in hosts),
                                         ">=", ("th_maxHwUtil",))
            return AntipatternInstance(AntipatternKind.CTH, (("swC", c), ("db", remote[0]), ("scenario", s.name)),
                                       residual)
    return None


def performance_only_instances(model: SystemModel) -> List[AntipatternInstance]:
    scen = [s.name for s in model.scenarios]
    window = ("th_initSlot", "th_sizeSlot", "th_endSlot")
    return [
        AntipatternInstance(AntipatternKind.TJ, (), ResidualPredicate(
            Form.SLOPE, tuple(IndexRef("RT", s) for s in scen), ">", ("th_OpRtVar",) + window)),
        AntipatternInstance(AntipatternKind.CPS, (), ResidualPredicate(
            Form.UNBALANCE, tuple(IndexRef("Utilization", n.name) for n in model.nodes), ">=",
            ("th_maxHwUtil", "th_minHwUtil") + window)),
        AntipatternInstance(AntipatternKind.RAMP, (), ResidualPredicate(
            Form.MONOTONIC, tuple(IndexRef("RT", s) for s in scen), ">", ("th_OpRtVar",) + window)),
        AntipatternInstance(AntipatternKind.MORE_IS_LESS, (), ResidualPredicate(
            Form.DECLINE, tuple(x for s in scen for x in (IndexRef("Throughput", s), IndexRef("Concurrency", s))),
            ">", ("th_maxParallelism",) + window)),
    ]


def precalculate(model: SystemModel) -> List[AntipatternInstance]:
    """Candidate set for a validated model, in a deterministic order."""
    m = derived_metrics(model)
    out: List[AntipatternInstance] = []
    for check in (blob_design_predicate, cth_design_predicate):
        for c in model.components:
            inst = check(model, c.name, m)
            if inst is not None:
                out.append(inst)
    out.extend(performance_only_instances(model))
    return out


# --- serialization ----------------------------------------------------------

def instance_to_dict(inst: AntipatternInstance) -> dict:
    r = inst.residual
    return {
        "id": inst.id,
        "kind": inst.kind.value,
        "bindings": dict(inst.bindings),
        "residual": {
            "form": r.form.value,
            "indices": [str(i) for i in r.indices],
            "comparator": r.comparator,
            "thresholds": list(r.thresholds),
        },
    }


def instance_from_dict(doc: dict) -> AntipatternInstance:
    r = doc["residual"]
    return AntipatternInstance(
        AntipatternKind(doc["kind"]),
        tuple(doc.get("bindings", {}).items()),
        ResidualPredicate(Form(r["form"]), tuple(IndexRef.parse(i) for i in r["indices"]),
                          r["comparator"], tuple(r["thresholds"])),
    )


def dumps_instances(instances: List[AntipatternInstance], model_name: str = "") -> str:
    doc = {"model": model_name, "instances": [instance_to_dict(i) for i in instances]}
    return json.dumps(doc, indent=2) + "\n"


def loads_instances(text: str) -> List[AntipatternInstance]:
    return [instance_from_dict(d) for d in json.loads(text)["instances"]]
