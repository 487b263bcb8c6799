"""System configurations and the detection pipeline across refactorings.

A configuration pairs a running model with its verified candidates and the
monitor rules compiled from their residual predicates.  A hardware
refactoring only touches rates, so candidates and rules carry over; a
software refactoring re-runs the whole pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from .model import ModelValidationError, SystemModel, structure_signature, validate
from .pmm import ActualizationError, PropertyModel, actualization_request, actualize, library, threshold_binding
from .precalc import AntipatternInstance, AntipatternKind, precalculate
from .rulec import MonitorRule, compile

HARDWARE, SOFTWARE = "hardware", "software"
SCENARIO_KINDS = (AntipatternKind.TJ, AntipatternKind.RAMP, AntipatternKind.MORE_IS_LESS)


class RefactoringError(ValueError):
    pass


@dataclass(frozen=True)
class Refactoring:
    name: str
    kind: str
    edit: Callable[[SystemModel], SystemModel]

    def __post_init__(self):
        if self.kind not in (HARDWARE, SOFTWARE):
            raise RefactoringError(f"refactoring {self.name}: kind must be hardware or software")


def scale_node(node: str, factor: float) -> Refactoring:
    """Multiply a node's cpu and disk service times by ``factor`` (hardware)."""
    if not factor > 0:
        raise RefactoringError("scale factor must be > 0")

    def edit(m: SystemModel) -> SystemModel:
        m.node(node)  # raises KeyError on unknown nodes
        return replace(m, nodes=tuple(
            replace(n, cpu_time_per_instruction=n.cpu_time_per_instruction * factor,
                    disk_time_per_access=n.disk_time_per_access * factor) if n.name == node else n
            for n in m.nodes))

    return Refactoring(f"scale {node} x{factor:g}", HARDWARE, edit)


def scale_link(link: str, factor: float) -> Refactoring:
    """Divide a link's bandwidth by ``factor``, so transfer times scale by it."""
    if not factor > 0:
        raise RefactoringError("scale factor must be > 0")

    def edit(m: SystemModel) -> SystemModel:
        if link not in {l.name for l in m.networks}:
            raise KeyError(link)
        return replace(m, networks=tuple(
            replace(l, bandwidth_mbit_per_s=l.bandwidth_mbit_per_s / factor) if l.name == link else l
            for l in m.networks))

    return Refactoring(f"scale {link} x{factor:g}", HARDWARE, edit)


# --- pipeline -----------------------------------------------------------------

def _scenarios_of(inst: AntipatternInstance) -> List[str]:
    out: List[str] = []
    for i in inst.residual.indices:
        if i.target not in out:
            out.append(i.target)
    return out


def actual_models(model: SystemModel, candidates: List[AntipatternInstance],
                  thresholds: Optional[Mapping[str, Any]] = None
                  ) -> List[Tuple[AntipatternInstance, PropertyModel]]:
    """Actualize the library model of every candidate.

    Scenario-scoped kinds get one actual model per scenario they watch.
    Threshold values come from ``thresholds`` when given, otherwise from the
    model's ThresholdSet.  Candidates with nothing to watch (no scenario, or
    fewer than two nodes for CPS) are skipped.
    """
    lib = library()
    th = dict(threshold_binding(model.thresholds) if thresholds is None else thresholds)
    out = []
    for inst in candidates:
        generic = lib[inst.kind]
        if inst.kind in SCENARIO_KINDS:
            for s in _scenarios_of(inst):
                req = actualization_request(inst, model, s)
                out.append((inst, actualize(generic, {**th, **req}, name=f"{generic.name}@{s}")))
            continue
        if inst.kind is AntipatternKind.CPS and len(inst.residual.indices) < 2:
            continue
        req = actualization_request(inst, model)
        swc = inst.binding.get("swC")
        out.append((inst, actualize(generic, {**th, **req}, name=f"{generic.name}@{swc}" if swc else None)))
    return out


def build_rules(model: SystemModel, candidates: List[AntipatternInstance],
                thresholds: Optional[Mapping[str, Any]] = None, consecutive: int = 2,
                absolute_slope: bool = False) -> List[MonitorRule]:
    rules: List[MonitorRule] = []
    for inst, actual in actual_models(model, candidates, thresholds):
        rules.extend(compile(actual, inst.id, consecutive, absolute_slope))
    return rules


@dataclass(frozen=True)
class SystemConfiguration:
    model: SystemModel
    candidates: Tuple[AntipatternInstance, ...]
    rules: Tuple[MonitorRule, ...]
    epoch: float = 0.0
    thresholds: Optional[Tuple[Tuple[str, Any], ...]] = None
    consecutive: int = 2

    @property
    def monitors(self) -> Tuple[str, ...]:
        return tuple(r.id for r in self.rules)

    @property
    def candidate_ids(self) -> Tuple[str, ...]:
        return tuple(c.id for c in self.candidates)


def configure(model: SystemModel, thresholds: Optional[Mapping[str, Any]] = None, epoch: float = 0.0,
              consecutive: int = 2) -> SystemConfiguration:
    """Pre-calculus plus rule compilation for a validated model."""
    problems = validate(model)
    if problems:
        raise ModelValidationError(problems)
    candidates = precalculate(model)
    rules = build_rules(model, candidates, thresholds, consecutive)
    frozen = None if thresholds is None else tuple(sorted(thresholds.items()))
    return SystemConfiguration(model, tuple(candidates), tuple(rules), epoch, frozen, consecutive)


def transition(sc: SystemConfiguration, r: Refactoring, epoch: Optional[float] = None) -> SystemConfiguration:
    """Apply ``r`` and return the next configuration.

    Hardware refactorings keep candidates and rules as they are and are
    rejected if they alter anything but rate fields.
    """
    new = r.edit(sc.model)
    problems = validate(new)
    if problems:
        raise ModelValidationError(problems)
    t = sc.epoch + 1 if epoch is None else epoch
    if r.kind == HARDWARE:
        if structure_signature(new) != structure_signature(sc.model):
            raise RefactoringError(f"refactoring {r.name} is tagged hardware but changes the model structure")
        return replace(sc, model=new, epoch=t)
    th = None if sc.thresholds is None else dict(sc.thresholds)
    return configure(new, th, t, sc.consecutive)


__all__ = [
    "ActualizationError", "HARDWARE", "SOFTWARE", "Refactoring", "RefactoringError", "SystemConfiguration",
    "actual_models", "build_rules", "configure", "scale_link", "scale_node", "transition",
]
