"""Runtime detection of software performance antipatterns.

Design-level sub-predicates are decided off-line on a four-view system
model (:mod:`apmon.precalc`); what remains is compiled from property models
(:mod:`apmon.pmm`, :mod:`apmon.rulec`) into windowed rules evaluated over
probe events (:mod:`apmon.monitor`).  :mod:`apmon.qnsim` solves and simulates
closed queueing networks derived from the same model.
"""

from importlib import resources

from .model import (SystemModel, ThresholdSet, derived_metrics, dumps_model, load_model, loads_model, save_model,
                    validate)
from .precalc import AntipatternInstance, AntipatternKind, precalculate

__version__ = "0.1.0"


def fixture_path(name: str = "ehs.json"):
    """Path of a bundled fixture (``ehs.json``, ``ehs_bindings.json``)."""
    return resources.files(__package__) / "data" / name


__all__ = [
    "AntipatternInstance", "AntipatternKind", "SystemModel", "ThresholdSet", "derived_metrics", "dumps_model",
    "fixture_path", "load_model", "loads_model", "precalculate", "save_model", "validate",
]
