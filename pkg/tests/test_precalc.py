import random
from collections import Counter
from dataclasses import replace

from hypothesis import given, settings, strategies as st

from apmon.model import Component, SystemModel, ThresholdSet
from apmon.precalc import (AntipatternKind, Form, IndexRef, PERFORMANCE_ONLY, blob_design_predicate,
                           cth_design_predicate, dumps_instances, loads_instances, precalculate)

from conftest import random_model


def ids(instances):
    return [i.id for i in instances]


def test_ehs_candidate_set(ehs):
    pa = precalculate(ehs)
    assert sorted(ids(pa)) == sorted(["Blob(AppServer)", "TJ", "CPS", "Ramp", "MoreIsLess"])
    blob = pa[0]
    assert blob.binding["swC"] == "AppServer"
    assert blob.residual.indices == (IndexRef("Utilization", "LAN"),)
    assert blob.residual.comparator == ">="
    assert blob.residual.thresholds == ("th_maxNetUtil",)
    assert getattr(ehs.thresholds, blob.residual.thresholds[0]) == 0.7


def test_tj_residual_watches_update_vital_parameters(ehs):
    tj = next(i for i in precalculate(ehs) if i.kind is AntipatternKind.TJ)
    assert tj.bindings == ()
    assert tj.residual.form is Form.SLOPE
    assert IndexRef("RT", "UpdateVitalParameters") in tj.residual.indices
    assert tj.residual.thresholds[0] == "th_OpRtVar"


def test_single_component_model():
    m = SystemModel(components=(Component("A"),), deployment={"A": "N"})
    assert sorted(ids(precalculate(m))) == sorted(["TJ", "CPS", "Ramp", "MoreIsLess"])


def test_empty_model_keeps_performance_only_kinds():
    assert sorted(ids(precalculate(SystemModel()))) == sorted(["TJ", "CPS", "Ramp", "MoreIsLess"])


def test_connections_equal_to_threshold_is_not_blob(ehs):
    # AppServer has 5 connectors; a threshold of 5 makes the comparison fail
    m = replace(ehs, thresholds=replace(ehs.thresholds, th_maxConnects=5))
    assert blob_design_predicate(m, "AppServer") is None


def test_zero_connectors_not_blob(ehs):
    m = replace(ehs, connectors=())
    assert blob_design_predicate(m, "AppServer") is None


def test_codeployed_database_watches_host(ehs):
    dep = dict(ehs.deployment)
    dep["Database"] = "AppHost"
    inst = blob_design_predicate(replace(ehs, deployment=dep), "AppServer")
    assert inst.residual.indices == (IndexRef("Utilization", "AppHost"),)
    assert inst.residual.thresholds == ("th_maxHwUtil",)


def test_cth_remote_store(ehs):
    # PatientInfo sends 3 requests to the remote Database; lower the bound below that
    m = replace(ehs, thresholds=replace(ehs.thresholds, th_maxDbMsgs=2))
    inst = cth_design_predicate(m, "AppServer")
    assert inst is not None
    assert inst.residual.indices == (IndexRef("Utilization", "DbHost"),)
    assert inst.id == "CTH(AppServer)"


def test_cth_not_exceeded(ehs):
    assert cth_design_predicate(ehs, "AppServer") is None  # 3 requests <= 5


def test_cth_without_data_store(ehs):
    comps = tuple(replace(c, is_data_store=False) for c in ehs.components)
    m = replace(ehs, components=comps, thresholds=replace(ehs.thresholds, th_maxDbMsgs=0))
    assert all(cth_design_predicate(m, c.name) is None for c in m.components)


def test_precalculate_is_deterministic(ehs):
    assert precalculate(ehs) == precalculate(ehs)
    assert dumps_instances(precalculate(ehs)) == dumps_instances(precalculate(ehs))


def test_serialization_round_trip(ehs):
    pa = precalculate(ehs)
    assert loads_instances(dumps_instances(pa, ehs.name)) == pa


# --- brute-force soundness and completeness ---------------------------------

def _oracle_blob(m: SystemModel, c: str) -> bool:
    conns = sum((x.source == c) + (x.target == c) for x in m.connectors)
    sent = [Counter(msg.sender for msg in s.messages)[c] for s in m.scenarios]
    return conns > m.thresholds.th_maxConnects and any(n > m.thresholds.th_maxMsgs for n in sent)


def _oracle_cth(m: SystemModel, c: str) -> bool:
    stores = {x.name for x in m.components if x.is_data_store}
    for s in m.scenarios:
        to_store = [msg for msg in s.messages if msg.sender == c and msg.receiver in stores]
        remote = [msg for msg in to_store if m.deployment[msg.receiver] != m.deployment[c]]
        if len(to_store) > m.thresholds.th_maxDbMsgs and remote:
            return True
    return False


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 100_000))
def test_design_gated_instances_match_brute_force(seed):
    m = random_model(random.Random(seed))
    pa = precalculate(m)
    blob = {i.binding["swC"] for i in pa if i.kind is AntipatternKind.BLOB}
    cth = {i.binding["swC"] for i in pa if i.kind is AntipatternKind.CTH}
    names = [c.name for c in m.components]
    assert blob == {c for c in names if _oracle_blob(m, c)}
    assert cth == {c for c in names if _oracle_cth(m, c)}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_performance_only_kinds_exactly_once(seed):
    pa = precalculate(random_model(random.Random(seed)))
    counts = Counter(i.kind for i in pa)
    assert all(counts[k] == 1 for k in PERFORMANCE_ONLY)
    assert all(i.bindings == () for i in pa if i.kind in PERFORMANCE_ONLY)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_residual_indices_name_model_elements(seed):
    m = random_model(random.Random(seed))
    known = ({n.name for n in m.nodes} | {l.name for l in m.networks} | {s.name for s in m.scenarios})
    for inst in precalculate(m):
        for idx in inst.residual.indices:
            assert idx.target in known
        for th in inst.residual.thresholds:
            assert hasattr(ThresholdSet(), th)
