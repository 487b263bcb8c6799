import json
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from apmon.model import (Component, Connector, Message, ModelParseError, ModelValidationError, Scenario,
                         ClosedWorkloadSpec, SystemModel, ThresholdSet, derived_metrics, dumps_model, load_model,
                         loads_model, model_to_dict, validate)

from conftest import random_model


def test_ehs_fixture_loads(ehs):
    names = {c.name for c in ehs.components}
    assert {"ClientApp", "AppServer", "Database"} <= names
    assert {n.name for n in ehs.nodes} == {"PDA", "AppHost", "DbHost"}
    assert {l.name for l in ehs.networks} == {"WAN", "LAN"}
    assert validate(ehs) == []


def test_times_normalized_to_seconds(ehs):
    assert ehs.source_time_unit == "ms"
    assert ehs.node("DbHost").disk_time_per_access == pytest.approx(5.7e-3)
    uvp = ehs.scenario("UpdateVitalParameters")
    assert uvp.workload.population == 10000
    assert uvp.workload.think_time == pytest.approx(86400.0)
    th = ehs.thresholds
    assert (th.th_initSlot, th.th_sizeSlot, th.th_endSlot) == (0.0, 50.0, 1500.0)
    assert th.th_OpRtVar == pytest.approx(0.3)


def test_empty_model_is_valid():
    m = loads_model("{}")
    assert m.components == () and m.scenarios == ()
    assert validate(m) == []


def test_unknown_message_component_rejected(ehs):
    doc = model_to_dict(ehs)
    doc["scenarios"][0]["messages"][0]["receiver"] = "X"
    with pytest.raises(ModelValidationError) as exc:
        loads_model(json.dumps(doc))
    assert "referential integrity" in str(exc.value)
    assert "X" in str(exc.value)


def test_self_connector_violation():
    m = SystemModel(components=(Component("A"),), connectors=(Connector("A", "A"),), deployment={"A": "N"})
    v = [x for x in validate(m) if "self-connector" in x]
    assert len(v) == 1


def test_zero_slot_size_violation():
    m = SystemModel(thresholds=ThresholdSet(th_sizeSlot=0.0))
    v = validate(m)
    assert len(v) == 1 and v[0].startswith("thresholds")


def test_window_divisibility_violation():
    assert any("divisible" in v for v in validate(SystemModel(thresholds=ThresholdSet(th_sizeSlot=70.0))))


def test_malformed_file_is_parse_error(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{ not json")
    with pytest.raises(ModelParseError):
        load_model(p)


def test_missing_field_is_parse_error():
    with pytest.raises(ModelParseError, match="name"):
        loads_model('{"components": [{"kind": "x"}]}')


def test_unknown_threshold_field_rejected():
    with pytest.raises(ModelParseError, match="th_bogus"):
        loads_model('{"thresholds": {"th_bogus": 1}}')


def test_max_db_msgs_defaults_to_max_msgs():
    assert ThresholdSet(th_maxMsgs=7).th_maxDbMsgs == 7


# --- derived metrics ------------------------------------------------------

def test_appserver_counts(ehs):
    m = derived_metrics(ehs)
    assert m.connections["AppServer"] > 4
    assert m.msgs[("AppServer", "PatientInfo")] > 5


def test_isolated_component_counts():
    model = SystemModel(components=(Component("A"), Component("B")),
                        scenarios=(Scenario("s", (Message("A", "A"),), ClosedWorkloadSpec(1, 0.0)),),
                        deployment={"A": "N", "B": "N"})
    m = derived_metrics(model)
    assert m.connections["B"] == 0
    assert m.msgs[("B", "s")] == 0


def test_chain_counts():
    msgs = (Message("A", "B"), Message("A", "B"), Message("B", "C"), Message("B", "C"))
    model = SystemModel(components=tuple(Component(n) for n in "ABC"),
                        connectors=(Connector("A", "B"), Connector("B", "C")),
                        scenarios=(Scenario("s", msgs, ClosedWorkloadSpec(1, 0.0)),))
    m = derived_metrics(model)
    assert m.msgs[("A", "s")] == 2
    assert m.connections["B"] == 2


def test_db_msgs_count_store_receivers(ehs):
    m = derived_metrics(ehs)
    assert m.db_msgs[("AppServer", "PatientInfo")] == 3
    assert m.db_msgs[("AppServer", "UpdateVitalParameters")] == 1


# --- properties -------------------------------------------------------------

def test_round_trip_on_canonical_form(ehs, tmp_path):
    text = dumps_model(ehs)
    again = loads_model(text)
    assert again == replace(ehs, source_time_unit="s")
    assert dumps_model(again) == text


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_round_trip_random_models(seed):
    m = random_model(random.Random(seed))
    text = dumps_model(m)
    assert dumps_model(loads_model(text)) == text


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_metrics_permutation_invariant(seed, shuffler):
    m = random_model(random.Random(seed))
    comps, conns = list(m.components), list(m.connectors)
    shuffler.shuffle(comps)
    shuffler.shuffle(conns)
    scen = list(m.scenarios)
    shuffler.shuffle(scen)
    p = replace(m, components=tuple(comps), connectors=tuple(conns), scenarios=tuple(scen))
    a, b = derived_metrics(m), derived_metrics(p)
    assert a.connections == b.connections and a.msgs == b.msgs and a.db_msgs == b.db_msgs


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_counts_bounded(seed):
    m = random_model(random.Random(seed))
    d = derived_metrics(m)
    total_msgs = sum(len(s.messages) for s in m.scenarios)
    assert all(0 <= v <= len(m.connectors) for v in d.connections.values())
    assert all(isinstance(v, int) and 0 <= v <= total_msgs for v in d.msgs.values())
    assert all(0 <= d.db_msgs[k] <= d.msgs[k] for k in d.msgs)
