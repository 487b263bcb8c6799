"""Acceptance checks 1-7.  Each prints one ``ACCEPTANCE <n> PASS|FAIL`` line."""

import random
import time
from dataclasses import replace

import numpy as np
import pytest

from apmon.monitor import Manager, detect, dumps_verdicts, make_event, read_log, replay
from apmon.pmm import actualize, library
from apmon.precalc import AntipatternKind, IndexRef, precalculate
from apmon.process import build_rules, configure, scale_node, transition
from apmon.qnsim import (Burst, QnNetwork, Station, apply_refactoring, derive_qn, mva_solve, scale_demands,
                         simulate, simulate_solution)
from apmon.rulec import WindowPlan, compile, render_rule

from test_monitor import util_rule
from test_pmm import full_binding

UVP = "UpdateVitalParameters"
TJ_RULE = "TJPropertyModel@UpdateVitalParameters/AVG-RT-k-Property"


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


def tj_rules(model):
    return [r for r in build_rules(model, precalculate(model)) if r.instance_id == "TJ"]


def run_tj(rules, events):
    mgr = Manager()
    mgr.register_consumer("TJ", rules)
    return detect("TJ", replay(events, mgr))


# 1 -----------------------------------------------------------------------------------

def test_criterion_1_precalc_fidelity(ehs, report):
    t = time.perf_counter()
    pa = precalculate(ehs)
    dt = time.perf_counter() - t
    kinds = sorted(i.id for i in pa)
    blob = [i for i in pa if i.kind is AntipatternKind.BLOB]
    ok = (kinds == sorted(["Blob(AppServer)", "TJ", "CPS", "Ramp", "MoreIsLess"])
          and len(blob) == 1 and blob[0].residual.indices == (IndexRef("Utilization", "LAN"),) and dt < 1.0)
    report(1, ok, f"candidates={kinds} blob residual={blob[0].residual.indices if blob else None} in {dt:.3f}s")
    assert ok


# 2 -----------------------------------------------------------------------------------

def test_criterion_2_golden_replay(ehs, golden_log, report):
    t = time.perf_counter()
    rules = tj_rules(ehs)
    det = run_tj(rules, read_log(golden_log))
    dt = time.perf_counter() - t
    ev = [v for v in det.evidence if v.rule_id == TJ_RULE and v.window_start == 350.0]
    slope = ev[0].observed if ev else None
    ok = (det.fired and slope is not None and abs(slope - 0.46) <= 1e-9 and ev[0].threshold == 0.3
          and ev[0].prev_window == 6 and dt < 1.0)
    report(2, ok, f"fired={det.fired} slope@[350,400)={slope} threshold=0.3 in {dt:.3f}s")
    assert ok


# 3 -----------------------------------------------------------------------------------

def _flip(ehs, net, jobs, seed=42):
    rules = tj_rules(ehs)
    pre = run_tj(rules, simulate(net, Burst(jobs), 1500.0, seed))
    post = run_tj(rules, simulate(apply_refactoring(net, "DbHost", 1 / 100), Burst(jobs), 1500.0, seed))
    return pre, post


def test_criterion_3_end_to_end(ehs, report):
    base = derive_qn(ehs, UVP)
    t = time.perf_counter()
    desk_pre, desk_post = _flip(ehs, scale_demands(replace(base, population=200), 10), 200)
    t_desk = time.perf_counter() - t
    t = time.perf_counter()
    pre, post = _flip(ehs, base, 10000)
    t_full = time.perf_counter() - t
    r_pre = mva_solve(base).response_time
    r_post = mva_solve(apply_refactoring(base, "DbHost", 1 / 100)).response_time
    ok = (pre.fired and not post.fired and desk_pre.fired and not desk_post.fired and t_full < 60 and t_desk < 5)
    report(3, ok, f"full: pre fired={pre.fired} ({len(pre.evidence)} windows) post fired={post.fired} "
                  f"in {t_full:.2f}s; desk: {desk_pre.fired}/{desk_post.fired} in {t_desk:.2f}s; "
                  f"MVA R {r_pre:.3f}s pre (target 0.61, informative) {r_post:.3f}s post (target 0.5, informative)")
    assert ok


# 4 -----------------------------------------------------------------------------------

def _random_network(rng):
    k = int(rng.integers(1, 6))
    stations = tuple(Station(f"s{i}", "delay" if rng.random() < 0.25 else "queue", float(rng.uniform(0.05, 2.0)))
                     for i in range(k))
    return QnNetwork(stations, int(rng.integers(1, 51)), float(rng.uniform(0.0, 10.0)))


def test_criterion_4_mva_oracle(report):
    hand = [mva_solve(QnNetwork((Station("s", "queue", 1.0),), n, 0.0)).response_time for n in (1, 2)]
    rng = np.random.default_rng(2024)
    worst, t = 0.0, time.perf_counter()
    for i in range(20):
        net = _random_network(rng)
        sim, exact = simulate_solution(net, 100_000, seed=i), mva_solve(net)
        err = max(abs(sim.response_time / exact.response_time - 1), abs(sim.throughput / exact.throughput - 1))
        worst = max(worst, err)
    dt = time.perf_counter() - t
    ok = hand == [1.0, 2.0] and worst <= 0.05
    report(4, ok, f"hand cases R={hand}; worst relative error over 20 networks {worst:.4f} (limit 0.05) in {dt:.1f}s")
    assert ok


# 5 -----------------------------------------------------------------------------------

def _util_ok(rng):
    plan = WindowPlan(10.0, 10.0, 110.0)
    n = rng.randint(0, 40)
    events = []
    for _ in range(n):
        t0 = rng.uniform(0, 115)
        events.append(make_event(t0, "LAN.busy", f"j{len(events)}",
                                 {"device": "net", "duration": rng.uniform(1e-3, 30)}))
    _, verdicts = _run_one(util_rule(plan=plan, threshold=0.5), events)
    return all(0.0 <= v.value("utilization_LAN") <= 1.0 for v in verdicts)


def _run_one(rule, events):
    mgr = Manager()
    mgr.register_consumer(rule.instance_id, [rule])
    return mgr, replay(events, mgr)


def test_criterion_5_property_suites(ehs, golden_log, report):
    rng = random.Random(5)
    util = all(_util_ok(rng) for _ in range(1000))

    plan = WindowPlan(0.0, 50.0, 1500.0)
    total = True
    for _ in range(10_000):
        t = rng.uniform(0.0, 1500.0)
        hits = [w for w in range(plan.n_windows) if plan.bounds(w)[0] <= t < plan.bounds(w)[1]]
        total &= hits == [plan.index(t)]

    rules = build_rules(ehs, precalculate(ehs))
    mgr = Manager()
    for iid in dict.fromkeys(r.instance_id for r in rules):
        mgr.register_consumer(iid, [r for r in rules if r.instance_id == iid])
    events = read_log(golden_log) + simulate(derive_qn(ehs, UVP), Burst(300), 1500.0, 7)
    verdicts = replay(events, mgr)
    keys = [(v.rule_id, v.window) for v in verdicts]
    unique = len(keys) == len(set(keys))

    def verdict_log():
        m = Manager()
        for iid in dict.fromkeys(r.instance_id for r in rules):
            m.register_consumer(iid, [r for r in rules if r.instance_id == iid])
        return dumps_verdicts(replay(events, m))
    deterministic = verdict_log() == verdict_log()

    sc = configure(ehs)
    nxt = transition(sc, scale_node("DbHost", 1 / 100))
    invariant = nxt.candidates == sc.candidates and nxt.rules == sc.rules

    ok = util and total and unique and deterministic and invariant
    report(5, ok, f"utilization in [0,1]={util} partition total={total} verdicts unique={unique} "
                  f"hardware invariance={invariant} replay deterministic={deterministic}")
    assert ok


# 6 -----------------------------------------------------------------------------------

def test_criterion_6_translator(ehs, bindings, report):
    compiled = {}
    for kind in AntipatternKind:
        compiled[kind] = [render_rule(r) for r in compile(actualize(library()[kind], full_binding(kind, ehs.thresholds)))]
    again = {k: [render_rule(r) for r in compile(actualize(library()[k], full_binding(k, ehs.thresholds)))]
             for k in AntipatternKind}
    tj = next(render_rule(r) for r in build_rules(ehs, precalculate(ehs), bindings) if r.id == TJ_RULE)
    verbatim = all(tok in tj for tok in ("init=0", "size=50", "end=1500", "> 0.3"))
    ok = all(compiled.values()) and compiled == again and verbatim
    report(6, ok, f"kinds compiled={sum(bool(v) for v in compiled.values())}/6 deterministic={compiled == again} "
                  f"TJ listing has 0/50/1500/0.3={verbatim}")
    assert ok


# 7 -----------------------------------------------------------------------------------

def test_criterion_7_effort_audit(ehs, report):
    pa = [i for i in precalculate(ehs) if i.kind is AntipatternKind.BLOB]
    rules = build_rules(ehs, pa)
    mgr = Manager()
    mgr.register_consumer(pa[0].id, rules)
    replay(simulate(derive_qn(ehs, UVP), Burst(500), 1500.0, 1), mgr)
    consumed, subscribed = mgr.cep.consumed_event_types, set(mgr.cep.subscriptions)
    ok = consumed == subscribed == {"LAN.busy"} and mgr.bus.dropped > 0
    report(7, ok, f"consumed={sorted(consumed)} subscribed={sorted(subscribed)} dropped={mgr.bus.dropped}")
    assert ok
