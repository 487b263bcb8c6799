"""The EHS burst: 10000 updates at t=0, before and after a DbHost upgrade.

The database disk is the bottleneck, so the backlog grows window after
window and the Traffic Jam rule fires.  Making DbHost 100 times faster is
a hardware refactoring: the same rules keep running, and now stay quiet.
"""

import time

from apmon import fixture_path
from apmon.model import load_model
from apmon.monitor import Manager, build_report, detect, replay
from apmon.process import configure, scale_node, transition
from apmon.qnsim import Burst, apply_refactoring, derive_qn, mva_solve, simulate

model = load_model(fixture_path("ehs.json"))
sc0 = configure(model)
net = derive_qn(model, "UpdateVitalParameters")


def monitor(sc, net, seed=42):
    mgr = Manager()
    for iid in sc.candidate_ids:
        rules = [r for r in sc.rules if r.instance_id == iid]
        if rules:
            mgr.register_consumer(iid, rules)
    verdicts = replay(simulate(net, Burst(10000), 1500.0, seed), mgr)
    detections = [detect(iid, verdicts) for iid in mgr.channels]
    return build_report(verdicts, detections, mgr.counters(), sc.epoch)


t = time.perf_counter()
before = monitor(sc0, net)
print(f"epoch {sc0.epoch:g}: fired {[d.instance_id for d in before.fired if d.fired]}  ({time.perf_counter() - t:.1f}s)")
for row in before.windows[:6]:
    rt = "-" if row.avg_rt_s is None else f"{row.avg_rt_s:8.1f}s"
    print(f"  [{row.start:5.0f},{row.end:5.0f})  avg RT {rt}  util DbHost {row.utilization.get('DbHost', 0):.2f}")

sc1 = transition(sc0, scale_node("DbHost", 1 / 100))
assert sc1.rules == sc0.rules  # hardware change: same candidates, same monitors
after = monitor(sc1, apply_refactoring(net, "DbHost", 1 / 100))
print(f"epoch {sc1.epoch:g}: fired {[d.instance_id for d in after.fired if d.fired]}")

print(f"\nsteady-state MVA response time: {mva_solve(net).response_time:.3f}s before, "
      f"{mva_solve(apply_refactoring(net, 'DbHost', 1 / 100)).response_time:.3f}s after")
