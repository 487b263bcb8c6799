"""Replaying a hand-built log through the TJ rule.

The log holds eight request pairs per 50 s window.  Mean response time
climbs from 0.40 s to 0.81 s and then 1.27 s; the step between the last
two non-empty windows is 0.46 s, above the 0.3 s bound.
"""

from pathlib import Path

from apmon import fixture_path
from apmon.model import load_model
from apmon.monitor import Manager, detect, read_log, replay
from apmon.precalc import precalculate
from apmon.process import build_rules

model = load_model(fixture_path("ehs.json"))
rules = [r for r in build_rules(model, precalculate(model)) if r.instance_id == "TJ"]

mgr = Manager()
mgr.register_consumer("TJ", rules)
log = Path(__file__).resolve().parents[1] / "tests" / "data" / "tj_golden.log"
verdicts = replay(read_log(log), mgr)

for v in verdicts:
    if v.rule_id.endswith("@UpdateVitalParameters/AVG-RT-k-Property") and v.value("avg_rt_s") is not None:
        flag = "VIOLATION" if v.violated else ""
        print(f"[{v.window_start:6.0f},{v.window_end:6.0f})  avg RT {v.value('avg_rt_s'):.2f}s  "
              f"slope {v.observed:+.2f}  {flag}{' FIRED' if v.fired else ''}")

print("\nTJ fired:", detect("TJ", verdicts).fired)
