"""Which antipatterns can the EHS design host at all?

Pre-calculus checks the static, dynamic and deployment parts of every
antipattern formula once, off line.  What survives is a short list of
candidates, each carrying the performance predicate still to be watched.
"""

from dataclasses import replace

from apmon import fixture_path
from apmon.model import derived_metrics, load_model
from apmon.precalc import precalculate

model = load_model(fixture_path("ehs.json"))
dm = derived_metrics(model)
print(f"model {model.name}: {len(model.components)} components, {len(model.scenarios)} scenarios")
print("connectors per component:", dict(dm.connections))

print("\ncandidates:")
for inst in precalculate(model):
    print(f"  {inst.id:18} residual {inst.residual}")

# Raise the connector bound to 5 and AppServer (5 connectors) stops qualifying.
strict = replace(model, thresholds=replace(model.thresholds, th_maxConnects=5))
print("\nwith th_maxConnects=5:", [i.id for i in precalculate(strict)])
