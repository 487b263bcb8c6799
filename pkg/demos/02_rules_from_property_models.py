"""From a generic property model to an executable monitor rule.

The library holds one generic model per antipattern with $-parameters.
Actualization binds them to EHS event sets, workload and thresholds; the
compiler then lowers the result to window aggregations and a predicate.
"""

from apmon import fixture_path
from apmon.model import load_model
from apmon.pmm import actualization_request, actualize, library, threshold_binding
from apmon.precalc import AntipatternKind, precalculate
from apmon.rulec import compile, render_rule

model = load_model(fixture_path("ehs.json"))
generic = library()[AntipatternKind.TJ]
print("generic TJ parameters:", ", ".join(generic.parameter_names()))

tj = next(i for i in precalculate(model) if i.kind is AntipatternKind.TJ)
request = actualization_request(tj, model, "UpdateVitalParameters")
print("\nsystem side of the binding:")
for k, v in request.items():
    print(f"  {k} = {v}")

actual = actualize(generic, {**threshold_binding(model.thresholds), **request})
for rule in compile(actual, tj.id):
    print()
    print(render_rule(rule))
