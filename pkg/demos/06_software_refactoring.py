"""A software refactoring reshapes the design, so pre-calculus runs again.

Putting a gateway in front of AppServer takes the two client connectors
off it.  With four connectors left it no longer exceeds th_maxConnects and
the Blob candidate, along with its LAN monitor, disappears.
"""

from dataclasses import replace

from apmon import fixture_path
from apmon.model import Component, Connector, load_model
from apmon.process import SOFTWARE, Refactoring, configure, transition


def add_gateway(m):
    conns = tuple(c for c in m.connectors if c.target != "AppServer")
    conns += (Connector("ClientApp", "Gateway"), Connector("DoctorApp", "Gateway"), Connector("Gateway", "AppServer"))
    return replace(m, components=m.components + (Component("Gateway", "server"),), connectors=conns,
                   deployment={**m.deployment, "Gateway": "AppHost"})


sc0 = configure(load_model(fixture_path("ehs.json")))
sc1 = transition(sc0, Refactoring("add gateway", SOFTWARE, add_gateway))
for sc in (sc0, sc1):
    print(f"epoch {sc.epoch:g}: candidates {list(sc.candidate_ids)}")
    print(f"         {len(sc.monitors)} monitors")
