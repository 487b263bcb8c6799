import json
import random
from pathlib import Path

import pytest

from apmon import fixture_path, load_model
from apmon.model import (ClosedWorkloadSpec, Component, Connector, Message, NetworkLink, ProcessingNode, Scenario,
                         SystemModel, ThresholdSet)

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def ehs():
    return load_model(fixture_path("ehs.json"))


@pytest.fixture(scope="session")
def bindings():
    return json.loads(Path(fixture_path("ehs_bindings.json")).read_text())


@pytest.fixture
def golden_log():
    return DATA / "tj_golden.log"


def random_model(rng: random.Random, max_components: int = 10) -> SystemModel:
    """Small valid model with random topology, deployment and traffic."""
    n = rng.randint(1, max_components)
    comps = tuple(Component(f"C{i}", is_data_store=rng.random() < 0.2) for i in range(n))
    nodes = tuple(ProcessingNode(f"N{i}", 1e-6, 1e-3) for i in range(rng.randint(1, 3)))
    links = tuple(NetworkLink(f"L{i}{j}", (nodes[i].name, nodes[j].name), 10.0)
                  for i in range(len(nodes)) for j in range(i + 1, len(nodes)))
    deployment = {c.name: rng.choice(nodes).name for c in comps}
    connectors = set()
    for _ in range(rng.randint(0, 2 * n)):
        a, b = rng.sample(range(n), 2) if n > 1 else (0, 0)
        if a != b:
            connectors.add(Connector(f"C{a}", f"C{b}"))
    scenarios = []
    for s in range(rng.randint(0, 2)):
        msgs = tuple(Message(f"C{rng.randrange(n)}", f"C{rng.randrange(n)}", rng.choice([0.0, 1.0]),
                             rng.randint(0, 5), rng.randint(0, 2))
                     for _ in range(rng.randint(1, 12)))
        scenarios.append(Scenario(f"S{s}", msgs, ClosedWorkloadSpec(rng.randint(1, 50), 1.0)))
    th = ThresholdSet(th_maxConnects=rng.randint(0, 4), th_maxMsgs=rng.randint(0, 5), th_maxDbMsgs=rng.randint(0, 4))
    return SystemModel("random", comps, tuple(sorted(connectors, key=lambda c: (c.source, c.target))),
                       tuple(scenarios), nodes, links, deployment, th)
