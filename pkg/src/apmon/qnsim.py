"""Single-class closed queueing networks: derivation, exact MVA, simulation.

Jobs visit the stations of a network once each, in order.  Queueing stations
are single-server FCFS; delay stations serve every job at once.  The
simulator writes the probe event log consumed by the monitor: a
``<scenario>.start`` / ``<scenario>.end`` pair per job (correlation id = job
id) and a ``<resource>.busy`` event at the start of every service, carrying
the device and the service duration.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .model import SystemModel
from .monitor.events import EventRecord

QUEUE, DELAY = "queue", "delay"


class QnError(ValueError):
    pass


@dataclass(frozen=True)
class Station:
    name: str
    kind: str
    demand: float  # seconds per visit
    resource: str = ""
    device: str = ""

    def __post_init__(self):
        if self.kind not in (QUEUE, DELAY):
            raise QnError(f"station {self.name}: unknown kind {self.kind}")
        if not self.demand > 0:
            raise QnError(f"station {self.name}: demand must be > 0")


@dataclass(frozen=True)
class QnNetwork:
    stations: Tuple[Station, ...]
    population: int
    think_time: float
    scenario: str = "job"

    def __post_init__(self):
        if self.population < 1:
            raise QnError("population must be >= 1")
        if self.think_time < 0:
            raise QnError("think time must be >= 0")

    def demands(self) -> Dict[str, float]:
        return {s.name: s.demand for s in self.stations}


@dataclass
class QnSolution:
    stations: Tuple[str, ...]
    residence_time: np.ndarray
    queue_length: np.ndarray
    utilization: np.ndarray
    response_time: float
    throughput: float

    def to_dict(self) -> dict:
        return {
            "response_time_s": float(self.response_time),
            "throughput_per_s": float(self.throughput),
            "stations": {
                name: {"residence_time_s": float(r), "queue_length": float(q), "utilization": float(u)}
                for name, r, q, u in zip(self.stations, self.residence_time, self.queue_length, self.utilization)
            },
        }

    def table(self) -> str:
        rows = [("station", "metric")]
        for name, r, q, u in zip(self.stations, self.residence_time, self.queue_length, self.utilization):
            rows.append((name, f"R={r:.6g}s Q={q:.6g} U={u:.6g}"))
        rows.append(("system", f"R={self.response_time:.6g}s X={self.throughput:.6g}/s"))
        width = max(len(a) for a, _ in rows)
        return "\n".join(f"{a:<{width}}  {b}" for a, b in rows) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# --- derivation ---------------------------------------------------------------

def derive_qn(model: SystemModel, scenario: str) -> QnNetwork:
    """Closed network for one scenario of the model.

    CPU and disk demands are charged to the receiver's node; a message
    between components on different nodes also costs size / bandwidth on
    the link joining them.  Stations appear in first-use order.
    """
    try:
        s = model.scenario(scenario)
    except KeyError:
        raise QnError(f"unknown scenario {scenario}") from None
    demand: Dict[str, float] = {}
    meta: Dict[str, Tuple[str, str, str]] = {}

    def add(name: str, amount: float, kind: str, resource: str, device: str):
        if amount <= 0:
            return
        if name not in demand:
            demand[name] = 0.0
            meta[name] = (kind, resource, device)
        demand[name] += amount

    for m in s.messages:
        src, dst = model.node_of(m.sender), model.node_of(m.receiver)
        if src != dst and m.size_mbit > 0:
            link = model.link_between(src, dst)
            if link is None or not link.bandwidth_mbit_per_s > 0:
                raise QnError(f"message {m.name or m.sender + '->' + m.receiver}: no link with bandwidth "
                              f"between {src} and {dst}")
            add(link.name, m.size_mbit / link.bandwidth_mbit_per_s, DELAY if link.is_delay_center else QUEUE,
                link.name, "net")
        node = model.node(dst)
        kind = DELAY if node.per_user else QUEUE
        add(f"cpu-{dst}", m.cpu_instructions * node.cpu_time_per_instruction, kind, dst, "cpu")
        add(f"disk-{dst}", m.disk_accesses * node.disk_time_per_access, kind, dst, "disk")

    stations = tuple(Station(n, meta[n][0], demand[n], meta[n][1], meta[n][2]) for n in demand)
    return QnNetwork(stations, s.workload.population, s.workload.think_time, s.name)


def apply_refactoring(net: QnNetwork, target: str, factor: float) -> QnNetwork:
    """Scale the demand of the station named ``target``, or of every station
    hosted by the node or link named ``target``."""
    if not factor > 0:
        raise QnError("scale factor must be > 0")
    hits = [s for s in net.stations if s.name == target or s.resource == target]
    if not hits:
        raise QnError(f"unknown refactoring target {target}")
    return replace(net, stations=tuple(
        replace(s, demand=s.demand * factor) if (s.name == target or s.resource == target) else s
        for s in net.stations))


def scale_demands(net: QnNetwork, factor: float) -> QnNetwork:
    return replace(net, stations=tuple(replace(s, demand=s.demand * factor) for s in net.stations))


# --- exact MVA ----------------------------------------------------------------

def mva_solve(net: QnNetwork) -> QnSolution:
    """Exact mean value analysis over populations 1..N.

    Delay-station utilization is reported as the probability that at least
    one job is in service, ``1 - exp(-X * D)``.
    """
    d = np.array([s.demand for s in net.stations], dtype=float)
    queueing = np.array([s.kind == QUEUE for s in net.stations])
    q = np.zeros_like(d)
    r = d.copy()
    x = 0.0
    for n in range(1, net.population + 1):
        r = np.where(queueing, d * (1.0 + q), d)
        x = n / (net.think_time + r.sum())
        q = x * r
    u = np.where(queueing, x * d, 1.0 - np.exp(-x * d))
    return QnSolution(tuple(s.name for s in net.stations), r, q, u, float(r.sum()), float(x))


# --- simulation ---------------------------------------------------------------

@dataclass(frozen=True)
class Steady:
    """Closed workload: every customer thinks, submits, waits, repeats."""


@dataclass(frozen=True)
class Burst:
    """``n_jobs`` released together at ``t0``; each job runs once."""

    n_jobs: int
    t0: float = 0.0


Mode = Union[Steady, Burst]


class _Sampler:
    def __init__(self, seed: int, service: str):
        if service not in ("exponential", "deterministic"):
            raise QnError(f"unknown service distribution {service}")
        self.rng = np.random.default_rng(seed)
        self.deterministic = service == "deterministic"
        self._buf = np.empty(0)
        self._i = 0

    def exp(self, mean: float) -> float:
        if self._i >= len(self._buf):
            self._buf = self.rng.standard_exponential(1 << 16)
            self._i = 0
        v = self._buf[self._i]
        self._i += 1
        return mean * float(v)

    def service(self, mean: float) -> float:
        return mean if self.deterministic else self.exp(mean)


_START, _DEPART = 0, 1


class _Stats:
    def __init__(self, k: int):
        self.reset(0.0, k)

    def reset(self, t: float, k: int):
        self.t0 = t
        self.completions = 0
        self.rt_sum = 0.0
        self.res_sum = np.zeros(k)
        self.visits = np.zeros(k, dtype=np.int64)
        self.area = np.zeros(k)
        self.busy_area = np.zeros(k)


def _run(net: QnNetwork, mode: Mode, horizon: float, seed: int, service: str, emit: bool,
         max_completions: Optional[int] = None, warmup: int = 0):
    st = net.stations
    k = len(st)
    demand = [s.demand for s in st]
    delay = [s.kind == DELAY for s in st]
    busy_type = [f"{s.resource or s.name}.busy" for s in st]
    dev = [s.device or s.name for s in st]
    start_type, end_type = f"{net.scenario}.start", f"{net.scenario}.end"
    smp = _Sampler(seed, service)

    events: List[EventRecord] = []
    heap: list = []
    seq = 0
    in_service = [False] * k
    waiting = [deque() for _ in range(k)]
    n_at = [0] * k  # jobs present per station
    last_change = [0.0] * k
    stats = _Stats(k)
    job_start: Dict[int, float] = {}
    arrived: Dict[int, float] = {}
    next_job = 0
    steady = isinstance(mode, Steady)

    def touch(i: int, now: float, delta: int):
        span = now - max(last_change[i], stats.t0)
        if span > 0:
            stats.area[i] += n_at[i] * span
            if n_at[i] > 0:
                stats.busy_area[i] += span
        last_change[i] = now
        n_at[i] += delta

    def serve(job: int, i: int, now: float):
        nonlocal seq
        s = smp.service(demand[i])
        if emit:
            events.append(EventRecord(now, busy_type[i], f"j{job}", (("device", dev[i]), ("duration", s))))
        heapq.heappush(heap, (now + s, seq, _DEPART, job, i))
        seq += 1

    def arrive(job: int, i: int, now: float):
        arrived[job] = now
        touch(i, now, +1)
        if delay[i]:
            serve(job, i, now)
        elif not in_service[i]:
            in_service[i] = True
            serve(job, i, now)
        else:
            waiting[i].append(job)

    def submit(now: float):
        nonlocal seq, next_job
        job = next_job
        next_job += 1
        heapq.heappush(heap, (now, seq, _START, job, 0))
        seq += 1

    if steady:
        for _ in range(net.population):
            submit(smp.exp(net.think_time) if net.think_time > 0 else 0.0)
    else:
        for _ in range(mode.n_jobs):
            submit(mode.t0)

    now = 0.0
    while heap:
        t, _, kind, job, i = heapq.heappop(heap)
        if t > horizon:
            break
        now = t
        if kind == _START:
            job_start[job] = now
            if emit:
                events.append(EventRecord(now, start_type, f"j{job}"))
            arrive(job, 0, now)
            continue
        # departure from station i
        touch(i, now, -1)
        if now >= stats.t0:
            stats.res_sum[i] += now - arrived[job]
            stats.visits[i] += 1
        if not delay[i]:
            if waiting[i]:
                serve(waiting[i].popleft(), i, now)
            else:
                in_service[i] = False
        if i + 1 < k:
            arrive(job, i + 1, now)
            continue
        t0 = job_start.pop(job)
        del arrived[job]
        if emit:
            events.append(EventRecord(now, end_type, f"j{job}"))
        stats.completions += 1
        stats.rt_sum += now - t0
        if warmup and stats.completions == warmup and stats.t0 == 0.0:
            for j in range(k):
                touch(j, now, 0)
            stats.reset(now, k)
            warmup = 0
        if steady:
            submit(now + (smp.exp(net.think_time) if net.think_time > 0 else 0.0))
        if max_completions is not None and stats.completions >= max_completions:
            break
    for j in range(k):
        touch(j, now, 0)
    return events, stats, now


def simulate(net: QnNetwork, mode: Mode = Steady(), horizon: float = 1500.0, seed: int = 0,
             service: str = "exponential") -> List[EventRecord]:
    """Event log of a seeded simulation run, in nondecreasing timestamp order."""
    if not horizon > 0:
        raise QnError("horizon must be > 0")
    events, _, _ = _run(net, mode, horizon, seed, service, emit=True)
    return events


def simulate_solution(net: QnNetwork, completions: int = 100_000, seed: int = 0, warmup: int = 1000,
                      service: str = "exponential") -> QnSolution:
    """Steady-state estimates from a run of ``completions`` jobs after ``warmup``."""
    _, st, end = _run(net, Steady(), float("inf"), seed, service, emit=False,
                      max_completions=completions, warmup=warmup)
    elapsed = end - st.t0
    x = st.completions / elapsed
    res = st.res_sum / np.maximum(st.visits, 1)
    return QnSolution(tuple(s.name for s in net.stations), res, st.area / elapsed, st.busy_area / elapsed,
                      st.rt_sum / max(st.completions, 1), x)
