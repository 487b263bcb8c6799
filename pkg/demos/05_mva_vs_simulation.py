"""Exact MVA against the discrete-event simulator on a small network."""

from apmon.qnsim import QnNetwork, Station, mva_solve, simulate_solution

net = QnNetwork((Station("cpu", "queue", 0.2), Station("disk", "queue", 0.5), Station("net", "delay", 0.3)),
                population=12, think_time=4.0)

exact = mva_solve(net)
sim = simulate_solution(net, completions=100_000, seed=1)

print(f"{'':8}{'MVA':>10}{'sim':>10}")
print(f"{'R (s)':8}{exact.response_time:10.4f}{sim.response_time:10.4f}")
print(f"{'X (1/s)':8}{exact.throughput:10.4f}{sim.throughput:10.4f}")
for i, name in enumerate(exact.stations):
    print(f"{'U ' + name:8}{exact.utilization[i]:10.4f}{sim.utilization[i]:10.4f}")
