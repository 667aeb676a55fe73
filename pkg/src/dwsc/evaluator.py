"""Time/cost model and scalar fitness of a decoded composition."""

from __future__ import annotations

import logging
from typing import Callable, Hashable, Iterable

from .model import (
    FitnessBreakdown,
    NetworkModel,
    ProblemInstance,
    Service,
    WorkflowDag,
)

log = logging.getLogger(__name__)


def _data_terms(service: Service, network: NetworkModel):
    for d in service.data_items:
        dist = network.point_distance(d.location, service.location)
        bw = network.link_bandwidth(d.id, service.id)
        yield dist, d, bw


def service_time(service: Service, network: NetworkModel, mode: str = "once") -> float:
    """Execution time of one service including data access and transfer.

    Per data item: propagation from the data host, server access latency
    and transfer time (size / bandwidth).  ``literal`` also adds the
    processing time once per item; ``once`` adds it a single time.
    """
    total = 0.0
    for dist, d, bw in _data_terms(service, network):
        total += network.propagation_factor * dist + d.access_latency + d.size / bw
        if mode == "literal":
            total += service.proc_time
    if mode == "once":
        total += service.proc_time
    return total


def service_cost(service: Service, network: NetworkModel, mode: str = "once") -> float:
    total = 0.0
    for dist, d, _bw in _data_terms(service, network):
        total += network.comm_cost_factor * dist + d.provision_cost
        if mode == "literal":
            total += service.service_cost
    if mode == "once":
        total += service.service_cost
    return total


def longest_path(
    nodes: Iterable[Hashable],
    edges: Iterable[tuple[Hashable, Hashable]],
    node_weight: Callable[[Hashable], float],
    edge_weight: Callable[[Hashable, Hashable], float],
) -> float:
    """Heaviest path weight in a DAG (node and edge weights), by DP over a topological order."""
    nodes = list(nodes)
    succ: dict = {n: [] for n in nodes}
    indeg: dict = {n: 0 for n in nodes}
    for p, s in edges:
        succ[p].append(s)
        indeg[s] += 1
    best = {n: node_weight(n) for n in nodes}
    ready = [n for n in nodes if indeg[n] == 0]
    seen = 0
    while ready:
        p = ready.pop()
        seen += 1
        for s in succ[p]:
            cand = best[p] + edge_weight(p, s) + node_weight(s)
            if cand > best[s]:
                best[s] = cand
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    if seen != len(nodes):
        raise ValueError("graph has a cycle")
    return max(best.values(), default=0.0)


def total_time(dag: WorkflowDag, instance: ProblemInstance) -> float:
    """Response time: the most time-consuming start->end path."""
    idx = instance.index
    t = idx.time

    def node_w(n):
        return t[n] if n >= 0 else 0.0

    def edge_w(p, s):
        return idx.prop * idx.distance(p, s)

    return longest_path(dag.nodes, dag.edges, node_w, edge_w)


def total_cost(dag: WorkflowDag, instance: ProblemInstance) -> float:
    idx = instance.index
    c = sum(idx.cost[s] for s in dag.services)
    for p, s in dag.edges:
        if p >= 0 and s >= 0:
            c += idx.comm * idx.distance(p, s)
    return c


def compute_bounds(instance: ProblemInstance) -> tuple[float, float]:
    """Normalisation upper bounds (T_max, C_max).

    Time: every service on one path plus n-1 links at full distance.
    Cost: every service plus the largest possible number of links at full
    distance; each consumer has at most one provider per input concept.
    """
    idx = instance.index
    n = instance.n
    t_max = sum(idx.time) + max(n - 1, 0) * idx.prop
    max_edges = sum(min(len(ins), n - 1) for ins in idx.inputs)
    max_edges = min(max_edges, n * (n - 1) // 2)
    c_max = sum(idx.cost) + max_edges * idx.comm
    return t_max, c_max


def normalise(
    t: float, c: float, bounds: tuple[float, float], weights: tuple[float, float]
) -> FitnessBreakdown:
    t_max, c_max = bounds
    nt = t / t_max if t_max > 0 else 0.0
    nc = c / c_max if c_max > 0 else 0.0
    clamped = False
    if nt > 1.0 or nc > 1.0:
        log.warning("composition exceeds normalisation bounds (T=%g/%g, C=%g/%g)", t, t_max, c, c_max)
        nt, nc, clamped = min(nt, 1.0), min(nc, 1.0), True
    wt, wc = weights
    return FitnessBreakdown(t, c, nt, nc, wt * nt + wc * nc, clamped)


def fitness(dag: WorkflowDag, instance: ProblemInstance) -> FitnessBreakdown:
    return normalise(
        total_time(dag, instance), total_cost(dag, instance), instance.bounds, instance.weights
    )

