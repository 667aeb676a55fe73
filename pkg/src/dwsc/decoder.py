"""Backward decoding of service sequences into feasible workflow graphs.

Decoding starts from the task's wanted concepts and repeatedly scans the
sequence, selecting the first not-yet-used service whose outputs cover a
pending goal; the inputs of a selected service become new goals unless the
task inputs already cover them.  Scans repeat while they make progress.

Every service carries its forward-chaining layer (the earliest step at
which its inputs become available from the task inputs).  A goal raised by
a service in layer k may only be met by a provider in a layer below k, and
an already-selected provider in a lower layer is reused.  This keeps every
graph acyclic and guarantees that a permutation of the whole repository
always decodes on a feasible instance.  Services outside the forward
closure are never selected.
"""

from __future__ import annotations

import heapq
import math
from typing import Iterable, Optional, Sequence

import numpy as np

from .evaluator import fitness
from .model import END, START, Genome, InstanceError, ProblemInstance, Task, Taxonomy, Service, WorkflowDag


class InfeasibleInstance(InstanceError):
    """The task cannot be solved with the given repository."""


def dedup(sequence: Iterable[int]) -> tuple:
    """Drop repeated ids, keeping the first occurrence."""
    return tuple(dict.fromkeys(sequence))


def forward_feasible(
    repository: Sequence[Service], task: Task, taxonomy: Taxonomy, matching: str = "subsumption"
) -> bool:
    def cover(cs):
        if matching == "strict":
            return set(cs)
        out = set()
        for c in cs:
            out |= taxonomy.ancestors_or_self(c)
        return out

    available = cover(task.provided)
    if task.wanted <= available:
        return True
    remaining = list(repository)
    while remaining:
        ready = [s for s in remaining if s.inputs <= available]
        if not ready:
            break
        remaining = [s for s in remaining if not s.inputs <= available]
        for s in ready:
            available |= cover(s.outputs)
        if task.wanted <= available:
            return True
    return task.wanted <= available


def decode_backward(sequence: Sequence[int], instance: ProblemInstance) -> Optional[WorkflowDag]:
    """Decode a duplicate-free sequence; ``None`` when no feasible graph results."""
    idx = instance.index
    layer = idx.layer
    covers = idx.covers
    inputs = idx.inputs
    producers = idx.producers
    start_cov = idx.start_covers
    pos = {s: i for i, s in enumerate(sequence)}

    goals: dict[str, float] = {c: math.inf for c in idx.wanted if c not in start_cov}
    selected: list[int] = []
    chosen: set[int] = set()
    # concept -> selected services covering it, in selection order
    offers: dict[str, list[int]] = {}

    def provided_below(concept: str, bound: float) -> bool:
        for p in offers.get(concept, ()):
            if layer[p] < bound:
                return True
        return False

    while goals:
        heap: list[int] = []
        pushed: set[int] = set()

        def push(concept: str, after: int) -> None:
            for s in producers.get(concept, ()):
                i = pos.get(s)
                if i is not None and i > after and i not in pushed and s not in chosen:
                    pushed.add(i)
                    heapq.heappush(heap, i)

        for c in goals:
            push(c, -1)
        progress = False
        while heap:
            i = heapq.heappop(heap)
            s = sequence[i]
            if s in chosen:
                continue
            ls = layer[s]
            cov = covers[s]
            hit = [c for c, bound in goals.items() if ls < bound and c in cov]
            if not hit:
                continue
            progress = True
            selected.append(s)
            chosen.add(s)
            for c in cov:
                offers.setdefault(c, []).append(s)
            for c in hit:
                del goals[c]
            for w in inputs[s]:
                if w in start_cov or provided_below(w, ls):
                    continue
                if w in goals:
                    if ls < goals[w]:
                        goals[w] = ls
                else:
                    goals[w] = ls
                    push(w, i)
            if not goals:
                break
        if not progress:
            return None

    return _materialise(selected, offers, instance)


def _materialise(selected: list[int], offers: dict[str, list[int]], instance: ProblemInstance) -> WorkflowDag:
    idx = instance.index
    layer, start_cov = idx.layer, idx.start_covers
    nearest = instance.provider_choice == "nearest"
    edges: dict[tuple[int, int], set[str]] = {}

    def connect(consumer: int, needed: Sequence[str], bound: float) -> None:
        if not needed:
            edges.setdefault((START, consumer), set())
        for w in needed:
            if w in start_cov:
                edges.setdefault((START, consumer), set()).add(w)
                continue
            cands = [p for p in offers.get(w, ()) if layer[p] < bound]
            if not cands:
                raise AssertionError(f"decoder left concept {w} unprovided")
            p = min(cands, key=lambda q: idx.distance(q, consumer)) if nearest else cands[0]
            edges.setdefault((p, consumer), set()).add(w)

    for s in selected:
        connect(s, idx.inputs[s], layer[s])
    connect(END, idx.wanted, math.inf)

    # drop services whose outputs ended up unused (possible with nearest-provider wiring)
    kept = set(selected)
    while True:
        has_out = {p for p, _ in edges}
        dead = [s for s in kept if s not in has_out]
        if not dead:
            break
        for s in dead:
            kept.discard(s)
            for key in [k for k in edges if k[1] == s]:
                del edges[key]

    return WorkflowDag(
        services=tuple(s for s in selected if s in kept),
        edges={k: frozenset(v) for k, v in edges.items()},
    )


def strip_redundant(sequence: Sequence[int], dag: WorkflowDag) -> tuple[int, ...]:
    used = set(dag.services)
    return tuple(s for s in sequence if s in used)


def validate(dag: WorkflowDag, instance: ProblemInstance) -> list[str]:
    """Audit a graph against the workflow invariants; returns the violations found."""
    idx = instance.index
    problems = []
    try:
        dag.topological_order()
    except InstanceError:
        return ["cycle"]
    if len(set(dag.services)) != len(dag.services):
        problems.append("duplicate service node")
    nodes = set(dag.nodes)
    for p, s in dag.edges:
        if p not in nodes or s not in nodes:
            problems.append(f"edge {p}->{s} references unknown node")
    if problems:
        return problems

    def needs(n):
        return idx.wanted if n == END else idx.inputs[n]

    def offered(n):
        return idx.start_covers if n == START else idx.covers[n]

    for n in (*dag.services, END):
        got: set[str] = set()
        for p in dag.predecessors[n]:
            carried = dag.edges[(p, n)]
            if not carried <= offered(p):
                problems.append(f"edge {p}->{n} carries concepts its producer lacks")
            got |= carried
        missing = [w for w in needs(n) if w not in got]
        if missing:
            problems.append(f"node {n} has unsatisfied inputs {missing}")

    def reach(start, nbrs):
        seen = {start}
        stack = [start]
        while stack:
            for m in nbrs[stack.pop()]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return seen

    fwd = reach(START, dag.successors)
    bwd = reach(END, dag.predecessors)
    for n in dag.nodes:
        if n not in fwd or n not in bwd:
            problems.append(f"node {n} is not on a start->end path")
    return problems


def decode_genome(
    sequence: Iterable[int],
    instance: ProblemInstance,
    rng: Optional[np.random.Generator] = None,
) -> Optional[Genome]:
    """Dedup, decode, strip and evaluate.

    When decoding fails and ``rng`` is given, the sequence is repaired by
    appending the missing repository services in random order, which makes
    it decodable on any feasible instance.
    """
    seq = dedup(sequence)
    dag = decode_backward(seq, instance)
    if dag is None:
        if rng is None:
            return None
        present = set(seq)
        missing = np.array([s for s in range(instance.n) if s not in present], dtype=np.int64)
        seq = seq + tuple(int(s) for s in rng.permutation(missing))
        dag = decode_backward(seq, instance)
        if dag is None:
            raise InfeasibleInstance("task cannot be satisfied by the repository")
    return Genome(strip_redundant(seq, dag), dag, fitness(dag, instance))
