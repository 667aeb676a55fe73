"""Selection, LCS crossover, mutation and bottleneck local search."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .decoder import decode_genome, dedup
from .model import START, Genome, ProblemInstance, WorkflowDag

TYPE1 = "type1"
TYPE2 = "type2"
NONE = "none"


def tournament_select(population: Sequence[Genome], rng: np.random.Generator, k: int = 2) -> Genome:
    if len(population) < k:
        raise ValueError(f"population of {len(population)} is smaller than tournament size {k}")
    picks = sorted(int(i) for i in rng.choice(len(population), size=k, replace=False))
    return population[min(picks, key=lambda i: (population[i].f, i))]


def lcs_pairs(a: Sequence, b: Sequence) -> list[tuple[int, int]]:
    """Index pairs (i, j) of a longest common subsequence of ``a`` and ``b``.

    The backtrace starts at the ends of both sequences and takes a match
    whenever one is available, so among equally long answers it prefers
    matches closest to the sequence ends.
    """
    n, m = len(a), len(b)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        row, prev = table[i], table[i - 1]
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = row[j - 1] if row[j - 1] > prev[j] else prev[j]
    pairs = []
    i, j = n, m
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1]:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif table[i - 1][j] >= table[i][j - 1]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


def lcs(a: Sequence, b: Sequence) -> list:
    return [a[i] for i, _ in lcs_pairs(a, b)]


def _outgoing_link(dag: WorkflowDag, instance: ProblemInstance) -> dict[int, float]:
    idx = instance.index
    longest: dict[int, float] = {}
    for p, s in dag.service_edges():
        d = idx.distance(p, s)
        if d > longest.get(p, -1.0):
            longest[p] = d
    return longest


def cut_point(genome: Genome, lcs_positions: Sequence[int], instance: ProblemInstance) -> int:
    """Cut index (head = sequence[:cut]) after the service with the longest
    outgoing link, never strictly inside the LCS span."""
    seq = genome.sequence
    longest = _outgoing_link(genome.dag, instance)
    lo = min(lcs_positions) if lcs_positions else None
    hi = max(lcs_positions) if lcs_positions else None
    ranked = sorted(
        (i for i, s in enumerate(seq) if s in longest),
        key=lambda i: (-longest[seq[i]], i),
    )
    for i in ranked:
        if lo is None or not (lo <= i < hi):
            return i + 1
    return hi + 1 if hi is not None else len(seq)


def crossover(
    parent1: Genome, parent2: Genome, instance: ProblemInstance, rng: np.random.Generator
) -> tuple[Genome, Genome]:
    """Distance-guided single-point crossover exchanging both tails."""
    if not parent1.dag.services or not parent2.dag.services:
        return parent1, parent2
    pairs = lcs_pairs(parent1.sequence, parent2.sequence)
    cut1 = cut_point(parent1, [i for i, _ in pairs], instance)
    cut2 = cut_point(parent2, [j for _, j in pairs], instance)
    s1, s2 = parent1.sequence, parent2.sequence
    child1 = decode_genome(dedup(s1[:cut1] + s2[cut2:]), instance, rng)
    child2 = decode_genome(dedup(s2[:cut2] + s1[cut1:]), instance, rng)
    return child1, child2


def mutate_sequence(seq: Sequence[int], n: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Keep a random prefix; refill the tail with every other service in random order."""
    p = int(rng.integers(0, len(seq) + 1))
    prefix = tuple(seq[:p])
    kept = set(prefix)
    rest = np.array([s for s in range(n) if s not in kept], dtype=np.int64)
    return prefix + tuple(int(s) for s in rng.permutation(rest))


def mutate(genome: Genome, instance: ProblemInstance, rng: np.random.Generator) -> Genome:
    return decode_genome(mutate_sequence(genome.sequence, instance.n, rng), instance, rng)


@dataclass(frozen=True)
class Bottleneck:
    producer: int
    consumer: int
    distance: float
    producer_pos: int
    consumer_pos: int


def find_bottleneck(genome: Genome, instance: ProblemInstance) -> Optional[Bottleneck]:
    """Longest service-to-service link; ties go to the smaller (producer, consumer) name pair."""
    idx = instance.index
    names = instance.names
    edges = genome.dag.service_edges()
    if not edges:
        return None
    p, s = min(edges, key=lambda e: (-idx.distance(*e), names[e[0]], names[e[1]]))
    where = {v: i for i, v in enumerate(genome.sequence)}
    return Bottleneck(p, s, idx.distance(p, s), where.get(p, -1), where.get(s, -1))


def critical_predecessor(dag: WorkflowDag, node: int, instance: ProblemInstance) -> int:
    """Predecessor of ``node`` with the largest finish time (START if none better)."""
    idx = instance.index
    finish = {START: 0.0}
    for n in dag.topological_order():
        if n == START:
            continue
        preds = dag.predecessors[n]
        arrive = max((finish[p] + idx.prop * idx.distance(p, n) for p in preds), default=0.0)
        finish[n] = arrive + (idx.time[n] if n >= 0 else 0.0)
    names = instance.names

    def key(p):
        return (-(finish[p] + idx.prop * idx.distance(p, node)), names[p] if p >= 0 else "")

    return min(dag.predecessors[node], key=key)


def candidates(kind: str, genome: Genome, bn: Bottleneck, instance: ProblemInstance) -> tuple[int, list[int]]:
    """(anchor, candidate services) for a neighbourhood kind.

    The anchor is the service after which the candidate block is inserted;
    START means the block goes immediately before the bottleneck producer.
    """
    idx = instance.index
    if kind == TYPE1:
        anchor = bn.producer
        pool = idx.consumers_matching(idx.covers[anchor])
        excluded = {bn.consumer, bn.producer}
    else:
        anchor = critical_predecessor(genome.dag, bn.producer, instance)
        offered = idx.start_covers if anchor == START else idx.covers[anchor]
        pool = idx.consumers_matching(offered)
        excluded = {bn.producer, bn.consumer, anchor}
    return anchor, sorted(pool - excluded)


def make_neighbors(
    genome: Genome,
    bn: Bottleneck,
    kind: str,
    instance: ProblemInstance,
    count: int,
    rng: np.random.Generator,
) -> list[tuple[int, ...]]:
    """Neighbour sequences: the candidate block in fresh random order right
    after the anchor, behind a random prefix of services absent from the genome."""
    anchor, block = candidates(kind, genome, bn, instance)
    if not block:
        return []
    seq = genome.sequence
    block_set = set(block)
    base = [s for s in seq if s not in block_set]
    at = base.index(bn.producer) if anchor == START else base.index(anchor) + 1
    present = set(seq) | block_set
    absent = np.array([s for s in range(instance.n) if s not in present], dtype=np.int64)
    max_prefix = min(instance.n // 10, len(absent))
    out = []
    for _ in range(count):
        order = [block[int(i)] for i in rng.permutation(len(block))]
        k = int(rng.integers(0, max_prefix + 1))
        prefix = [int(s) for s in rng.choice(absent, size=k, replace=False)] if k else []
        out.append(tuple(prefix + base[:at] + order + base[at:]))
    return out


def neighbourhood_split(n_l: int, kinds: Sequence[str]) -> list[tuple[str, int]]:
    if not kinds:
        return []
    share, extra = divmod(n_l, len(kinds))
    return [(k, share + (1 if i < extra else 0)) for i, k in enumerate(kinds)]


def local_search(
    genome: Genome,
    instance: ProblemInstance,
    n_l: int,
    rng: np.random.Generator,
    kinds: Sequence[str] = (TYPE1, TYPE2),
) -> tuple[Genome, str]:
    """Replace the genome by its best neighbour if that is strictly better.

    Returns the resulting genome and which neighbourhood produced the
    improvement (``type1``, ``type2`` or ``none``).  All random draws,
    including per-neighbour repair seeds, happen before any evaluation.
    """
    bn = find_bottleneck(genome, instance)
    if bn is None:
        return genome, NONE
    jobs = []
    for kind, count in neighbourhood_split(n_l, kinds):
        for seq in make_neighbors(genome, bn, kind, instance, count, rng):
            jobs.append((kind, seq, int(rng.integers(2**63))))
    best, best_kind = genome, NONE
    for kind, seq, seed in jobs:
        cand = decode_genome(seq, instance, np.random.default_rng(seed))
        if cand.f < best.f:
            best, best_kind = cand, kind
    return best, best_kind
