"""Generational memetic algorithm with elitism and tournament selection."""

from __future__ import annotations

import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .decoder import InfeasibleInstance, decode_genome
from .model import FitnessBreakdown, Genome, ProblemInstance
from .operators import NONE, TYPE1, TYPE2, crossover, local_search, mutate, tournament_select

ABLATIONS = {
    "full": (TYPE1, TYPE2),
    "no_local_search": (),
    "type1_only": (TYPE1,),
    "type2_only": (TYPE2,),
}

# sub-stream tags, mixed into the seed sequence
_INIT, _SELECT, _CROSS, _MUTATE, _LOCAL = range(5)


@dataclass(frozen=True)
class RunConfig:
    population_size: int = 100
    generations: int = 100
    p_crossover: float = 0.95
    p_mutation: float = 0.05
    p_local_search: float = 0.05
    n_l: int = 20
    elitism: int = 2
    tournament_k: int = 2
    seed: int = 0
    ablation: str = "full"
    ls_granularity: str = "individual"

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be positive")
        if self.generations < 0:
            raise ValueError("generations must be nonnegative")
        if not 0 <= self.elitism <= self.population_size:
            raise ValueError("elitism must lie in [0, population_size]")
        for name in ("p_crossover", "p_mutation", "p_local_search"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n_l < 2 or self.n_l % 2:
            raise ValueError("n_l must be an even integer >= 2")
        if self.tournament_k < 1:
            raise ValueError("tournament_k must be positive")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}")
        if self.ls_granularity not in ("individual", "generation"):
            raise ValueError(f"unknown ls_granularity {self.ls_granularity!r}")


@dataclass
class GenerationStats:
    generation: int
    best_f: float
    mean_f: float
    std_f: float
    elapsed_ms: float
    ls_t1_improved: int = 0
    ls_t2_improved: int = 0
    ls_none: int = 0


@dataclass
class RunResult:
    best: Genome
    generations: list[GenerationStats]
    config: RunConfig
    instance_digest: str = ""
    wall_ms: float = 0.0
    clamp_count: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def best_fitness(self) -> FitnessBreakdown:
        return self.best.fitness

    def improvement_counts(self) -> tuple[int, int, int]:
        return (
            sum(g.ls_t1_improved for g in self.generations),
            sum(g.ls_t2_improved for g in self.generations),
            sum(g.ls_none for g in self.generations),
        )


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng([seed & (2**64 - 1), *tags])


def thread_count() -> int:
    raw = os.environ.get("DWSC_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def init_population(instance: ProblemInstance, config: RunConfig, rng: Optional[np.random.Generator] = None) -> list[Genome]:
    """Random permutations of the whole repository, decoded and stripped."""
    if not instance.index.feasible:
        raise InfeasibleInstance("task cannot be satisfied by the repository")
    rng = rng if rng is not None else _rng(config.seed, _INIT)
    n = instance.n
    return [decode_genome(tuple(int(s) for s in rng.permutation(n)), instance) for _ in range(config.population_size)]


def _ranked(pop: Sequence[Genome]) -> list[int]:
    return sorted(range(len(pop)), key=lambda i: (pop[i].f, i))


def _breed(
    slot: int,
    gen: int,
    pop: Sequence[Genome],
    instance: ProblemInstance,
    config: RunConfig,
    ls_slots: Optional[set],
) -> list[tuple[Genome, str]]:
    """Two offspring for one slot; second item is the local-search outcome or ''."""
    seed = config.seed
    k = min(config.tournament_k, len(pop))
    sel = _rng(seed, gen, slot, _SELECT)
    p1 = tournament_select(pop, sel, k)
    p2 = tournament_select(pop, sel, k)
    xr = _rng(seed, gen, slot, _CROSS)
    if xr.random() < config.p_crossover:
        children = crossover(p1, p2, instance, xr)
    else:
        children = (p1, p2)
    out = []
    kinds = ABLATIONS[config.ablation]
    for j, child in enumerate(children):
        mr = _rng(seed, gen, slot, j, _MUTATE)
        if mr.random() < config.p_mutation:
            child = mutate(child, instance, mr)
        outcome = ""
        lr = _rng(seed, gen, slot, j, _LOCAL)
        if ls_slots is None:
            apply_ls = lr.random() < config.p_local_search
        else:
            apply_ls = (slot, j) in ls_slots
        if kinds and apply_ls:
            child, outcome = local_search(child, instance, config.n_l, lr, kinds)
        out.append((child, outcome))
    return out


def evolve(
    instance: ProblemInstance,
    config: RunConfig,
    observer: Optional[Callable[[int, list[Genome]], None]] = None,
    threads: Optional[int] = None,
    wallclock: bool = True,
) -> RunResult:
    """Run the memetic algorithm and return the best composition found.

    Offspring slots draw from their own seed sub-streams, so the result does
    not depend on ``threads``.
    """
    from .ingest import digest

    threads = threads or thread_count()
    t0 = time.perf_counter()
    pop = init_population(instance, config)
    if observer:
        observer(0, pop)

    def stats(gen: int, counts=(0, 0, 0)) -> GenerationStats:
        fs = [g.f for g in pop]
        ms = (time.perf_counter() - t0) * 1000.0 if wallclock else 0.0
        std = statistics.pstdev(fs) if len(fs) > 1 else 0.0
        return GenerationStats(gen, min(fs), statistics.fmean(fs), std, ms, *counts)

    rows = [stats(0)]
    clamps = sum(g.fitness.clamped for g in pop)
    best = pop[_ranked(pop)[0]]
    n_children = config.population_size - config.elitism
    n_slots = math.ceil(n_children / 2)
    pool = ThreadPoolExecutor(threads) if threads > 1 and n_slots > 1 else None
    try:
        for gen in range(1, config.generations + 1):
            order = _ranked(pop)
            elites = [pop[i] for i in order[: config.elitism]]
            ls_slots = None
            if config.ls_granularity == "generation" and n_children > 0:
                g = _rng(config.seed, gen, _LOCAL)
                pick = int(g.integers(n_children))
                ls_slots = {(pick // 2, pick % 2)}

            def work(slot, pop=pop, gen=gen, ls_slots=ls_slots):
                return _breed(slot, gen, pop, instance, config, ls_slots)

            if pool is not None:
                batches = list(pool.map(work, range(n_slots)))
            else:
                batches = [work(s) for s in range(n_slots)]
            offspring = [pair for batch in batches for pair in batch][:n_children]
            counts = [0, 0, 0]
            for _, outcome in offspring:
                if outcome == TYPE1:
                    counts[0] += 1
                elif outcome == TYPE2:
                    counts[1] += 1
                elif outcome == NONE:
                    counts[2] += 1
            pop = elites + [g for g, _ in offspring]
            clamps += sum(g.fitness.clamped for g, _ in offspring)
            if observer:
                observer(gen, pop)
            cand = pop[_ranked(pop)[0]]
            if cand.f < best.f:
                best = cand
            rows.append(stats(gen, tuple(counts)))
    finally:
        if pool is not None:
            pool.shutdown()

    return RunResult(
        best=best,
        generations=rows,
        config=config,
        instance_digest=digest(instance),
        wall_ms=(time.perf_counter() - t0) * 1000.0,
        clamp_count=clamps,
    )


def config_dict(config: RunConfig) -> dict:
    return asdict(config)
