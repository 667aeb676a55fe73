"""Domain types for distributed data-intensive service composition.

Everything here is immutable after construction.  Services are addressed
internally by their index in the repository; genomes and workflow graphs
hold those integer indices, and ``Service.id`` is only used for I/O.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

log = logging.getLogger(__name__)

START = -1
END = -2

MATCHING_MODES = ("subsumption", "strict")
EQ_MODES = ("once", "literal")
PROVIDER_MODES = ("earliest", "nearest")


class InstanceError(ValueError):
    """Raised for malformed problem instances."""


class Taxonomy:
    """A forest of concepts, stored as a child -> parent map."""

    def __init__(self, parents: Mapping[str, Optional[str]]):
        self.parents: dict[str, Optional[str]] = dict(parents)
        for c, p in self.parents.items():
            if p is not None and p not in self.parents:
                raise InstanceError(f"concept {c!r} has unknown parent {p!r}")
        self._ancestors: dict[str, frozenset[str]] = {}
        for c in self.parents:
            self.ancestors_or_self(c)

    def __contains__(self, concept: str) -> bool:
        return concept in self.parents

    def __len__(self) -> int:
        return len(self.parents)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Taxonomy) and self.parents == other.parents

    def ancestors_or_self(self, concept: str) -> frozenset[str]:
        cached = self._ancestors.get(concept)
        if cached is not None:
            return cached
        if concept not in self.parents:
            raise InstanceError(f"unknown concept: {concept}")
        chain = []
        seen = set()
        c: Optional[str] = concept
        while c is not None:
            if c in seen:
                raise InstanceError(f"taxonomy cycle through {c!r}")
            seen.add(c)
            chain.append(c)
            c = self.parents[c]
        result = frozenset(chain)
        self._ancestors[concept] = result
        return result

    @classmethod
    def flat(cls, concepts: Iterable[str]) -> "Taxonomy":
        return cls({c: None for c in concepts})


def subsumes(taxonomy: Taxonomy, provided: str, wanted: str) -> bool:
    """True if ``provided`` is ``wanted`` or one of its descendants."""
    if wanted not in taxonomy:
        raise InstanceError(f"unknown concept: {wanted}")
    return wanted in taxonomy.ancestors_or_self(provided)


@dataclass(frozen=True)
class DataItem:
    id: str
    provision_cost: float
    size: float
    location: tuple[float, float]
    access_latency: float


@dataclass(frozen=True)
class Service:
    id: str
    inputs: frozenset[str]
    outputs: frozenset[str]
    proc_time: float = 0.0
    service_cost: float = 0.0
    data_items: tuple[DataItem, ...] = ()
    location: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class Task:
    provided: frozenset[str]
    wanted: frozenset[str]

    def __post_init__(self):
        if not self.provided or not self.wanted:
            raise InstanceError("task needs non-empty provided and wanted sets")


def _max_pairwise_distance(points: Sequence[tuple[float, float]]) -> float:
    import numpy as np
    from scipy.spatial import ConvexHull
    from scipy.spatial.distance import pdist

    if len(points) < 2:
        return 0.0
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 2000:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:  # collinear input; fall through to brute force
            pass
    return float(pdist(pts).max())


@dataclass(frozen=True)
class NetworkModel:
    """Locations, normalised Euclidean distances and link bandwidths.

    ``bandwidth`` is keyed by the sorted pair of endpoint ids.
    """

    locations: Mapping[str, tuple[float, float]]
    bandwidth: Mapping[tuple[str, str], float] = field(default_factory=dict)
    propagation_factor: float = 1.0
    comm_cost_factor: float = 1.0

    @cached_property
    def scale(self) -> float:
        return _max_pairwise_distance(list(self.locations.values()))

    def distance(self, x: str, y: str) -> float:
        return self.point_distance(self.locations[x], self.locations[y])

    def point_distance(self, a: tuple[float, float], b: tuple[float, float]) -> float:
        if self.scale == 0.0:
            return 0.0
        return min(1.0, math.hypot(a[0] - b[0], a[1] - b[1]) / self.scale)

    def link_bandwidth(self, x: str, y: str) -> float:
        key = (x, y) if x <= y else (y, x)
        try:
            return self.bandwidth[key]
        except KeyError:
            raise InstanceError(f"no bandwidth for link {x} <-> {y}") from None

    def propagation(self, x: str, y: str) -> float:
        return self.propagation_factor * self.distance(x, y)

    def comm_cost(self, x: str, y: str) -> float:
        return self.comm_cost_factor * self.distance(x, y)


@dataclass(frozen=True)
class FitnessBreakdown:
    total_time: float
    total_cost: float
    norm_time: float
    norm_cost: float
    fitness: float
    clamped: bool = False


@dataclass(frozen=True)
class WorkflowDag:
    """A decoded composition.

    ``services`` lists the service indices in decoding (selection) order.
    ``edges`` maps (producer, consumer) to the concepts carried; START and
    END are the virtual endpoints.
    """

    services: tuple[int, ...]
    edges: Mapping[tuple[int, int], frozenset[str]]

    @cached_property
    def nodes(self) -> tuple[int, ...]:
        return (START, *self.services, END)

    @cached_property
    def successors(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {n: [] for n in self.nodes}
        for p, s in self.edges:
            out[p].append(s)
        return out

    @cached_property
    def predecessors(self) -> dict[int, list[int]]:
        inc: dict[int, list[int]] = {n: [] for n in self.nodes}
        for p, s in self.edges:
            inc[s].append(p)
        return inc

    def service_edges(self) -> list[tuple[int, int]]:
        return [(p, s) for p, s in self.edges if p >= 0 and s >= 0]

    def topological_order(self) -> list[int]:
        indeg = {n: len(self.predecessors[n]) for n in self.nodes}
        ready = [n for n in self.nodes if indeg[n] == 0]
        order = []
        while ready:
            n = ready.pop()
            order.append(n)
            for m in self.successors[n]:
                indeg[m] -= 1
                if indeg[m] == 0:
                    ready.append(m)
        if len(order) != len(self.nodes):
            raise InstanceError("workflow graph has a cycle")
        return order

    def to_dot(self, names: Optional[Sequence[str]] = None) -> str:
        def label(n: int) -> str:
            if n == START:
                return "start"
            if n == END:
                return "end"
            return names[n] if names is not None else f"s{n}"

        lines = ["digraph composition {", "  rankdir=LR;"]
        for n in self.nodes:
            shape = "box" if n >= 0 else "ellipse"
            lines.append(f'  "{label(n)}" [shape={shape}];')
        for (p, s), concepts in sorted(self.edges.items()):
            text = ",".join(sorted(concepts))
            lines.append(f'  "{label(p)}" -> "{label(s)}" [label="{text}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Genome:
    """A duplicate-free service ordering with its decoded graph and fitness."""

    sequence: tuple[int, ...]
    dag: WorkflowDag
    fitness: FitnessBreakdown

    @property
    def f(self) -> float:
        return self.fitness.fitness

    def __len__(self) -> int:
        return len(self.sequence)


@dataclass(frozen=True)
class ProblemInstance:
    repository: tuple[Service, ...]
    taxonomy: Taxonomy
    task: Task
    network: NetworkModel
    weights: tuple[float, float] = (0.5, 0.5)
    matching: str = "subsumption"
    eq_interpretation: str = "once"
    provider_choice: str = "earliest"
    meta: Mapping[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        wt, wc = self.weights
        if wt < 0 or wc < 0 or not math.isclose(wt + wc, 1.0, abs_tol=1e-9):
            raise InstanceError(f"weights must be nonnegative and sum to 1, got {self.weights}")
        if self.matching not in MATCHING_MODES:
            raise InstanceError(f"unknown matching mode {self.matching!r}")
        if self.eq_interpretation not in EQ_MODES:
            raise InstanceError(f"unknown eq interpretation {self.eq_interpretation!r}")
        if self.provider_choice not in PROVIDER_MODES:
            raise InstanceError(f"unknown provider choice {self.provider_choice!r}")
        for c in self.task.provided | self.task.wanted:
            if c not in self.taxonomy:
                raise InstanceError(f"unknown concept in task: {c}")

    @property
    def n(self) -> int:
        return len(self.repository)

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.repository)

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {s.id: i for i, s in enumerate(self.repository)}

    @cached_property
    def index(self) -> "InstanceIndex":
        return InstanceIndex(self)

    @cached_property
    def bounds(self) -> tuple[float, float]:
        from .evaluator import compute_bounds

        return compute_bounds(self)


INF_LAYER = math.inf


class InstanceIndex:
    """Lookup tables derived once per instance for fast decoding/evaluation."""

    def __init__(self, inst: ProblemInstance):
        from .evaluator import service_cost, service_time

        tax = inst.taxonomy
        strict = inst.matching == "strict"

        def cover(concepts: Iterable[str]) -> frozenset[str]:
            if strict:
                return frozenset(concepts)
            out: set[str] = set()
            for c in concepts:
                out |= tax.ancestors_or_self(c)
            return frozenset(out)

        for s in inst.repository:
            for c in s.inputs | s.outputs:
                if c not in tax:
                    raise InstanceError(f"service {s.id} uses unknown concept {c}")

        self.inputs: list[tuple[str, ...]] = [tuple(sorted(s.inputs)) for s in inst.repository]
        self.covers: list[frozenset[str]] = [cover(s.outputs) for s in inst.repository]
        self.start_covers = cover(inst.task.provided)
        self.wanted = tuple(sorted(inst.task.wanted))

        # forward chaining: layer k services are enabled by layers < k
        n = inst.n
        self.layer: list[float] = [INF_LAYER] * n
        available = set(self.start_covers)
        pending = [i for i in range(n)]
        k = 0
        while pending:
            k += 1
            ready = [i for i in pending if all(c in available for c in self.inputs[i])]
            if not ready:
                break
            for i in ready:
                self.layer[i] = k
                available |= self.covers[i]
            ready_set = set(ready)
            pending = [i for i in pending if i not in ready_set]
        self.closure = frozenset(available)
        self.feasible = all(c in available for c in self.wanted)

        self.producers: dict[str, list[int]] = {}
        for i in range(n):
            if self.layer[i] == INF_LAYER:
                continue
            for c in self.covers[i]:
                self.producers.setdefault(c, []).append(i)

        # consumers: services with at least one input matched by concept c's cover
        self.consumers_of: dict[str, list[int]] = {}
        for i in range(n):
            for c in self.inputs[i]:
                self.consumers_of.setdefault(c, []).append(i)

        net = inst.network
        self.coords: list[tuple[float, float]] = [s.location for s in inst.repository]
        self.scale = net.scale
        self.prop = net.propagation_factor
        self.comm = net.comm_cost_factor
        mode = inst.eq_interpretation
        self.time: list[float] = [service_time(s, net, mode) for s in inst.repository]
        self.cost: list[float] = [service_cost(s, net, mode) for s in inst.repository]

    def distance(self, a: int, b: int) -> float:
        if a < 0 or b < 0 or self.scale == 0.0:
            return 0.0
        pa, pb = self.coords[a], self.coords[b]
        return min(1.0, math.hypot(pa[0] - pb[0], pa[1] - pb[1]) / self.scale)

    def consumers_matching(self, covered: frozenset[str]) -> set[int]:
        """Services with at least one input satisfied by the covered concepts."""
        out: set[int] = set()
        for c in covered:
            out.update(self.consumers_of.get(c, ()))
        return out
