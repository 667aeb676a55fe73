import os
import sys

import numpy as np
import pytest
from hypothesis import settings

from dwsc.model import DataItem, NetworkModel, ProblemInstance, Service, Task, Taxonomy

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

# keeps the unit square's diagonal out of fixtures: scale is set by this pair
ANCHORS = {"@origin": (0.0, 0.0), "@far": (1.0, 0.0)}


def make_service(sid, inputs, outputs, loc=(0.0, 0.0), proc=0.0, cost=0.0, items=()):
    return Service(sid, frozenset(inputs), frozenset(outputs), proc, cost, tuple(items), loc)


def make_instance(services, provided, wanted, concepts=None, parents=None, bandwidth=None, **options):
    """Instance with an explicit network; distances are raw Euclidean because
    the anchor pair fixes the normalisation scale at 1."""
    names = set(provided) | set(wanted)
    for s in services:
        names |= s.inputs | s.outputs
    if parents is not None:
        tax = Taxonomy(parents)
    else:
        tax = Taxonomy.flat(sorted(names | set(concepts or ())))
    locations = dict(ANCHORS)
    bws = dict(bandwidth or {})
    for s in services:
        locations[s.id] = s.location
        for d in s.data_items:
            locations[d.id] = d.location
            key = tuple(sorted((d.id, s.id)))
            bws.setdefault(key, 1.0)
    net = NetworkModel(locations, bws)
    return ProblemInstance(tuple(services), tax, Task(frozenset(provided), frozenset(wanted)), net, **options)


@pytest.fixture
def toy():
    """S1: a->b, S2: b->d, S3: a->d, S4: c->d; task a => d."""
    return make_instance(
        [
            make_service("S1", ["a"], ["b"], loc=(0.0, 0.0), proc=0.2, cost=0.2),
            make_service("S2", ["b"], ["d"], loc=(0.1, 0.0), proc=0.2, cost=0.2),
            make_service("S3", ["a"], ["d"], loc=(0.9, 0.0), proc=0.9, cost=0.9),
            make_service("S4", ["c"], ["d"], loc=(0.5, 0.0), proc=0.1, cost=0.1),
        ],
        provided=["a"],
        wanted=["d"],
    )


def ids(instance, names):
    return tuple(instance.index_of[n] for n in names)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class ScriptedRng:
    """Wraps a Generator but returns scripted values from ``integers``."""

    def __init__(self, integers, seed=0):
        self._ints = list(integers)
        self._rng = np.random.default_rng(seed)

    def integers(self, *args, **kwargs):
        if self._ints:
            return self._ints.pop(0)
        return self._rng.integers(*args, **kwargs)

    def __getattr__(self, name):
        return getattr(self._rng, name)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} -- {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
