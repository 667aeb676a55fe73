"""The synthetic desk-scale benchmark instances used by experiments and acceptance checks."""

from __future__ import annotations

from .ingest import generate_synthetic
from .model import ProblemInstance

SUITE_SEED = 2026

# name -> (services, concepts, layers)
DESK_SUITE = {
    "syn100": (100, 60, 6),
    "syn300": (300, 150, 8),
    "syn500": (500, 250, 10),
}


def desk_instance(name: str, seed: int = SUITE_SEED, **options) -> ProblemInstance:
    n, concepts, layers = DESK_SUITE[name]
    return generate_synthetic(n, concepts, layers, 1, seed, **options)
