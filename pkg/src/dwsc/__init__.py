"""Memetic algorithm for composing distributed data-intensive web services."""

from .decoder import decode_backward, decode_genome, dedup, forward_feasible, strip_redundant, validate
from .engine import RunConfig, RunResult, evolve, init_population
from .evaluator import compute_bounds, fitness, service_cost, service_time, total_cost, total_time
from .ingest import AugmentationParams, augment, generate_synthetic, load_bundle, parse_wsc, save_bundle
from .model import (
    END,
    START,
    DataItem,
    FitnessBreakdown,
    Genome,
    NetworkModel,
    ProblemInstance,
    Service,
    Task,
    Taxonomy,
    WorkflowDag,
    subsumes,
)

__version__ = "0.1.0"
