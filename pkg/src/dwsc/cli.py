"""Command-line interface: gen, augment, validate, run, bench.

Exit codes: 0 ok, 1 bad flags, 2 unreadable or malformed instance,
3 infeasible instance.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path
from typing import Optional, Sequence

from .decoder import InfeasibleInstance, forward_feasible
from .engine import ABLATIONS, RunConfig, RunResult, evolve, thread_count
from .ingest import (
    AugmentationParams,
    ParseError,
    build_instance,
    digest,
    generate_synthetic,
    load_bundle,
    parse_wsc,
    save_bundle,
)
from .suite import DESK_SUITE, SUITE_SEED
from .model import EQ_MODES, MATCHING_MODES, PROVIDER_MODES, InstanceError, ProblemInstance

log = logging.getLogger("dwsc")

RESULT_SCHEMA = "dwsc-result/1"
GENERATION_COLUMNS = [
    "generation", "best_f", "mean_f", "std_f", "elapsed_ms",
    "ls_t1_improved", "ls_t2_improved", "ls_none",
]
SUMMARY_COLUMNS = ["instance", "variant", "runs", "mean_f", "std_f", "mean_ms", "std_ms"]
IMPROVEMENT_COLUMNS = ["instance", "variant", "pct_type1", "pct_type2", "pct_none"]
RUNS_COLUMNS = ["instance", "variant", "seed", "best_f", "total_time", "total_cost", "wall_ms", "ls_t1", "ls_t2", "ls_none"]
DEFAULT_VARIANTS = ("full", "no_local_search", "type1_only")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(x: float) -> str:
    return repr(float(x))


# -- instance loading --------------------------------------------------------


def _add_instance_flags(p: argparse.ArgumentParser, required: bool = False) -> None:
    g = p.add_argument_group("instance")
    g.add_argument("--instance", action="append", help="instance bundle JSON (repeatable for bench)")
    g.add_argument("--services", help="WSC services XML")
    g.add_argument("--taxonomy", help="WSC taxonomy XML")
    g.add_argument("--problem", help="WSC problem/task XML")
    g.add_argument("--coords", help="coordinates CSV (id,lat,lon); default synthetic-uniform")
    g.add_argument("--aug-seed", type=int, default=0, help="augmentation seed for XML input")
    g.add_argument("--matching", choices=MATCHING_MODES, default="subsumption")
    g.add_argument("--eq-interpretation", choices=EQ_MODES, default="once")
    g.add_argument("--provider-choice", choices=PROVIDER_MODES, default="earliest")


def _instance_options(args) -> dict:
    return {
        "matching": args.matching,
        "eq_interpretation": args.eq_interpretation,
        "provider_choice": args.provider_choice,
    }


def _load_instances(args) -> list[tuple[str, ProblemInstance]]:
    opts = _instance_options(args)
    if args.instance:
        return [(Path(p).stem, load_bundle(p, **opts)) for p in args.instance]
    if args.services and args.taxonomy and args.problem:
        repo, tax, task = parse_wsc(args.services, args.taxonomy, args.problem)
        params = AugmentationParams(
            seed=args.aug_seed, coordinate_source=args.coords or "synthetic-uniform"
        )
        return [(Path(args.services).stem, build_instance(repo, tax, task, params, **opts))]
    raise UsageError("provide --instance or the --services/--taxonomy/--problem triplet")


# -- run ---------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.name == "ablation":
            g.add_argument(flag, choices=sorted(ABLATIONS), default=f.default)
        elif f.name == "ls_granularity":
            g.add_argument(flag, choices=("individual", "generation"), default=f.default)
        else:
            g.add_argument(flag, type=type(f.default), default=f.default)
    g.add_argument("--no-wallclock", action="store_true", help="write elapsed_ms as 0 so CSVs are reproducible")


def _config(args, **overrides) -> RunConfig:
    values = {f.name: getattr(args, f.name) for f in fields(RunConfig)}
    values.update(overrides)
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def write_generations(result: RunResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GENERATION_COLUMNS)
        for g in result.generations:
            w.writerow([
                g.generation, _fmt(g.best_f), _fmt(g.mean_f), _fmt(g.std_f),
                f"{g.elapsed_ms:.3f}", g.ls_t1_improved, g.ls_t2_improved, g.ls_none,
            ])


def result_json(result: RunResult, instance: ProblemInstance) -> dict:
    names = instance.names
    best = result.best
    t1, t2, none = result.improvement_counts()
    return {
        "schema": RESULT_SCHEMA,
        "instance_digest": result.instance_digest,
        "config": asdict(result.config),
        "instance_options": {
            "matching": instance.matching,
            "eq_interpretation": instance.eq_interpretation,
            "provider_choice": instance.provider_choice,
            "weights": list(instance.weights),
            "bounds": list(instance.bounds),
        },
        "best": {
            "sequence": [names[s] for s in best.sequence],
            "services": [names[s] for s in best.dag.services],
            "edges": [
                [names[p] if p >= 0 else ("start" if p == -1 else "end"),
                 names[s] if s >= 0 else ("start" if s == -1 else "end"),
                 sorted(c)]
                for (p, s), c in sorted(best.dag.edges.items())
            ],
            "fitness": asdict(best.fitness),
        },
        "generations": len(result.generations) - 1,
        "local_search": {"type1_improved": t1, "type2_improved": t2, "none": none},
        "clamp_count": result.clamp_count,
        "wall_ms": result.wall_ms,
    }


def cmd_run(args) -> int:
    [(name, instance)] = _load_instances(args)[:1]
    config = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = evolve(instance, config, wallclock=not args.no_wallclock)
    write_generations(result, out / "generations.csv")
    (out / "result.json").write_text(json.dumps(result_json(result, instance), indent=1) + "\n")
    (out / "best.dot").write_text(result.best.dag.to_dot(instance.names))
    print(f"{name}: best F = {result.best.f:.6f}  "
          f"(T={result.best.fitness.total_time:.4f}, C={result.best.fitness.total_cost:.4f}, "
          f"{len(result.best.dag.services)} services)  wall-clock {result.wall_ms / 1000:.2f} s")
    return 0


# -- bench -------------------------------------------------------------------


def _bench_job(job):
    name, bundle_path, opts, config, job_dir = job
    instance = load_bundle(bundle_path, **opts)
    result = evolve(instance, config, threads=1)
    job_dir = Path(job_dir)
    job_dir.mkdir(parents=True, exist_ok=True)
    write_generations(result, job_dir / "generations.csv")
    t1, t2, none = result.improvement_counts()
    fb = result.best.fitness
    return (name, config.ablation, config.seed, fb.fitness, fb.total_time, fb.total_cost,
            result.wall_ms, t1, t2, none)


def _mean_std(xs: Sequence[float]) -> tuple[float, float]:
    if len(xs) == 1:
        return xs[0], 0.0
    return statistics.fmean(xs), statistics.stdev(xs)


def summarise(rows: Sequence[tuple]) -> tuple[list[list], list[list]]:
    """Aggregate per-run rows into summary and improvement tables."""
    groups: dict[tuple[str, str], list[tuple]] = {}
    for r in rows:
        groups.setdefault((r[0], r[1]), []).append(r)
    summary, improvements = [], []
    for (inst, variant), rs in groups.items():
        mf, sf = _mean_std([r[3] for r in rs])
        mm, sm = _mean_std([r[6] for r in rs])
        summary.append([inst, variant, len(rs), mf, sf, mm, sm])
        t1, t2, none = (sum(r[k] for r in rs) for k in (7, 8, 9))
        total = t1 + t2 + none
        if total == 0:
            pct = (0.0, 0.0, 100.0)
        else:
            pct = tuple(round(100.0 * v / total, 2) for v in (t1, t2, none))
        improvements.append([inst, variant, *pct])
    return summary, improvements


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in r])


def cmd_bench(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in ABLATIONS:
            raise UsageError(f"unknown variant {v!r}")
    if args.runs < 1:
        raise UsageError("--runs must be positive")
    opts = _instance_options(args)
    jobs = []
    for name, instance in _load_instances(args):
        if not instance.index.feasible:
            raise InfeasibleInstance(f"{name}: task cannot be satisfied by the repository")
        bundle = out / "instances" / f"{name}.json"
        bundle.parent.mkdir(parents=True, exist_ok=True)
        save_bundle(instance, bundle)
        for variant in variants:
            for r in range(args.runs):
                config = _config(args, ablation=variant, seed=args.seed + r)
                job_dir = out / "jobs" / name / variant / f"seed{config.seed}"
                jobs.append((name, str(bundle), opts, config, str(job_dir)))
    workers = min(thread_count(), len(jobs))
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_bench_job, jobs))
    else:
        rows = [_bench_job(j) for j in jobs]
    summary, improvements = summarise(rows)
    _write_csv(out / "runs.csv", RUNS_COLUMNS, rows)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    _write_csv(out / "improvements.csv", IMPROVEMENT_COLUMNS, improvements)
    for row in summary:
        print(f"{row[0]:>16} {row[1]:>16}  F = {row[3]:.5f} +- {row[4]:.5f}  "
              f"time = {row[5] / 1000:.2f} +- {row[6] / 1000:.2f} s")
    print(f"{len(jobs)} runs in {time.perf_counter() - t0:.1f} s")
    return 0


# -- gen / augment / validate ------------------------------------------------


def _items_range(text: str) -> tuple[int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1:
        return parts[0], parts[0]
    if len(parts) == 2:
        return parts[0], parts[1]
    raise argparse.ArgumentTypeError("expected N or LO,HI")


def cmd_gen(args) -> int:
    opts = _instance_options(args)
    sizes = (args.n_services, args.n_concepts, args.layers)
    seed = args.seed
    if args.suite:
        sizes = DESK_SUITE[args.suite]
        seed = SUITE_SEED if seed is None else seed
    if None in sizes:
        raise UsageError("provide --suite or all of --n-services, --n-concepts, --layers")
    try:
        instance = generate_synthetic(*sizes, _items_range(args.items_per_service), seed or 0, **opts)
    except InstanceError as exc:
        raise UsageError(str(exc)) from exc
    save_bundle(instance, args.out)
    print(f"wrote {args.out}: {instance.n} services, {len(instance.taxonomy)} concepts")
    return 0


def cmd_augment(args) -> int:
    repo, tax, task = parse_wsc(args.services, args.taxonomy, args.problem)
    params = AugmentationParams(
        seed=args.aug_seed,
        data_size=args.data_size,
        bandwidth_mean=args.bandwidth_mean,
        bandwidth_std=args.bandwidth_std,
        items_per_service=_items_range(args.items_per_service),
        coordinate_source=args.coords or "synthetic-uniform",
    )
    instance = build_instance(repo, tax, task, params, **_instance_options(args))
    save_bundle(instance, args.out)
    print(f"wrote {args.out}: {instance.n} services, digest {digest(instance)}")
    return 0


def audit(instance: ProblemInstance) -> list[str]:
    """Invariant audit of a loaded instance."""
    problems = []
    net = instance.network
    ids = list(net.locations)
    sample = ids if len(ids) <= 300 else ids[:: max(1, len(ids) // 300)]
    for a in sample:
        if net.distance(a, a) != 0.0:
            problems.append(f"distance({a},{a}) != 0")
        for b in sample:
            d = net.distance(a, b)
            if d > 1.0 or d < 0.0 or d != net.distance(b, a):
                problems.append(f"distance({a},{b}) violates metric bounds")
    for key, bw in net.bandwidth.items():
        if not 0.0 < bw <= 1.0:
            problems.append(f"bandwidth {key} = {bw} outside (0,1]")
    for s in instance.repository:
        for d in s.data_items:
            try:
                net.link_bandwidth(d.id, s.id)
            except InstanceError as exc:
                problems.append(str(exc))
    return problems


def cmd_validate(args) -> int:
    status = 0
    for name, instance in _load_instances(args):
        feasible = forward_feasible(instance.repository, instance.task, instance.taxonomy, instance.matching)
        problems = audit(instance)
        print(f"{name}: {instance.n} services, feasible={feasible}, "
              f"reachable={sum(1 for x in instance.index.layer if x != float('inf'))}, "
              f"bounds=({instance.bounds[0]:.4f}, {instance.bounds[1]:.4f})")
        for p in problems:
            print(f"  violation: {p}")
        if problems:
            status = max(status, 2)
        if not feasible:
            status = 3
    return status


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dwsc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic instance bundle")
    p.add_argument("--suite", choices=sorted(DESK_SUITE), help="use a named desk-suite size")
    p.add_argument("--n-services", type=int)
    p.add_argument("--n-concepts", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--items-per-service", default="1")
    p.add_argument("--seed", type=int, default=None, help=f"default 0, or {SUITE_SEED} with --suite")
    p.add_argument("--out", required=True)
    p.add_argument("--matching", choices=MATCHING_MODES, default="subsumption")
    p.add_argument("--eq-interpretation", choices=EQ_MODES, default="once")
    p.add_argument("--provider-choice", choices=PROVIDER_MODES, default="earliest")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("augment", help="augment a WSC XML triplet into an instance bundle")
    _add_instance_flags(p)
    p.add_argument("--data-size", type=float, default=3.0)
    p.add_argument("--bandwidth-mean", type=float, default=0.5)
    p.add_argument("--bandwidth-std", type=float, default=0.15)
    p.add_argument("--items-per-service", default="1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("validate", help="feasibility check and invariant audit")
    _add_instance_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run the memetic algorithm once")
    _add_instance_flags(p)
    _add_config_flags(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="repeated runs of several variants")
    _add_instance_flags(p)
    _add_config_flags(p)
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--variants", default=",".join(DEFAULT_VARIANTS))
    p.add_argument("--out", default="bench")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 1
    if args.command == "augment" and not (args.services and args.taxonomy and args.problem):
        parser.print_usage(sys.stderr)
        print("dwsc augment: error: --services, --taxonomy and --problem are required", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"dwsc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except InfeasibleInstance as exc:
        print(f"dwsc {args.command}: infeasible instance: {exc}", file=sys.stderr)
        return 3
    except (InstanceError, OSError, ValueError) as exc:
        print(f"dwsc {args.command}: cannot read instance: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
