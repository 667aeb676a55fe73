"""Benchmark the full algorithm against its ablations on the desk suite.

Runs ``dwsc bench`` over the three synthetic instances and prints two
markdown tables: mean final fitness and wall-clock per variant, and the
share of local-search invocations improved by each neighbourhood.

    python scripts/reproduce_tables.py --runs 30 --out results/
"""

import argparse
import csv
import sys
from pathlib import Path

from dwsc.cli import main as dwsc_main
from dwsc.ingest import save_bundle
from dwsc.suite import DESK_SUITE, desk_instance


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--runs", type=int, default=30)
    ap.add_argument("--population-size", type=int, default=100)
    ap.add_argument("--generations", type=int, default=100)
    ap.add_argument("--variants", default="full,no_local_search,type1_only,type2_only")
    ap.add_argument("--instances", default=",".join(DESK_SUITE))
    args = ap.parse_args()

    out = Path(args.out)
    (out / "instances").mkdir(parents=True, exist_ok=True)
    bench = ["bench", "--runs", str(args.runs), "--variants", args.variants, "--out", str(out),
             "--population-size", str(args.population_size), "--generations", str(args.generations)]
    for name in args.instances.split(","):
        path = out / "instances" / f"{name}.json"
        save_bundle(desk_instance(name), path)
        bench += ["--instance", str(path)]
    code = dwsc_main(bench)
    if code:
        sys.exit(code)

    print("\n| instance | variant | mean F | std F | mean time (s) |")
    print("|---|---|---|---|---|")
    for r in read(out / "summary.csv"):
        print(f"| {r['instance']} | {r['variant']} | {float(r['mean_f']):.5f} | {float(r['std_f']):.5f} "
              f"| {float(r['mean_ms']) / 1000:.2f} |")
    print("\n| instance | variant | Type-I % | Type-II % | none % |")
    print("|---|---|---|---|---|")
    for r in read(out / "improvements.csv"):
        print(f"| {r['instance']} | {r['variant']} | {r['pct_type1']} | {r['pct_type2']} | {r['pct_none']} |")


if __name__ == "__main__":
    main()
