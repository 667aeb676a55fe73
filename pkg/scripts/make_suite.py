"""Write the synthetic desk-suite instance bundles (syn100, syn300, syn500) to a directory."""

import argparse
from pathlib import Path

from dwsc.ingest import digest, save_bundle
from dwsc.suite import DESK_SUITE, SUITE_SEED, desk_instance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="instances")
    ap.add_argument("--seed", type=int, default=SUITE_SEED)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in DESK_SUITE:
        inst = desk_instance(name, args.seed)
        path = out / f"{name}.json"
        save_bundle(inst, path)
        print(f"{path}: {inst.n} services, digest {digest(inst)}")


if __name__ == "__main__":
    main()
