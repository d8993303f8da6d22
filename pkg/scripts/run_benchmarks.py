#!/usr/bin/env python3
"""Run every experiment spec under scripts/specs/ and collect the results.

Usage: python scripts/run_benchmarks.py [--only NAME ...] [--out DIR]
Set DDE_THREADS to parallelize replications.
"""

import argparse
from pathlib import Path

from dde.bench import ExperimentSpec, run_benchmark, write_benchmark

SPEC_DIR = Path(__file__).parent / "specs"


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--only", nargs="*", help="spec stems to run")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in sorted(SPEC_DIR.glob("*.toml")):
        if args.only and path.stem not in args.only:
            continue
        print(f"== {path.stem} ==")
        spec = ExperimentSpec.from_file(path)
        result = run_benchmark(spec)
        json_path, csv_path = write_benchmark(result, out_dir / path.stem)
        for entry in result["aggregate"]:
            print("  ", {k: v for k, v in entry.items()
                         if not isinstance(v, list)})
        print(f"   -> {json_path}, {csv_path}")


if __name__ == "__main__":
    main()
