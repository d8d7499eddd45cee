"""Run every named reproduction and print a one-line summary per example.

    python3 scripts/run_examples.py [--out runs] [--grid-scale 1.0]
"""
import argparse
import sys
import time
from pathlib import Path

from loopdress import catalog
from loopdress.cli import paper_example


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--out", default="runs")
    p.add_argument("--grid-scale", type=float, default=1.0)
    args = p.parse_args()
    failed = []
    for name in catalog.NAMES:
        t0 = time.perf_counter()
        rep = paper_example(name, Path(args.out) / name, args.grid_scale, log=lambda *_: None)
        n_ok = sum(c["passed"] for c in rep["checks"])
        print(f"{name:<16s} {n_ok}/{len(rep['checks'])} checks  {time.perf_counter() - t0:6.2f}s")
        if not rep["passed"]:
            failed.append(name)
    if failed:
        print("failed:", ", ".join(failed))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
