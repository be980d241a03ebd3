#!/usr/bin/env python3
"""Run the reduction differential harnesses on random seeded inputs.

Each harness compares answers before and after one problem reduction,
using exact decision procedures or the bounded brute-force oracle, and
raises on any disagreement.
"""
import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "tests"))

from differentials import ALL  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0, help="first seed (default 0)")
    ap.add_argument("--cases", type=int, default=55, help="seeds per harness (default 55)")
    ap.add_argument("--only", choices=sorted(ALL), action="append",
                    help="run only this harness (repeatable)")
    args = ap.parse_args()
    names = args.only or sorted(ALL)
    failures = 0
    for name in names:
        t0 = time.perf_counter()
        try:
            checked, skipped = ALL[name](range(args.seed, args.seed + args.cases))
        except AssertionError as exc:
            print(f"{name:28s} DISAGREEMENT {exc}")
            failures += 1
            continue
        dt = time.perf_counter() - t0
        print(f"{name:28s} checked={checked:3d} skipped={skipped:3d} {dt:6.1f}s")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
