"""Run the bundled reproductions and print each pipeline's checks.

    python scripts/run_reproductions.py --scale desk --out runs/ tk-fig1 bistable-fig4
    python scripts/run_reproductions.py --all --scale desk --out runs/
"""
import argparse
import sys
import time
from pathlib import Path

from ddjump import experiments


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="*", help=f"any of {', '.join(experiments.NAMES)}")
    p.add_argument("--all", action="store_true")
    p.add_argument("--scale", default="desk", choices=("desk", "paper"))
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="ddjump-out")
    args = p.parse_args(argv)
    names = list(experiments.NAMES) if args.all else args.names
    if not names:
        p.error("name at least one reproduction or pass --all")
    failed = []
    for name in names:
        t0 = time.time()
        summary = experiments.run(name, Path(args.out) / name, args.scale, args.seed, args.workers)
        for check, ok in summary["checks"].items():
            print(f"{'PASS' if ok else 'FAIL'} {name}: {check}")
        print(f"{name}: {time.time() - t0:.0f}s")
        if not summary["passed"]:
            failed.append(name)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
