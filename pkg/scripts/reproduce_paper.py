"""Run every measurement at desk scale and print the acceptance table.

    python3 scripts/reproduce_paper.py --seed 0 --out reproduce_out
"""

import argparse
import sys

from qdcascade.reproduce import reproduce_paper


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="reproduce_out")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--scale", type=float, default=1.0)
    args = p.parse_args()
    report = reproduce_paper(args.seed, args.out, args.workers, args.scale, progress=lambda s: print(f"[{s}]", file=sys.stderr))
    print(report.summary())
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
