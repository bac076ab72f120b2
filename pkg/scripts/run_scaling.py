"""Query-count scaling sweep on the default BSM instance.

Prints mean queries per method and epsilon, then the log-log slope of
queries against 1/epsilon.  Classical methods should sit near 2, the quantum
bounded-variance pipelines near 1.

    python3 scripts/run_scaling.py --trials 3 --seed 0 --out out/scaling
"""

from __future__ import annotations

import argparse
from pathlib import Path

from qcva.experiments import ScalingConfig, run_scaling
from qcva.io import write_table


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eps", type=float, nargs="+", default=None, help="relative epsilon grid (>= 4 points)")
    ap.add_argument("--out", default=None, help="directory for scaling.csv and slopes.csv")
    args = ap.parse_args()

    cfg = ScalingConfig() if args.eps is None else ScalingConfig(epsilons=args.eps)
    points, slopes = run_scaling(cfg, args.trials, args.seed)

    print(f"{'method':24s} {'eps':>8s} {'mean queries':>16s} {'mean rel err':>13s}")
    for p in points:
        print(f"{p['method']:24s} {p['epsilon']:8.4f} {p['mean_queries']:16.4g} {p['mean_rel_error']:13.3e}")
    print()
    for s in slopes:
        print(f"{s['method']:24s} slope {s['slope']:.3f} +- {s['stderr']:.3f}")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_table(points, out / "scaling.csv")
        write_table(slopes, out / "slopes.csv")


if __name__ == "__main__":
    main()
