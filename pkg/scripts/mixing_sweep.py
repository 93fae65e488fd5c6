"""Mixing witness residuals as the iterate count n and polynomial budget vary.

    python3 scripts/mixing_sweep.py --n 6 8 10 12 --budget 48 96
"""

import argparse

from hyperpoly.constructions import MixingWitnessSpec, build_mixing_witness
from hyperpoly.fnspace import TaylorPoly
from hyperpoly.runge import SolverError


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, nargs="+", default=[6, 8, 10, 12])
    ap.add_argument("--budget", type=int, nargs="+", default=[48, 96])
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--R", type=float, default=1.5)
    args = ap.parse_args()
    f, g = TaylorPoly([1, 0.5]), TaylorPoly([2, -1])
    print(f"{'n':>3} {'budget':>6} {'deg':>4} {'res_start':>10} {'res_end':>10} {'|log c_n|':>10}")
    for n in args.n:
        for budget in args.budget:
            spec = MixingWitnessSpec(f, g, args.eps, args.R, n)
            try:
                w = build_mixing_witness(spec, budget)
            except SolverError as exc:  # report and keep sweeping
                print(f"{n:>3} {budget:>6}  {type(exc).__name__}: {exc}")
                continue
            print(f"{n:>3} {budget:>6} {w.degree:>4} {w.res_start:>10.3e} {w.res_end:>10.3e} "
                  f"{abs(w.cn.logmag):>10.1e}")


if __name__ == "__main__":
    main()
