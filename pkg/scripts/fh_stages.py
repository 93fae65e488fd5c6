"""Build the first J stages of a frequently hypercyclic vector and tabulate them.

    python3 scripts/fh_stages.py --J 3 --pairs 1,2 2,2 --targets 1,0.25 1,-0.25
"""

import argparse

from hyperpoly.cli import parse_seed_fn
from hyperpoly.constructions import FHConfig, build_fh_vector, build_schedule


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--J", type=int, default=3)
    ap.add_argument("--pairs", nargs="+", default=["1,2", "2,2"])
    ap.add_argument("--targets", nargs="+", default=["1,0.25", "1,-0.25"],
                    help="Taylor coefficients of p_1, p_2, ...")
    ap.add_argument("--horizon", type=int, default=1000)
    ap.add_argument("--K-max", dest="K_max", type=int, default=24)
    args = ap.parse_args()

    pairs = [tuple(int(x) for x in p.split(",")) for p in args.pairs]
    targets = [parse_seed_fn(f"poly:{t}") for t in args.targets]
    sched = build_schedule(pairs, args.horizon)
    for i, (n, m) in enumerate(sched.pairs):
        print(f"pair ({n},{m}): first members {sched.members(i)[:6]}, density >= {sched.density[i]:.4g}")

    b = build_fh_vector(sched, targets, args.J, config=FHConfig(K_max=args.K_max))
    print(f"\n{'j':>2} {'k':>4} {'pair':>6} {'r':>6} {'delta':>9} {'gamma':>9} {'eps':>7} {'deg':>5}  audit")
    for st in b.stages:
        bad = [k for k, v in st.audit.items() if not v]
        print(f"{st.j:>2} {st.k:>4} {str(st.pair):>6} {st.r:>6.3f} {st.delta:>9.2e} {st.gamma:>9.2e} "
              f"{st.eps:>7.3g} {st.degree:>5}  {'ok' if not bad else 'FAILED ' + ','.join(bad)}")
    print("\nfinal bounds |c_k f(.+k) - p_n| on B(0, m/2 + 1/m):")
    for j, bound, lim in b.final:
        print(f"  stage {j}: {bound:.3e}  (limit {lim:g})")


if __name__ == "__main__":
    main()
