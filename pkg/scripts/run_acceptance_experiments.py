"""Run the acceptance configurations through the CLI and re-verify each report.

    python3 scripts/run_acceptance_experiments.py [--out results/]
"""

import argparse
import os
import sys
import time

from hyperpoly.cli import main as cli

RUNS = {
    "mix_n6": ["mix", "--f", "poly:1,0.5", "--g", "poly:2,-1", "--eps", "0.1", "--R", "1.5",
               "--n", "6", "--degree", "96"],
    "mix_n10": ["mix", "--f", "poly:1,0.5", "--g", "poly:2,-1", "--eps", "0.1", "--R", "1.5",
                "--n", "10", "--degree", "96"],
    "periodic": ["periodic", "--g", "poly:0,1", "--eps", "0.25", "--R", "0.9", "--n", "8"],
    "fh_J3": ["fh", "--pairs", "1,2;2,2", "--targets", "poly:1,0.25", "poly:1,-0.25", "--J", "3",
              "--K-max", "24"],
    "orbit_translation": ["orbit", "--map", "translation-eval", "--f", "poly:1,0.5", "--N", "8",
                          "--seminorm-disk", "0,0,1", "--zero-disk", "0,0,3"],
    "deriv_eval_dexp": ["obstruct", "deriv-eval", "--f", "dexp:24", "--N", "12"],
    "deriv_eval_exp": ["obstruct", "deriv-eval", "--f", "lexp:40", "--N", "40"],
    "two_translate": ["obstruct", "two-translate", "--g", "poly:0,1", "--K", "6", "--staircase", "0.5"],
    "deriv_square": ["obstruct", "deriv-square", "--g", "poly:1,0,1", "--N", "4"],
    "self_deriv": ["obstruct", "self-deriv", "--g", "poly:1,0,1", "--N", "4"],
}


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--only", nargs="*", help="subset of run names")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    failed = []
    for name, argv in RUNS.items():
        if args.only and name not in args.only:
            continue
        path = os.path.join(args.out, f"{name}.json")
        t0 = time.perf_counter()
        code = cli([*argv, "--out", path])
        vcode = cli(["verify", path]) if code == 0 else code
        dt = time.perf_counter() - t0
        print(f"{name:20s} exit {code}  verify {vcode}  {dt:6.1f}s")
        if code or vcode:
            failed.append(name)
    if failed:
        print("failed:", ", ".join(failed))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
