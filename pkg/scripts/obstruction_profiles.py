"""Tabulate the diagnostics for the three non-hypercyclic maps.

    python3 scripts/obstruction_profiles.py
"""


from hyperpoly.dynamics import DerivSquare, SelfTimesDeriv, TwoTranslate
from hyperpoly.fnspace import TaylorPoly
from hyperpoly.obstructions import (
    LogTaylor,
    derivative_zero_persistence,
    eval0_decay,
    growth_profile,
    hurwitz_track,
)
from hyperpoly.topology import Disk


def deriv_eval() -> None:
    print("P(f) = f(0) f': diagnostics for a decaying and a growing seed")
    dexp = LogTaylor.from_log2([-(2.0**j) for j in range(25)])
    exp = LogTaylor.truncated_exp(40)
    a, b = eval0_decay(dexp, 12), growth_profile(exp, 2.0, 12)
    print(f"{'n':>3} {'log|P^n f(0)| dexp':>20} {'log c_n + n log 2, exp':>24}")
    for n in range(1, 13):
        print(f"{n:>3} {a.values[n]:>20.4g} {b.values[n - 1]:>24.6g}")
    print(f"dexp envelope ok: {a.envelope_ok}; exp classified {b.classification}\n")


def two_translate() -> None:
    print("P(g) = g(z+1) g(z): zeros of P^k z in B(0, k + 1/2)")
    tr = hurwitz_track(TwoTranslate(1, 0), TaylorPoly([0, 1]), lambda k: [Disk(0, k + 0.5)], 8)
    for k in range(9):
        print(f"  k={k}: {tr.counts(k)[0]:>4}   (2^k = {2**k})")
    print(f"argument principle agrees where checked: {tr.agrees()}\n")


def persistence() -> None:
    g = TaylorPoly([1, 0, 1])
    for pmap, label in ((DerivSquare(), "f'(z)^2"), (SelfTimesDeriv(), "f(z) f'(z)")):
        rep = derivative_zero_persistence(pmap, g, 0, 4)
        vals = ", ".join(f"{v:.1e}" if v else "0" for _, v, _ in rep.values)
        print(f"P(f) = {label}, g = 1 + z^2: {rep.quantity} at 0 over n: {vals}  ok={rep.ok}")


if __name__ == "__main__":
    deriv_eval()
    two_translate()
    persistence()
