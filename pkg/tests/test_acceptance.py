"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are collected and repeated in the pytest terminal summary; run
with ``-s`` to also see them inline, or execute this file directly.
"""

import json
import math
import os
import sys
import tempfile
from functools import lru_cache

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))
from conftest import ACCEPTANCE_LINES, small_seed  # noqa: E402
from hyperpoly.cli import main as cli_main  # noqa: E402
from hyperpoly.constructions import (  # noqa: E402
    FHConfig,
    MixingWitnessSpec,
    build_fh_vector,
    build_mixing_witness,
    build_periodic_vector,
    build_schedule,
    check_schedule,
    shifted_target,
    verify_mixing,
    verify_periodic,
)
from hyperpoly.dynamics import (  # noqa: E402
    DerivativeEval,
    DerivSquare,
    TranslationEval,
    TwoTranslate,
    apply,
    cocycle_derivative,
    cocycle_translation,
    cocycle_translation_recursive,
    iterate_closed,
)
from hyperpoly.fnspace import LogComplex, TaylorPoly, eval_any, eval_fn, translate  # noqa: E402
from hyperpoly.obstructions import (  # noqa: E402
    LogTaylor,
    derivative_zero_persistence,
    eval0_decay,
    growth_profile,
    hurwitz_track,
    invariance_check,
)
from hyperpoly.topology import Disk, SampleGrid, sup_diff  # noqa: E402

B2_SAMPLES = Disk(0, 2).boundary(64)
FH_PAIRS = [(1, 2), (2, 2)]
FH_TARGETS = (TaylorPoly([1, 0.25]), TaylorPoly([1, -0.25]))


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def seeds(count: int, seed: int, **kw):
    rng = np.random.default_rng(seed)
    return [small_seed(rng, degree=int(rng.integers(1, 9)), **kw) for _ in range(count)]


# ---------------------------------------------------------------------------
# shared builds (each expensive object is built once per session)


@lru_cache(maxsize=None)
def mixing(n: int):
    spec = MixingWitnessSpec(TaylorPoly([1, 0.5]), TaylorPoly([2, -1]), 0.1, 1.5, n)
    return spec, build_mixing_witness(spec, 96)


@lru_cache(maxsize=None)
def periodic():
    g = TaylorPoly([0, 1])
    return g, build_periodic_vector(g, 0.25, 0.9, 8)


@lru_cache(maxsize=None)
def fh():
    sched = build_schedule(FH_PAIRS, 1000)
    return build_fh_vector(sched, FH_TARGETS, 3, config=FHConfig(K_max=24))


# ---------------------------------------------------------------------------


def test_criterion_1_closed_form_oracle():
    worst = 0.0
    fs = seeds(50, 1)
    for f in fs:
        assert all(0.5 < abs(eval_fn(f, j)) < 2 for j in range(7))
        g = f
        for n in range(7):
            closed = eval_any(iterate_closed(TranslationEval(), f, n), B2_SAMPLES)
            naive = eval_fn(g, B2_SAMPLES)
            worst = max(worst, float(np.max(np.abs(closed - naive) / np.abs(naive))))
            g = apply(TranslationEval(), g)
    ok = worst <= 1e-8
    report(1, ok, f"closed form vs naive iteration: max rel err {worst:.2e} (50 seeds, n<=6, tol 1e-8)")
    assert ok


def test_criterion_2_cocycle_identities():
    prod_err = 0.0
    for f in seeds(20, 2, spread=1.0):
        a, b = cocycle_translation(f, 12), cocycle_translation_recursive(f, 12)
        prod_err = max(prod_err, max(abs(x.logmag - y.logmag) / max(1, abs(x.logmag))
                                     for x, y in zip(a.values, b.values)))
    ident_err = 0.0
    for f in seeds(100, 3, spread=1.0):
        f0 = LogComplex.from_complex(eval_fn(f, 0))
        for pmap, coc in ((TranslationEval(), cocycle_translation),
                          (DerivativeEval(), cocycle_derivative)):
            cf, cpf = coc(f, 11), coc(apply(pmap, f), 10)
            for k in range(11):
                lhs, rhs = cf[k + 1], f0 * cpf[k]
                if lhs.is_zero or rhs.is_zero:
                    ident_err = max(ident_err, 0.0 if lhs.is_zero == rhs.is_zero else math.inf)
                else:
                    ident_err = max(ident_err, abs(lhs.logmag - rhs.logmag) / max(1, abs(lhs.logmag)))
    ok = prod_err <= 1e-9 and ident_err <= 1e-9
    report(2, ok, f"product vs recursive {prod_err:.1e}; c_(k+1)(f) = f(0) c_k(Pf) {ident_err:.1e} "
                  "(100 seeds, both maps, tol 1e-9)")
    assert ok


def test_criterion_3_mixing_witness():
    parts, ok = [], True
    for n in (6, 10):
        spec, w = mixing(n)
        rs, re_, cn = verify_mixing(w.p, spec)
        good = rs < 0.1 and re_ < 0.1 and abs(cn.logmag) < 1e-6
        ok &= good
        parts.append(f"n={n}: res_start {rs:.3f} res_end {re_:.3f} |log c_n| {abs(cn.logmag):.1e} deg {w.degree}")
    report(3, ok, "; ".join(parts))
    assert ok


def test_criterion_4_periodic_vector():
    g, pv = periodic()
    v = pv.v
    t = v
    for _ in range(8):
        t = translate(t, 1)
    drift = abs(t.inner.zmul - v.inner.zmul) + abs(t.inner.shift - v.inner.shift)
    same = translate(v, 8)
    drift = max(drift, float(np.max(np.abs(np.asarray(same.inner.coeffs) - np.asarray(v.inner.coeffs)))))
    rt, rp = verify_periodic(v, g, 0.9)
    ok = drift <= 1e-12 and rp < 1e-6 and rt < 0.25
    report(4, ok, f"structural drift {drift:.1e}; |P^8 v - v| {rp:.1e}; |v - g| {rt:.3f} (eps 0.25)")
    assert ok


def test_criterion_5_schedule():
    pairs = [(1, 1), (1, 2), (2, 1), (2, 2)]
    s = build_schedule(pairs, 10**5)
    bad = check_schedule(s)
    # independent restatement over the whole horizon
    owners = sorted((k, s.pairs[i][1]) for i in range(len(pairs)) for k in s.members(i))
    ks = [k for k, _ in owners]
    disjoint = len(ks) == len(set(ks))
    above = all(k > m for k, m in owners)
    gaps = all(k2 - k > m + m2 for (k, m), (k2, m2) in zip(owners, owners[1:]))
    dens = True
    for i in range(len(pairs)):
        mem = np.zeros(10**5 + 1, bool)
        mem[s.members(i)] = True
        t = np.arange(1, 10**5 + 1)
        frac = np.cumsum(mem)[1:] / t
        dens &= bool(np.all(frac[t >= s.N0[i]] >= s.density[i]))
    ok = not bad and disjoint and above and gaps and dens
    report(5, ok, f"N=1e5, {len(ks)} elements: disjoint {disjoint}, k>m {above}, gaps {gaps}, "
                  f"densities {dens} (declared {', '.join(f'{d:.4g}' for d in s.density)})")
    assert ok


@pytest.mark.slow
def test_criterion_6_fh_stages():
    b = fh()
    audits = all(all(st.audit.values()) for st in b.stages)
    # independent recomputation of the final bounds from f_J
    f = b.f
    bounds = []
    for st in b.stages:
        n, m = st.pair
        c = cocycle_translation(f, st.k)[st.k].to_complex()
        shifted = translate(f, st.k)
        val = sup_diff(lambda z, s=shifted, c=c: c * eval_fn(s, z), FH_TARGETS[n - 1],
                       Disk(0, m / 2 + 1 / m), SampleGrid(4096))
        bounds.append((st.k, val, 1 / m))
    ok = len(b.stages) == 3 and audits and all(v < lim for _, v, lim in bounds)
    report(6, ok, "J=3: audits (a)-(e) " + ("all true" if audits else "FAILED") + "; final bounds "
           + ", ".join(f"k={k}: {v:.1e} < {lim:g}" for k, v, lim in bounds)
           + f"; degrees {[st.degree for st in b.stages]}")
    assert ok


def test_criterion_7_derivative_obstruction():
    inv_ok = all(invariance_check(f, 10, strict=False).ok for f in seeds(100, 7, spread=1.0))
    dexp = LogTaylor.from_log2([-(2.0**j) for j in range(25)])
    dec = eval0_decay(dexp, 12)
    decreasing = all(dec.values[n + 1] < dec.values[n] for n in range(2, 12))
    prof = growth_profile(LogTaylor.truncated_exp(40), 2.0, 40)
    err = max(abs(v - (2 * math.lgamma(n + 1) + n * math.log(2))) for n, v in enumerate(prof.values, 1))
    ok = inv_ok and decreasing and dec.envelope_ok is True and prof.classification == "growing" and err <= 1e-9
    report(7, ok, f"(i) invariance on 100 seeds {inv_ok}; (ii) decreasing {decreasing}, envelope "
                  f"{dec.envelope_ok}; (iii) {prof.classification}, profile err {err:.1e} (tol 1e-9)")
    assert ok


def test_criterion_8_hurwitz_and_persistence():
    tr = hurwitz_track(TwoTranslate(1, 0), TaylorPoly([0, 1]), lambda k: [Disk(0, k + 0.5)], 6)
    counts = [tr.counts(k)[0] for k in range(7)]
    cross_ks = [k for k, _ in tr.crosscheck]
    rep = derivative_zero_persistence(DerivSquare(), TaylorPoly([1, 0, 1]), 0, 4, strict=False)
    ok = (counts == [2**k for k in range(7)] and cross_ks == [0, 1, 2, 3, 4] and tr.agrees()
          and rep.ok and len(rep.values) == 5)
    worst = max(v / s for _, v, s in rep.values if s > 0)
    report(8, ok, f"counts {counts}; argument principle agrees for k<=4: {tr.agrees()}; "
                  f"deriv-square |(P^n g)'(0)| / scale <= {worst:.1e} for n<=4")
    assert ok


CLI_RUNS = {
    "mix": ["mix", "--f", "poly:1,0.5", "--g", "poly:2,-1", "--eps", "0.1", "--R", "1.5", "--n", "10",
            "--degree", "96"],
    "periodic": ["periodic", "--g", "poly:0,1", "--eps", "0.25", "--R", "0.9", "--n", "8"],
    "fh": ["fh", "--pairs", "1,2;2,2", "--targets", "poly:1,0.25", "poly:1,-0.25", "--J", "3"],
    "orbit": ["orbit", "--map", "translation-eval", "--f", "poly:1,0.5", "--N", "6",
              "--seminorm-disk", "0,0,1", "--zero-disk", "0,0,3"],
    "deriv-eval": ["obstruct", "deriv-eval", "--f", "dexp:24", "--N", "12"],
    "two-translate": ["obstruct", "two-translate", "--g", "poly:0,1", "--K", "6", "--staircase", "0.5"],
    "deriv-square": ["obstruct", "deriv-square", "--g", "poly:1,0,1", "--N", "4"],
    "self-deriv": ["obstruct", "self-deriv", "--g", "poly:1,0,1", "--N", "4"],
}


def _drift_checks():
    """Every seminorm the suite relies on, at the default grid and doubled."""
    out = []
    for n in (6, 10):
        spec, w = mixing(n)
        a = verify_mixing(w.p, spec, SampleGrid(256))
        b = verify_mixing(w.p, spec, SampleGrid(512))
        out += [(f"mix n={n} start", a[0], b[0]), (f"mix n={n} end", a[1], b[1])]
    g, pv = periodic()
    a, b = verify_periodic(pv.v, g, 0.9, SampleGrid(256)), verify_periodic(pv.v, g, 0.9, SampleGrid(512))
    out += [("periodic target", a[0], b[0]), ("periodic period", a[1], b[1])]
    f = fh().f
    for st in fh().stages:
        n, m = st.pair
        c = cocycle_translation(f, st.k)[st.k].to_complex()
        s = translate(f, st.k)
        fun = lambda z, s=s, c=c: c * eval_fn(s, z)  # noqa: E731
        d = Disk(0, m / 2 + 1 / m)
        out.append((f"fh k={st.k}", sup_diff(fun, FH_TARGETS[n - 1], d, SampleGrid(4096)),
                    sup_diff(fun, FH_TARGETS[n - 1], d, SampleGrid(8192))))
        pt = shifted_target(FH_TARGETS[n - 1], st.k)
        out.append((f"fh B_{st.j}", sup_diff(f, pt, Disk(st.k, st.r), SampleGrid(4096)),
                    sup_diff(f, pt, Disk(st.k, st.r), SampleGrid(8192))))
    return out


@pytest.mark.slow
def test_criterion_9_infrastructure():
    drift = _drift_checks()
    worst = max(abs(a - b) for _, a, b in drift)
    stable = worst < 1e-6
    det, ver = {}, {}
    with tempfile.TemporaryDirectory() as tmp:
        for name, argv in CLI_RUNS.items():
            p1, p2 = os.path.join(tmp, f"{name}1.json"), os.path.join(tmp, f"{name}2.json")
            c1 = cli_main([*argv, "--out", p1])
            c2 = cli_main([*argv, "--out", p2])
            with open(p1, "rb") as a, open(p2, "rb") as b:
                det[name] = c1 == c2 == 0 and a.read() == b.read()
            ver[name] = cli_main(["verify", p1]) == 0
            with open(p1) as fh_:
                json.load(fh_)
    ok = stable and all(det.values()) and all(ver.values())
    report(9, ok, f"grid doubling drift {worst:.1e} over {len(drift)} seminorms (tol 1e-6); "
                  f"deterministic {sum(det.values())}/{len(det)}; verify round-trip "
                  f"{sum(ver.values())}/{len(ver)}")
    assert ok, {k: v for k, v in {**det, **ver}.items() if not v}


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
