import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import coeff_lists, cplx, random_poly
from hyperpoly.fnspace import (
    ONE,
    ZERO,
    FactoredFn,
    FnSpecError,
    LogComplex,
    PeriodicPoly,
    ScaledFn,
    SumFn,
    TaylorPoly,
    ZeroScalarError,
    derivative,
    eval_any,
    eval_fn,
    expand,
    fn_from_json,
    fn_to_json,
    lc_inv,
    lc_mul,
    lc_pow,
    lc_prod,
    lc_root,
    log_eval,
    parse_complex,
    parse_fnspec,
    to_scaled,
    translate,
    truncated_exp,
)

SAMPLES = 1.5 * np.exp(2j * np.pi * np.arange(64) / 64)


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


# --- evaluation


def test_eval_examples():
    assert eval_fn(TaylorPoly([1, 0, 1]), 2) == 5
    assert eval_fn(PeriodicPoly(4, [1]), 17.3) == 1
    assert eval_fn(TaylorPoly([0, 1]), 1j) == 1j


def test_periodic_eval_matches_definition():
    p = PeriodicPoly(5, [0.5, 1 - 1j, 0.25j])
    z = np.array([0.3, 1.7 - 0.2j, -2.1 + 0.4j])
    w = np.exp(2j * np.pi * z / 5)
    assert rel(eval_fn(p, z), 0.5 + (1 - 1j) * w + 0.25j * w**2) < 1e-14


# --- translate


def test_translate_examples():
    assert translate(TaylorPoly([0, 0, 1]), 1).coeffs == (1, 2, 1)
    p = PeriodicPoly(6, [0, 1])
    assert np.max(np.abs(translate(p, 6).array() - p.array())) <= 1e-12


def test_translate_pointwise_oracle(rng):
    f = random_poly(rng, 8)
    z = SAMPLES
    assert rel(eval_fn(translate(f, 0.7), z), eval_fn(f, z + 0.7)) < 1e-10


@given(coeff_lists, cplx, cplx)
def test_translate_composes(c, a, b):
    f = TaylorPoly(c)
    lhs = eval_fn(translate(translate(f, a), b), SAMPLES / 3)
    rhs = eval_fn(translate(f, a + b), SAMPLES / 3)
    scale = max(1.0, float(np.max(np.abs(rhs))), sum(abs(x) for x in c) * 10.0 ** len(c))
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale


@given(st.integers(1, 7), st.lists(cplx, min_size=1, max_size=5), st.floats(-4, 4))
def test_periodic_translate_composes(n, c, a):
    f = PeriodicPoly(n, c)
    lhs = eval_fn(translate(translate(f, a), 1.25), SAMPLES)
    rhs = eval_fn(translate(f, a + 1.25), SAMPLES)
    assert rel(lhs, rhs) < 1e-10


# --- derivative


def test_derivative_examples():
    assert derivative(TaylorPoly([0, 0, 0, 1])).coeffs == (0, 0, 3)
    assert derivative(TaylorPoly([5])).coeffs == (0,)


def test_derivative_commutes_with_translate(rng):
    f = random_poly(rng, 10)
    a = 0.3 - 0.4j
    lhs = derivative(translate(f, a)).array()
    rhs = translate(derivative(f), a).array()
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))


def test_periodic_derivative():
    p = PeriodicPoly(3, [0, 2])
    z = np.array([0.1, 0.4 + 0.2j])
    assert rel(eval_fn(derivative(p), z), 2 * (2j * np.pi / 3) * np.exp(2j * np.pi * z / 3)) < 1e-14


# --- LogComplex


def test_logcomplex_examples():
    assert lc_pow(ONE, 2**40) == ONE
    r = lc_root(LogComplex(math.log(8), 0), 3)
    assert abs(r.logmag - math.log(2)) < 1e-15 and r.phase == 0
    c = lc_prod([(2.0, 2 ** (5 - 1 - j)) for j in range(5)])
    assert abs(c.logmag - 31 * math.log(2)) < 1e-12 and c.phase == 0


def test_zero_sentinel():
    assert lc_mul(ZERO, LogComplex(3.0, 1.0)).is_zero
    assert LogComplex.from_complex(0).is_zero
    with pytest.raises(ZeroScalarError):
        lc_inv(ZERO)
    with pytest.raises(ZeroScalarError):
        lc_root(ZERO, 2)


lcs = st.builds(LogComplex, st.floats(-1e6, 1e6), st.floats(-math.pi, math.pi))


def _lc_close(x, y, tol):
    return abs(x.logmag - y.logmag) <= tol and abs(math.remainder(x.phase - y.phase, 2 * math.pi)) <= tol


@given(lcs, lcs, lcs)
def test_lc_mul_associative_commutative(x, y, z):
    assert _lc_close(lc_mul(lc_mul(x, y), z), lc_mul(x, lc_mul(y, z)), 1e-12 * max(1, abs(x.logmag) + abs(y.logmag) + abs(z.logmag)))
    assert _lc_close(lc_mul(x, y), lc_mul(y, x), 0.0)


@given(lcs, st.integers(1, 64))
def test_lc_root_then_pow(x, m):
    y = lc_pow(lc_root(x, m), m)
    assert abs(y.logmag - x.logmag) <= 1e-10 * max(1, abs(x.logmag))
    assert abs(math.remainder(y.phase - x.phase, 2 * math.pi)) <= 1e-10


@given(cplx.filter(lambda z: z != 0))
def test_logcomplex_roundtrip(z):
    # exp(logmag) carries the rounding of logmag, so the bound scales with it
    tol = 1e-15 * (2 + abs(math.log(abs(z))))
    assert abs(LogComplex.from_complex(z).to_complex() - z) <= tol * abs(z)


# --- scaled / factored


def test_to_scaled_preserves_values(rng):
    f = random_poly(rng, 6, scale=1e30)
    s = to_scaled(f)
    assert np.max(np.abs(s.body.array())) == pytest.approx(1.0)
    assert rel(eval_any(s, SAMPLES) / 1e30, eval_fn(f, SAMPLES) / 1e30) < 1e-12


@given(st.lists(st.tuples(st.lists(cplx, min_size=2, max_size=4), st.integers(1, 6)),
                min_size=1, max_size=4))
def test_expand_matches_log_product(factors):
    bases = [(TaylorPoly(c), e) for c, e in factors]
    if any(b.degree == 0 and b.coeffs[0] == 0 for b, _ in bases):
        return
    f = FactoredFn(tuple(bases))
    if f.total_degree > 64:
        return
    z = SAMPLES[::4]
    lm_e, ph_e = log_eval(expand(f), z)
    lm_f, ph_f = log_eval(f, z)
    ok = np.isfinite(lm_f) & (lm_f > np.max(lm_f[np.isfinite(lm_f)], initial=0) - 20)
    assert np.all(np.abs(lm_e[ok] - lm_f[ok]) <= 1e-9 * np.maximum(1, np.abs(lm_f[ok])) + 1e-9)
    dph = np.abs(np.angle(np.exp(1j * (ph_e[ok] - ph_f[ok]))))
    assert np.all(dph <= 1e-8)


def test_scaled_log_eval_handles_huge_scale():
    f = ScaledFn(LogComplex(5000.0, 0.5), TaylorPoly([1, 1]))
    lm, ph = log_eval(f, np.array([1.0 + 0j]))
    assert lm[0] == pytest.approx(5000 + math.log(2))
    assert ph[0] == pytest.approx(0.5)


# --- fnspec


def test_parse_fnspec():
    assert parse_fnspec("poly:1,2-3i,i").coeffs == (1, 2 - 3j, 1j)
    assert parse_fnspec("exp:4").coeffs == truncated_exp(4).coeffs
    p = parse_fnspec("periodic:4:0,1")
    assert p.period == 4 and p.wcoeffs == (0, 1)
    assert parse_complex("-2.5e-1+4j") == complex(-0.25, 4)
    assert parse_complex("3i") == 3j


@pytest.mark.parametrize("text,pos", [("poly:1,x", 7), ("nope:1", 0), ("exp:a", 4),
                                      ("periodic:0:1", 9), ("poly", 4)])
def test_parse_errors_carry_position(text, pos):
    with pytest.raises(FnSpecError) as ei:
        parse_fnspec(text)
    assert ei.value.position == pos


# --- serialization


@given(coeff_lists)
def test_taylor_json_roundtrip_exact(c):
    f = TaylorPoly(c)
    assert fn_from_json(fn_to_json(f)).coeffs == f.coeffs


def test_composite_json_roundtrip():
    f = SumFn((TaylorPoly([1, 2]), PeriodicPoly(3, [0.5j, 1])))
    g = FactoredFn(((TaylorPoly([0, 1]), 2), (TaylorPoly([1, 1]), 1)), LogComplex(-4000.0, 1.0))
    for h in (f, g, ScaledFn(LogComplex(1e5), TaylorPoly([1, -1]))):
        back = fn_from_json(fn_to_json(h))
        assert fn_to_json(back) == fn_to_json(h)
