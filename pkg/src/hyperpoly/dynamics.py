"""The map catalogue, its cocycles, closed-form iterates and an orbit engine.

Every map here is 2-homogeneous on entire functions:

* ``TranslationEval``  P(f) = f(0) f(z+1)
* ``DerivativeEval``   P(f) = f(0) f'
* ``TwoTranslate``     P(g) = g(z+a) g(z+b)
* ``DerivSquare``      P(g) = g'^2
* ``SelfTimesDeriv``   P(g) = g g'

Iterates of the first three have closed forms that keep the huge scalar in
the log domain; the last two are iterated step by step.
"""

from __future__ import annotations

import csv
import io
import math
from fractions import Fraction
from dataclasses import dataclass, field
from math import comb
from typing import Sequence, Union

import numpy as np

from .fnspace import (
    DEFAULT_DEGREE_BUDGET,
    ONE,
    TWO_PI,
    ZERO,
    DegreeBudgetExceeded,
    EntireFn,
    FactoredFn,
    LogComplex,
    PeriodicPoly,
    ScaledFn,
    TaylorPoly,
    derivative,
    eval_fn,
    lc_mul,
    lc_pow,
    log_eval,
    nth_derivative,
    scale_fn,
    to_scaled,
    translate,
)
from .topology import Disk, SampleGrid, count_zeros, seminorm


class ZeroNodeError(ValueError):
    pass


class NoClosedForm(TypeError):
    pass


@dataclass(frozen=True)
class TranslationEval:
    name = "translation-eval"


@dataclass(frozen=True)
class DerivativeEval:
    name = "derivative-eval"


@dataclass(frozen=True)
class TwoTranslate:
    a: complex
    b: complex
    name = "two-translate"

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))

    @property
    def degenerate(self) -> bool:
        """``a == b`` turns the map into ``g(z+a)^2``."""
        return self.a == self.b


@dataclass(frozen=True)
class DerivSquare:
    name = "deriv-square"


@dataclass(frozen=True)
class SelfTimesDeriv:
    name = "self-times-deriv"


PolyMap = Union[TranslationEval, DerivativeEval, TwoTranslate, DerivSquare, SelfTimesDeriv]


# ---------------------------------------------------------------------------
# one step


def _mul(p: EntireFn, q: EntireFn, budget: int) -> EntireFn:
    if p.degree + q.degree > budget:
        raise DegreeBudgetExceeded(
            f"degree budget exceeded: {p.degree + q.degree} > {budget}")
    if isinstance(p, TaylorPoly) and isinstance(q, TaylorPoly):
        return TaylorPoly(np.convolve(p.array(), q.array()))
    if (isinstance(p, PeriodicPoly) and isinstance(q, PeriodicPoly)
            and p.period == q.period and p.inner is None and q.inner is None):
        return PeriodicPoly(p.period, np.convolve(p.array(), q.array()))
    raise TypeError(f"cannot multiply {type(p).__name__} by {type(q).__name__}")


def apply(pmap: PolyMap, f: EntireFn, budget: int = DEFAULT_DEGREE_BUDGET) -> EntireFn:
    """One literal application of the map's formula."""
    if isinstance(pmap, TranslationEval):
        return scale_fn(translate(f, 1), eval_fn(f, 0.0))
    if isinstance(pmap, DerivativeEval):
        return scale_fn(derivative(f), eval_fn(f, 0.0))
    if isinstance(pmap, TwoTranslate):
        return _mul(translate(f, pmap.a), translate(f, pmap.b), budget)
    if isinstance(pmap, DerivSquare):
        d = derivative(f)
        return _mul(d, d, budget)
    if isinstance(pmap, SelfTimesDeriv):
        return _mul(f, derivative(f), budget)
    raise TypeError(f"unknown map {pmap!r}")


# ---------------------------------------------------------------------------
# cocycles


@dataclass(frozen=True)
class Cocycle:
    """``values[n-1]`` is ``c_n``."""

    values: tuple[LogComplex, ...]

    def __getitem__(self, n: int) -> LogComplex:
        if n == 0:
            return ONE
        return self.values[n - 1]

    def __len__(self) -> int:
        return len(self.values)


def _pow2_phase(phase: float, e: int) -> float:
    # 2**e * phase is exact in binary floating point; only the reduction rounds
    return math.remainder(math.ldexp(phase, e), TWO_PI)


def cocycle_translation(f: EntireFn, N: int) -> Cocycle:
    """``c_n = prod_{k<n} f(k)^(2^(n-1-k))`` for ``n = 1..N``, term by term."""
    vals = [LogComplex.from_complex(eval_fn(f, complex(k))) for k in range(N)]
    for k, v in enumerate(vals):
        if v.is_zero:
            raise ZeroNodeError(f"zero at integer node {k}")
    out = []
    for n in range(1, N + 1):
        lm = math.fsum(math.ldexp(vals[k].logmag, n - 1 - k) for k in range(n))
        ph = sum(_pow2_phase(vals[k].phase, n - 1 - k) for k in range(n))
        out.append(LogComplex(lm, ph))
    return Cocycle(tuple(out))


def cocycle_translation_recursive(f: EntireFn, N: int) -> Cocycle:
    """Same cocycle via ``c_n = c_{n-1}^2 f(n-1)``."""
    out = []
    c = ONE
    for n in range(1, N + 1):
        v = LogComplex.from_complex(eval_fn(f, complex(n - 1)))
        if v.is_zero:
            raise ZeroNodeError(f"zero at integer node {n - 1}")
        c = lc_mul(lc_pow(c, 2), v)
        out.append(c)
    return Cocycle(tuple(out))


def derivatives_at_zero(f: EntireFn, N: int) -> list[complex]:
    """``f^{(j)}(0)`` for ``j < N``."""
    if isinstance(f, TaylorPoly):
        c = f.coeffs
        # exact product, one rounding: j! itself is not a double past j = 22
        return [complex(float(math.factorial(j) * Fraction(c[j].real)),
                        float(math.factorial(j) * Fraction(c[j].imag)))
                if j < len(c) else 0j for j in range(N)]
    out, g = [], f
    for _ in range(N):
        out.append(eval_fn(g, 0.0))
        g = derivative(g)
    return out


def cocycle_derivative(f: EntireFn, N: int) -> Cocycle:
    """``c_1 = f(0)``, ``c_n = c_{n-1}^2 f^{(n-1)}(0)``; zeros stay zero."""
    ders = derivatives_at_zero(f, N)
    out = []
    c = ONE
    for n in range(1, N + 1):
        c = lc_mul(lc_pow(c, 2), LogComplex.from_complex(ders[n - 1]))
        out.append(c)
    return Cocycle(tuple(out))


def cocycle_unity(h: EntireFn, n: int) -> LogComplex:
    """``h(w_0)^(2^(n-1)) ... h(w_{n-1})`` over the ``n``-th roots of unity."""
    out = ONE
    for j in range(n):
        v = LogComplex.from_complex(eval_fn(h, complex(np.exp(1j * TWO_PI * j / n))))
        if v.is_zero:
            raise ZeroNodeError(f"zero at root of unity {j}")
        out = lc_mul(out, LogComplex(math.ldexp(v.logmag, n - 1 - j),
                                     _pow2_phase(v.phase, n - 1 - j)))
    return out


# ---------------------------------------------------------------------------
# closed forms


def iterate_closed(pmap: PolyMap, f: EntireFn, n: int) -> Union[ScaledFn, FactoredFn]:
    if n < 0:
        raise ValueError("iterate count must be nonnegative")
    if isinstance(pmap, TranslationEval):
        c = cocycle_translation(f, n)[n] if n else ONE
        return ScaledFn(c, translate(f, n))
    if isinstance(pmap, DerivativeEval):
        c = cocycle_derivative(f, n)[n] if n else ONE
        return ScaledFn(c, nth_derivative(f, n))
    if isinstance(pmap, TwoTranslate):
        if pmap.degenerate:
            return FactoredFn(((translate(f, n * pmap.a), 2**n),))
        facs = tuple((translate(f, j * pmap.a + (n - j) * pmap.b), comb(n, j))
                     for j in range(n + 1))
        return FactoredFn(facs)
    raise NoClosedForm("no closed form for this map; iterate with orbit()")


# ---------------------------------------------------------------------------
# orbits


@dataclass(frozen=True)
class DiagnosticsConfig:
    seminorm_disks: tuple = ()
    zero_disks: tuple = ()
    grid: SampleGrid = SampleGrid()
    budget: int = DEFAULT_DEGREE_BUDGET


@dataclass(frozen=True, eq=False)
class OrbitRecord:
    step: int
    iterate: Union[ScaledFn, FactoredFn]
    eval0: LogComplex
    seminorms: tuple = ()
    zero_counts: tuple | None = None


def _lc_at_zero(g) -> LogComplex:
    lm, ph = log_eval(g, np.array([0j]))
    if lm[0] == -math.inf:
        return ZERO
    return LogComplex(float(lm[0]), float(ph[0]))


def _step_naive(pmap: PolyMap, it: ScaledFn, budget: int) -> ScaledFn:
    # 2-homogeneity: P(s b) = s^2 P(b)
    nxt = to_scaled(apply(pmap, it.body, budget))
    return ScaledFn(lc_mul(lc_pow(it.scale, 2), nxt.scale), nxt.body)


def orbit(pmap: PolyMap, f: EntireFn, N: int,
          diagnostics: DiagnosticsConfig = DiagnosticsConfig()) -> list[OrbitRecord]:
    """Records for steps ``0..N``."""
    closed = isinstance(pmap, (TranslationEval, DerivativeEval, TwoTranslate))
    records = []
    it = to_scaled(f)
    for n in range(N + 1):
        try:
            if closed:
                it = iterate_closed(pmap, f, n)
            elif n:
                it = _step_naive(pmap, it, diagnostics.budget)
        except (DegreeBudgetExceeded, ZeroNodeError) as exc:
            raise type(exc)(f"step {n}: {exc}") from exc
        sem = tuple((d, _log_sup(it, d, diagnostics.grid)) for d in diagnostics.seminorm_disks)
        zc = None
        if diagnostics.zero_disks:
            zc = tuple((d, count_zeros(it, d, diagnostics.grid)) for d in diagnostics.zero_disks)
        records.append(OrbitRecord(n, it, _lc_at_zero(it), sem, zc))
    return records


def _log_sup(it, d: Disk, grid: SampleGrid) -> float:
    if isinstance(it, ScaledFn) and it.scale.is_zero:
        return -math.inf
    return seminorm(it, d, grid)


def orbit_to_csv(records: Sequence[OrbitRecord]) -> str:
    """CSV text: step, eval0 logmag/phase, per-disk log-seminorms, zero counts."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    first = records[0] if records else None
    head = ["step", "eval0_logmag", "eval0_phase"]
    if first is not None:
        head += [f"logsup_{_disk_tag(d)}" for d, _ in first.seminorms]
        head += [f"zeros_{_disk_tag(d)}" for d, _ in (first.zero_counts or ())]
    w.writerow(head)
    for r in records:
        row = [r.step, f"{r.eval0.logmag:.17g}", f"{r.eval0.phase:.17g}"]
        row += [f"{v:.17g}" for _, v in r.seminorms]
        row += [c for _, c in (r.zero_counts or ())]
        w.writerow(row)
    return buf.getvalue()


def _disk_tag(d: Disk) -> str:
    c = d.center
    return f"B({c.real:g}{c.imag:+g}i;{d.radius:g})"
