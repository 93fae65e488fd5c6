"""Falsification experiments for the non-hypercyclic maps.

Three mechanisms are made quantitative here:

* growth of ``|c_n(f)| (n!)^2 R^n`` for ``P(f) = f(0) f'`` and the decay of
  ``P^n f(0)`` it forces when that quantity stays bounded;
* Taylor seminorms ``||f||_k = sup_j |f^(j)(0)| k^j / j!``;
* Hurwitz-type zero bookkeeping for ``g(z+a) g(z+b)`` and persistence of
  critical points under ``g'^2`` and ``g g'``.

All magnitudes are carried as logs; ``log(n!)`` comes from ``lgamma``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .dynamics import (
    DerivativeEval,
    DerivSquare,
    PolyMap,
    SelfTimesDeriv,
    TranslationEval,
    TwoTranslate,
    ZeroNodeError,
    apply,
    cocycle_derivative,
    cocycle_translation,
    derivatives_at_zero,
    iterate_closed,
    orbit,
    DiagnosticsConfig,
)
from .fnspace import (
    DEFAULT_DEGREE_BUDGET,
    ONE,
    ZERO,
    EntireFn,
    FactoredFn,
    LogComplex,
    ScaledFn,
    TaylorPoly,
    derivative,
    eval_fn,
    expand,
    lc_mul,
    lc_pow,
)
from .topology import Disk, SampleGrid, count_zeros

GROWING_RISE = 10.0
BOUNDED_BAND = 1.0
IDENTITY_TOL = 1e-9
PERSISTENCE_TOL = 1e-10

# Constants from the argument that 0 is not in the closure of X.  They play
# no role at run time and are kept only as documentation.
THRESHOLD_FAMILY = "|f^(j+n)(0)| > (j+n)^(j+n)"
THRESHOLD_INEQUALITY = "2^((n+j) log2(n+j)) / 2^((sqrt2-1) 2^(n+(1+j)/2)) <= 1"


class IdentityViolated(AssertionError):
    pass


class PersistenceViolated(AssertionError):
    pass


@dataclass(frozen=True)
class LogTaylor:
    """Taylor data given directly as ``log f^(j)(0)``.

    Seeds such as ``f^(j)(0) = 2^(-2^j)`` underflow double precision after a
    dozen terms; this keeps them exact in the log domain.
    """

    derivs: tuple[LogComplex, ...]

    @property
    def degree(self) -> int:
        return len(self.derivs) - 1

    @classmethod
    def from_log2(cls, log2_values: Sequence[float]) -> "LogTaylor":
        """Positive real derivatives ``2^(log2_values[j])``."""
        return cls(tuple(LogComplex(v * math.log(2)) for v in log2_values))

    @classmethod
    def truncated_exp(cls, d: int) -> "LogTaylor":
        """``sum_{j<=d} z^j / j!`` with its derivatives at 0 exactly 1.

        The float TaylorPoly of the same series stores ``fl(1/j!)``; the
        cocycle multiplies those roundings by up to ``2^(n-1)``.
        """
        return cls((LogComplex(0.0),) * (d + 1))


Seed = Union[EntireFn, LogTaylor]


def log_derivatives(f: Seed, N: int) -> list[LogComplex]:
    """``f^(j)(0)`` for ``j < N`` as LogComplex; zero past the degree."""
    if isinstance(f, LogTaylor):
        return [f.derivs[j] if j < len(f.derivs) else ZERO for j in range(N)]
    return [LogComplex.from_complex(d) for d in derivatives_at_zero(f, N)]


def _log_cocycle(ders: Sequence[LogComplex], N: int) -> list[LogComplex]:
    """``c_0..c_N`` for the derivative map."""
    out = [ONE]
    for n in range(1, N + 1):
        out.append(lc_mul(lc_pow(out[-1], 2), ders[n - 1]))
    return out


def _seed_degree(f: Seed) -> int:
    return f.degree


def _log_abs_coeffs(f: Seed) -> np.ndarray:
    """``log|a_j|`` with ``a_j = f^(j)(0)/j!``."""
    if isinstance(f, LogTaylor):
        return np.array([d.logmag - math.lgamma(j + 1) for j, d in enumerate(f.derivs)])
    if isinstance(f, TaylorPoly):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(f.array()))
    raise TypeError(f"need Taylor data, got {type(f).__name__}")


# ---------------------------------------------------------------------------
# growth profiles


@dataclass(frozen=True)
class GrowthProfile:
    R: float
    values: tuple[float, ...]  # values[n-1] = log(|c_n| (n!)^2 R^n)
    classification: str
    window: tuple[int, int]  # inclusive n range the verdict looked at
    truncation: int  # f^(n) vanishes beyond this n

    def to_csv(self) -> str:
        return _csv(["n", "logmag"], [(n, v) for n, v in enumerate(self.values, 1)])


def classify(values: Sequence[float]) -> tuple[str, tuple[int, int]]:
    """Verdict over the last quarter of ``values`` (indexed from ``n = 1``).

    ``growing`` if the window rises by more than ``GROWING_RISE`` log units,
    ``bounded`` if it never climbs more than ``BOUNDED_BAND`` above its start
    (a collapse to ``-inf`` counts as bounded), else ``inconclusive``.
    """
    N = len(values)
    if N == 0:
        return "inconclusive", (0, 0)
    q = max(2, N // 4) if N >= 2 else 1
    lo = N - q
    w = np.asarray(values[lo:], dtype=float)
    window = (lo + 1, N)
    if np.isneginf(w).any():
        return "bounded", window
    if w[-1] - w[0] > GROWING_RISE:
        return "growing", window
    if w.max() - w[0] <= BOUNDED_BAND:
        return "bounded", window
    return "inconclusive", window


def growth_profile(f: Seed, R: float, N: int) -> GrowthProfile:
    if not R > 1:
        raise ValueError("R must exceed 1")
    ders = log_derivatives(f, N)
    c = _log_cocycle(ders, N)
    vals = tuple(c[n].logmag + 2 * math.lgamma(n + 1) + n * math.log(R) for n in range(1, N + 1))
    verdict, window = classify(vals)
    return GrowthProfile(float(R), vals, verdict, window, _seed_degree(f))


# ---------------------------------------------------------------------------
# the invariance identity


@dataclass(frozen=True)
class InvarianceReport:
    N: int
    derivative_ok: bool
    translation_ok: bool | None  # None when f vanishes at an integer node
    max_logmag_err: float
    max_phase_err: float

    @property
    def ok(self) -> bool:
        return self.derivative_ok and self.translation_ok is not False


def _lc_err(x: LogComplex, y: LogComplex) -> tuple[float, float]:
    if x.is_zero or y.is_zero:
        return (0.0, 0.0) if x.is_zero and y.is_zero else (math.inf, math.inf)
    dl = abs(x.logmag - y.logmag) / max(1.0, abs(x.logmag))
    dp = abs(math.remainder(x.phase - y.phase, 2 * math.pi))
    return dl, dp


def _compare(cf, cpf, f0: LogComplex, N: int):
    errs = []
    for k in range(N + 1):
        lhs = cf[k + 1]
        rhs = lc_mul(f0, cpf[k])
        errs.append((k, *_lc_err(lhs, rhs)))
    return errs


def invariance_check(f: EntireFn, N: int, strict: bool = True) -> InvarianceReport:
    """``c_{k+1}(f) = f(0) c_k(P f)`` for ``k <= N``.

    Checked for ``f(0) f'`` and, when ``f`` has no zero at ``0..N+1``, for
    ``f(0) f(z+1)``.  With ``strict`` a violation raises.
    """
    f0v = eval_fn(f, 0.0)
    if f0v == 0:
        raise ValueError("f(0) must be nonzero")
    f0 = LogComplex.from_complex(f0v)
    errs = _compare(cocycle_derivative(f, N + 1), cocycle_derivative(apply(DerivativeEval(), f), N),
                    f0, N)
    d_ok = all(dl <= IDENTITY_TOL and dp <= IDENTITY_TOL for _, dl, dp in errs)
    t_ok = None
    try:
        terrs = _compare(cocycle_translation(f, N + 1),
                         cocycle_translation(apply(TranslationEval(), f), N), f0, N)
    except ZeroNodeError:
        terrs = []
    else:
        t_ok = all(dl <= IDENTITY_TOL and dp <= IDENTITY_TOL for _, dl, dp in terrs)
    allerr = errs + terrs
    rep = InvarianceReport(N, d_ok, t_ok, max(e[1] for e in allerr), max(e[2] for e in allerr))
    if strict and not rep.ok:
        k = next(k for k, dl, dp in allerr if dl > IDENTITY_TOL or dp > IDENTITY_TOL)
        raise IdentityViolated(f"identity violated at k={k}")
    return rep


# ---------------------------------------------------------------------------
# decay of P^n f(0)


@dataclass(frozen=True)
class Eval0Decay:
    values: tuple[float, ...]  # values[n] = log|P^n f(0)|, n = 0..N
    profile: GrowthProfile
    envelope: tuple[float, ...] | None  # envelope[n] bounds values[n+1], n = 0..N-1
    envelope_ok: bool | None
    cauchy: tuple[float, float] | None  # (log M, r)
    log_L: float | None
    truncation: int

    def to_csv(self) -> str:
        rows = [(n, v, "" if self.envelope is None or n == 0 else self.envelope[n - 1])
                for n, v in enumerate(self.values)]
        return _csv(["n", "logmag", "envelope"], rows)


def cauchy_bound(f: Seed, r: float = 1.0) -> float:
    """``log M`` with ``M = sum_j |a_j| r^j``, so ``|a_j| <= M / r^j``."""
    la = _log_abs_coeffs(f) + np.arange(_seed_degree(f) + 1) * math.log(r)
    la = la[np.isfinite(la)]
    if la.size == 0:
        return -math.inf
    top = la.max()
    return float(top + math.log(np.exp(la - top).sum()))


def eval0_decay(f: Seed, N: int, R: float = 2.0, r: float = 1.0) -> Eval0Decay:
    """``log|P^n f(0)| = log|c_n f^(n)(0)|`` for the derivative map, ``n <= N``.

    When ``growth_profile(f, R, N+1)`` is bounded, ``L`` is taken as the
    largest ``|c_{n+1}| (n!)^2`` seen and the envelope
    ``log L - 2 log n! + log M + log (n+1)! - (n+1) log r`` is asserted.
    """
    ders = log_derivatives(f, N + 1)
    c = _log_cocycle(ders, N + 1)
    vals = tuple(lc_mul(c[n], ders[n]).logmag for n in range(N + 1))
    prof = growth_profile(f, R, N + 1)
    env = ok = cb = logL = None
    if prof.classification == "bounded":
        logM = cauchy_bound(f, r)
        logL = max(c[n + 1].logmag + 2 * math.lgamma(n + 1) for n in range(N))
        env = tuple(logL - 2 * math.lgamma(n + 1) + logM + math.lgamma(n + 2) - (n + 1) * math.log(r)
                    for n in range(N))
        ok = all(vals[n + 1] <= env[n] + 1e-9 * max(1.0, abs(env[n])) for n in range(N))
        cb = (logM, r)
        if not ok:
            raise AssertionError("Cauchy envelope violated")
    return Eval0Decay(vals, prof, env, ok, cb, logL, _seed_degree(f))


# ---------------------------------------------------------------------------
# Taylor seminorms


@dataclass(frozen=True)
class TaylorSeminorm:
    k: float
    value: float


def log_taylor_seminorm(f: Seed, k: float) -> float:
    if not k > 0:
        raise ValueError("k must be positive")
    if isinstance(f, ScaledFn):
        return f.scale.logmag + log_taylor_seminorm(f.body, k)
    la = _log_abs_coeffs(f)
    return float(np.max(la + np.arange(la.size) * math.log(k)))


def taylor_seminorm(f: Seed, k: float) -> TaylorSeminorm:
    """``sup_j |a_j| k^j``; may be ``inf`` for huge scaled iterates."""
    lv = log_taylor_seminorm(f, k)
    if isinstance(f, TaylorPoly) and lv < 700:
        # direct sum when it fits: exact for constants and monomials
        j = np.arange(len(f.coeffs))
        return TaylorSeminorm(float(k), float(np.max(np.abs(f.array()) * float(k) ** j)))
    return TaylorSeminorm(float(k), math.exp(lv) if lv < 709 else math.inf)


# ---------------------------------------------------------------------------
# zero tracking


@dataclass(frozen=True)
class ZeroTrace:
    steps: tuple[tuple[int, tuple[tuple[Disk, int], ...]], ...]
    crosscheck: tuple[tuple[int, tuple[int, ...]], ...] = ()  # argument-principle counts
    predictions: tuple[tuple[int, tuple[int, ...]], ...] | None = None

    def counts(self, k: int) -> tuple[int, ...]:
        return tuple(c for _, c in dict(self.steps)[k])

    def agrees(self) -> bool:
        return all(self.counts(k) == cc for k, cc in self.crosscheck)

    def to_csv(self) -> str:
        rows = []
        cross = dict(self.crosscheck)
        for k, per in self.steps:
            for i, (d, c) in enumerate(per):
                x = cross.get(k)
                rows.append((k, d.center.real, d.center.imag, d.radius, c, "" if x is None else x[i]))
        return _csv(["step", "center_re", "center_im", "radius", "count", "argument_principle"], rows)


def _poly_zeros(g: EntireFn) -> np.ndarray:
    if not isinstance(g, TaylorPoly):
        raise TypeError("analytic zero counts need a TaylorPoly seed")
    c = g.array()
    if not np.any(c):
        raise ValueError("g is identically zero")
    nz = np.nonzero(c)[0]
    c = c[: nz[-1] + 1]
    return np.roots(c[::-1]) if c.size > 1 else np.array([], dtype=complex)


def _inside(zs: np.ndarray, d: Disk) -> int:
    return int(np.sum(np.abs(zs - d.center) < d.radius))


def _analytic_counts(pmap: PolyMap, zs: np.ndarray, k: int, disks) -> tuple[int, ...] | None:
    if isinstance(pmap, TwoTranslate):
        a, b = pmap.a, pmap.b
        if pmap.degenerate:
            shifts = [(k * a, 2**k)]
        else:
            shifts = [(j * a + (k - j) * b, math.comb(k, j)) for j in range(k + 1)]
        # zeros of g(z + s) are zeros of g moved by -s
        return tuple(sum(e * _inside(zs - s, d) for s, e in shifts) for d in disks)
    if isinstance(pmap, TranslationEval):
        return tuple(_inside(zs - k, d) for d in disks)
    return None


def hurwitz_track(pmap: PolyMap, g: EntireFn, disks: Union[Sequence[Disk], Callable[[int], Sequence[Disk]]],
                  K: int, grid: SampleGrid = SampleGrid(),
                  budget: int = DEFAULT_DEGREE_BUDGET, cross_max: int = 4) -> ZeroTrace:
    """Zero counts of ``P^k g`` per disk for ``k = 0..K``.

    ``disks`` is a fixed list or a function of ``k``.  For translation-type
    maps counts come from the factor bookkeeping and are cross-checked with
    the argument principle on the expanded iterate for ``k <= cross_max``
    while its degree fits ``budget`` (past that the modulus range along the
    contour defeats double precision).  Other maps are counted by the argument principle only.
    """
    disk_fn = disks if callable(disks) else (lambda k, _d=tuple(disks): _d)
    analytic = isinstance(pmap, (TwoTranslate, TranslationEval))
    zs = _poly_zeros(g) if analytic else None
    steps, cross = [], []
    if analytic:
        for k in range(K + 1):
            ds = tuple(disk_fn(k))
            cnt = _analytic_counts(pmap, zs, k, ds)
            steps.append((k, tuple(zip(ds, cnt))))
            if k > cross_max:
                continue
            it = iterate_closed(pmap, g, k)
            if isinstance(it, FactoredFn):
                if it.total_degree > budget:
                    continue
                it = expand(it, budget)
            if isinstance(it, ScaledFn) and it.scale.is_zero:
                continue
            cross.append((k, tuple(count_zeros(it, d, grid) for d in ds)))
        return ZeroTrace(tuple(steps), tuple(cross))
    recs = orbit(pmap, g, K, DiagnosticsConfig(grid=grid, budget=budget))
    for r in recs:
        ds = tuple(disk_fn(r.step))
        steps.append((r.step, tuple((d, count_zeros(r.iterate, d, grid)) for d in ds)))
    return ZeroTrace(tuple(steps))


# ---------------------------------------------------------------------------
# critical point persistence


@dataclass(frozen=True)
class PersistenceReport:
    map_name: str
    z0: complex
    quantity: str  # what is tracked at z0
    hypothesis_ok: bool
    values: tuple[tuple[int, float, float], ...] = ()  # (n, |quantity|, rounding scale)

    @property
    def ok(self) -> bool:
        return self.hypothesis_ok and all(v <= PERSISTENCE_TOL * s for _, v, s in self.values)


def _rounding_scale(body: TaylorPoly, z0: complex, deriv: bool) -> float:
    a = np.abs(body.array())
    j = np.arange(a.size)
    w = a * (j if deriv else 1) * max(1.0, abs(z0)) ** j
    return float(w.max()) if w.size else 0.0


def derivative_zero_persistence(pmap: Union[DerivSquare, SelfTimesDeriv], g: EntireFn, z0: complex,
                                N: int, budget: int = DEFAULT_DEGREE_BUDGET,
                                strict: bool = True) -> PersistenceReport:
    """Track a critical point of ``g`` along the orbit.

    For ``g'^2`` a zero of ``g'`` at ``z0`` gives ``(P g)'(z0) = 0``, so the
    derivative is tracked.  For ``g g'`` it gives ``(P g)(z0) = 0`` and then
    ``P^n g(z0) = 0`` for every ``n >= 1``, so the value is tracked from the
    first step on.  Without the hypothesis nothing is asserted.
    """
    z0 = complex(z0)
    if not isinstance(pmap, (DerivSquare, SelfTimesDeriv)):
        raise TypeError("persistence applies to the derivative-square and self-times-derivative maps")
    quantity = "derivative" if isinstance(pmap, DerivSquare) else "value"
    if eval_fn(derivative(g), z0) != 0:
        return PersistenceReport(pmap.name, z0, "hypothesis not satisfied", False)
    rows = []
    for rec in orbit(pmap, g, N, DiagnosticsConfig(budget=budget)):
        if isinstance(pmap, SelfTimesDeriv) and rec.step == 0:
            continue
        it = rec.iterate
        body = it.body
        if quantity == "derivative":
            v = abs(eval_fn(derivative(body), z0))
        else:
            v = abs(eval_fn(body, z0))
        rows.append((rec.step, float(v), _rounding_scale(body, z0, quantity == "derivative")))
    rep = PersistenceReport(pmap.name, z0, quantity, True, tuple(rows))
    if strict and not rep.ok:
        n = next(n for n, v, s in rows if v > PERSISTENCE_TOL * s)
        raise PersistenceViolated(f"{quantity} at z0 nonzero at step {n}")
    return rep


# ---------------------------------------------------------------------------


def _csv(head, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(head)
    for row in rows:
        w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])
    return buf.getvalue()
