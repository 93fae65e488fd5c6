"""Computable surrogates for entire functions and extreme-magnitude scalars.

Three polynomial representations are provided:

* ``TaylorPoly``   -- monomial coefficients in ``z``.
* ``PeriodicPoly`` -- monomial coefficients in ``w = exp(2 pi i z / n)``.
* ``OrthoPoly``    -- coefficients in a discrete-orthogonal basis produced by
  the Arnoldi process on a point cloud.  This is what the approximation
  solver returns, because monomial coefficients of a degree-90 polynomial
  that is O(1) on ``[-2, 12]`` are not representable in double precision.

All types are immutable; every operation returns a new value.
"""

from __future__ import annotations

import base64
import cmath
import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

DEFAULT_DEGREE_BUDGET = 128
TWO_PI = 2.0 * math.pi


class DegreeBudgetExceeded(ValueError):
    pass


class ZeroScalarError(ValueError):
    pass


# ---------------------------------------------------------------------------
# LogComplex


def _wrap_phase(phase: float) -> float:
    p = math.remainder(phase, TWO_PI)
    if p <= -math.pi:
        p += TWO_PI
    return p


@dataclass(frozen=True)
class LogComplex:
    """A complex scalar stored as ``exp(logmag) * exp(i * phase)``.

    ``logmag == -inf`` encodes zero; its phase is always 0.
    """

    logmag: float
    phase: float = 0.0

    def __post_init__(self):
        if math.isnan(self.logmag) or math.isnan(self.phase):
            raise ValueError("NaN in LogComplex")
        if self.logmag == -math.inf:
            object.__setattr__(self, "phase", 0.0)
        else:
            object.__setattr__(self, "phase", _wrap_phase(self.phase))

    @classmethod
    def from_complex(cls, x: complex) -> "LogComplex":
        x = complex(x)
        if x == 0:
            return ZERO
        return cls(math.log(abs(x)), cmath.phase(x))

    @property
    def is_zero(self) -> bool:
        return self.logmag == -math.inf

    def to_complex(self) -> complex:
        if self.is_zero:
            return 0j
        return cmath.rect(math.exp(self.logmag), self.phase)

    def __mul__(self, other: "LogComplex") -> "LogComplex":
        return lc_mul(self, other)

    def __truediv__(self, other: "LogComplex") -> "LogComplex":
        return lc_mul(self, lc_inv(other))

    def __pow__(self, e: float) -> "LogComplex":
        return lc_pow(self, e)

    def to_json(self) -> dict:
        return {"logmag": _num(self.logmag), "phase": _num(self.phase)}

    @classmethod
    def from_json(cls, d: dict) -> "LogComplex":
        return cls(float(d["logmag"]), float(d["phase"]))


ZERO = LogComplex(-math.inf, 0.0)
ONE = LogComplex(0.0, 0.0)


def lc_mul(x: LogComplex, y: LogComplex) -> LogComplex:
    if x.is_zero or y.is_zero:
        return ZERO
    return LogComplex(x.logmag + y.logmag, x.phase + y.phase)


def lc_inv(x: LogComplex) -> LogComplex:
    if x.is_zero:
        raise ZeroScalarError("inverse of zero scalar")
    return LogComplex(-x.logmag, -x.phase)


def lc_pow(x: LogComplex, e: float) -> LogComplex:
    if x.is_zero:
        if e > 0:
            return ZERO
        raise ZeroScalarError("nonpositive power of zero scalar")
    if x.phase == 0.0:
        return LogComplex(x.logmag * e, 0.0)
    return LogComplex(x.logmag * e, x.phase * e)


def lc_root(x: LogComplex, m: int) -> LogComplex:
    """Principal ``m``-th root."""
    if m < 1:
        raise ValueError("root order must be a positive integer")
    if x.is_zero:
        raise ZeroScalarError("root of zero scalar")
    return LogComplex(x.logmag / m, x.phase / m)


def lc_prod(factors: Sequence[tuple[complex, float]]) -> LogComplex:
    """``prod(v ** e)`` over ``(v, e)`` pairs, evaluated in the log domain."""
    out = ONE
    for v, e in factors:
        out = lc_mul(out, lc_pow(LogComplex.from_complex(v), e))
    return out


# ---------------------------------------------------------------------------
# polynomial surrogates


def _normalize(coeffs) -> tuple[complex, ...]:
    c = [complex(a) for a in coeffs]
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    if not c:
        c = [0j]
    return tuple(c)


@dataclass(frozen=True)
class TaylorPoly:
    coeffs: tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _normalize(self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0j,)

    def array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=complex)


@dataclass(frozen=True)
class PeriodicPoly:
    """``h(w)`` with ``w = exp(2 pi i z / period)``.

    ``h`` is either the monomial sum ``sum_k b_k w^k`` or, when ``inner`` is
    set, an ``OrthoPoly`` in ``w``.  Fitted periodic vectors use the inner
    form: they are huge on most of ``|w| = 1`` and their monomial
    coefficients cannot be recovered in double precision.
    """

    period: int
    wcoeffs: tuple[complex, ...] = (0j,)
    inner: "OrthoPoly | None" = None

    def __post_init__(self):
        if int(self.period) != self.period or self.period < 1:
            raise ValueError("period must be a positive integer")
        object.__setattr__(self, "period", int(self.period))
        object.__setattr__(self, "wcoeffs", _normalize(self.wcoeffs))

    @property
    def degree(self) -> int:
        if self.inner is not None:
            return self.inner.degree
        return len(self.wcoeffs) - 1

    def array(self) -> np.ndarray:
        return np.array(self.wcoeffs, dtype=complex)

    def w_of(self, z):
        return np.exp(1j * TWO_PI * np.asarray(z, dtype=complex) / self.period)


@dataclass(frozen=True, eq=False)
class OrthoPoly:
    """Polynomial in the Arnoldi basis of a point cloud.

    The basis is generated by ``q_0 = 1`` and
    ``hess[k+1, k] q_{k+1}(t) = t q_k(t) - sum_{j<=k} hess[j, k] q_j(t)``
    with ``t = (zmul * z + shift - center) / scale``.  ``nderiv`` > 0 means
    the value is the ``nderiv``-th derivative in ``t * scale``.
    """

    center: complex
    scale: float
    hess: np.ndarray
    coeffs: np.ndarray
    shift: complex = 0j
    nderiv: int = 0
    zmul: complex = 1 + 0j

    @property
    def degree(self) -> int:
        return max(len(self.coeffs) - 1 - self.nderiv, 0)

    def basis(self, z, nderiv: int | None = None) -> np.ndarray:
        nd = self.nderiv if nderiv is None else nderiv
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.zmul != 1:
            z = self.zmul * z
        t = (z + self.shift - self.center) / self.scale
        n = len(self.coeffs)
        # derivative levels 0..nd of every basis function
        Q = np.zeros((nd + 1, t.size, n), dtype=complex)
        Q[0, :, 0] = 1.0
        for k in range(n - 1):
            h = self.hess[: k + 1, k]
            for d in range(nd + 1):
                v = t * Q[d, :, k] - Q[d, :, : k + 1] @ h
                if d:
                    v = v + d * Q[d - 1, :, k]
                Q[d, :, k + 1] = v / self.hess[k + 1, k]
        return Q[nd] / self.scale**nd

    def to_json(self) -> dict:
        n = len(self.coeffs)
        return {
            "kind": "ortho",
            "center": _cstr(self.center),
            "scale": _num(self.scale),
            "shift": _cstr(self.shift),
            "zmul": _cstr(self.zmul),
            "nderiv": self.nderiv,
            "size": n,
            # only the upper Hessenberg band is stored
            "hess": _b64(np.concatenate([self.hess[: k + 2, k] for k in range(n - 1)])
                         if n > 1 else np.zeros(0, complex)),
            "coeffs": _b64(self.coeffs),
        }


@dataclass(frozen=True)
class SumFn:
    """``sum(terms)``; keeps a telescoping construction exact term by term."""

    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("SumFn needs at least one term")

    @property
    def degree(self) -> int:
        return max(t.degree for t in self.terms)


EntireFn = Union[TaylorPoly, PeriodicPoly, OrthoPoly, SumFn]


@dataclass(frozen=True)
class ScaledFn:
    """``scale * body``; magnitude extremes live in ``scale``."""

    scale: LogComplex
    body: EntireFn


@dataclass(frozen=True)
class FactoredFn:
    """``scale * prod(base_i ** e_i)``."""

    factors: tuple[tuple[EntireFn, int], ...]
    scale: LogComplex = ONE

    def __post_init__(self):
        facs = tuple((b, int(e)) for b, e in self.factors)
        if any(e < 1 for _, e in facs):
            raise ValueError("factor exponents must be >= 1")
        object.__setattr__(self, "factors", facs)

    @property
    def total_degree(self) -> int:
        return sum(e * b.degree for b, e in self.factors)


# ---------------------------------------------------------------------------
# operations


def eval_fn(f: EntireFn, z):
    """Evaluate ``f`` at a scalar or array of points."""
    scalar = np.isscalar(z)
    zz = np.asarray(z, dtype=complex)
    if isinstance(f, TaylorPoly):
        out = np.zeros_like(zz)
        for a in reversed(f.coeffs):
            out = out * zz + a
    elif isinstance(f, PeriodicPoly):
        w = f.w_of(zz)
        if f.inner is not None:
            out = eval_fn(f.inner, w)
        else:
            out = np.zeros_like(zz)
            for b in reversed(f.wcoeffs):
                out = out * w + b
    elif isinstance(f, OrthoPoly):
        out = (f.basis(zz.ravel()) @ f.coeffs).reshape(zz.shape)
    elif isinstance(f, SumFn):
        out = np.zeros_like(zz)
        for t in f.terms:
            out = out + eval_fn(t, zz)
    else:
        raise TypeError(f"cannot evaluate {type(f).__name__}")
    return complex(out) if scalar else out


def taylor_shift(coeffs: Sequence[complex], a: complex) -> list[complex]:
    """Coefficients of ``p(z + a)`` by repeated synthetic division."""
    c = [complex(x) for x in coeffs]
    n = len(c)
    for k in range(n - 1):
        for i in range(n - 2, k - 1, -1):
            c[i] += a * c[i + 1]
    return c


def translate(f: EntireFn, a: complex) -> EntireFn:
    """``g(z) = f(z + a)``."""
    a = complex(a)
    if isinstance(f, TaylorPoly):
        return TaylorPoly(taylor_shift(f.coeffs, a))
    if isinstance(f, PeriodicPoly):
        whole = a.imag == 0 and float(a.real).is_integer() and int(a.real) % f.period == 0
        if whole:
            return f
        if f.inner is not None:
            lam = cmath.exp(1j * TWO_PI * a / f.period)
            g = f.inner
            return PeriodicPoly(f.period, inner=OrthoPoly(
                g.center, g.scale, g.hess, g.coeffs, g.shift, g.nderiv, g.zmul * lam))
        k = np.arange(len(f.wcoeffs))
        phase = np.exp(1j * TWO_PI * k * a / f.period)
        return PeriodicPoly(f.period, tuple(f.array() * phase))
    if isinstance(f, OrthoPoly):
        return OrthoPoly(f.center, f.scale, f.hess, f.coeffs, f.shift + a * f.zmul,
                         f.nderiv, f.zmul)
    if isinstance(f, SumFn):
        return SumFn(tuple(translate(t, a) for t in f.terms))
    raise TypeError(type(f).__name__)


def derivative(f: EntireFn) -> EntireFn:
    if isinstance(f, TaylorPoly):
        c = f.coeffs
        return TaylorPoly([k * c[k] for k in range(1, len(c))] or [0])
    if isinstance(f, PeriodicPoly):
        if f.inner is not None:
            raise NotImplementedError("derivative of a fitted periodic function")
        k = np.arange(len(f.wcoeffs))
        return PeriodicPoly(f.period, tuple(f.array() * (1j * TWO_PI * k / f.period)))
    if isinstance(f, OrthoPoly):
        if f.zmul != 1:
            # chain rule: d/dz q(zmul z) = zmul q'(zmul z)
            return scale_fn(OrthoPoly(f.center, f.scale, f.hess, f.coeffs, f.shift,
                                      f.nderiv + 1, f.zmul), f.zmul)
        return OrthoPoly(f.center, f.scale, f.hess, f.coeffs, f.shift, f.nderiv + 1)
    if isinstance(f, SumFn):
        return SumFn(tuple(derivative(t) for t in f.terms))
    raise TypeError(type(f).__name__)


def nth_derivative(f: EntireFn, n: int) -> EntireFn:
    for _ in range(n):
        f = derivative(f)
    return f


def scale_fn(f: EntireFn, c: complex) -> EntireFn:
    """``c * f``."""
    if isinstance(f, TaylorPoly):
        return TaylorPoly(tuple(f.array() * c))
    if isinstance(f, PeriodicPoly):
        if f.inner is not None:
            return PeriodicPoly(f.period, inner=scale_fn(f.inner, c))
        return PeriodicPoly(f.period, tuple(f.array() * c))
    if isinstance(f, OrthoPoly):
        return OrthoPoly(f.center, f.scale, f.hess, f.coeffs * c, f.shift, f.nderiv, f.zmul)
    if isinstance(f, SumFn):
        return SumFn(tuple(scale_fn(t, c) for t in f.terms))
    raise TypeError(type(f).__name__)


def poly_mul(p: TaylorPoly, q: TaylorPoly) -> TaylorPoly:
    return TaylorPoly(np.convolve(p.array(), q.array()))


def _drain(c: np.ndarray) -> tuple[np.ndarray, float]:
    m = float(np.max(np.abs(c)))
    if m == 0.0:
        return c, -math.inf
    # scale by a power of two first: complex division by a subnormal overflows
    e = math.frexp(m)[1]
    c = np.ldexp(c.real, -e) + 1j * np.ldexp(c.imag, -e)
    m2 = float(np.max(np.abs(c)))
    return c / m2, math.log(m2) + e * math.log(2)


def to_scaled(f: EntireFn) -> ScaledFn:
    """Move the coefficient magnitude of a Taylor or periodic body into the scale."""
    if isinstance(f, TaylorPoly):
        c, lm = _drain(f.array())
        if lm == -math.inf:
            return ScaledFn(ZERO, TaylorPoly([0]))
        return ScaledFn(LogComplex(lm), TaylorPoly(c))
    if isinstance(f, PeriodicPoly) and f.inner is None:
        c, lm = _drain(f.array())
        if lm == -math.inf:
            return ScaledFn(ZERO, PeriodicPoly(f.period, [0]))
        return ScaledFn(LogComplex(lm), PeriodicPoly(f.period, c))
    return ScaledFn(ONE, f)


def expand(f: FactoredFn, budget: int = DEFAULT_DEGREE_BUDGET) -> ScaledFn:
    """Multiply out a factored function into ``scale * TaylorPoly``."""
    if f.total_degree > budget:
        raise DegreeBudgetExceeded(
            f"degree budget exceeded: {f.total_degree} > {budget}")
    acc = np.array([1.0 + 0j])
    logscale = 0.0
    for base, e in f.factors:
        if not isinstance(base, TaylorPoly):
            raise TypeError("expand needs TaylorPoly factors")
        b, lb = _drain(base.array())
        if lb == -math.inf:
            return ScaledFn(ZERO, TaylorPoly([0]))
        for _ in range(e):
            acc, la = _drain(np.convolve(acc, b))
            logscale += la + lb
    scale = lc_mul(f.scale, LogComplex(logscale))
    return ScaledFn(scale, TaylorPoly(acc))


def log_eval(f, z) -> tuple[np.ndarray, np.ndarray]:
    """``(log|f(z)|, arg f(z))`` for any surrogate, without forming huge numbers."""
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    with np.errstate(divide="ignore"):
        if isinstance(f, ScaledFn):
            v = eval_fn(f.body, zz)
            return f.scale.logmag + np.log(np.abs(v)), f.scale.phase + np.angle(v)
        if isinstance(f, FactoredFn):
            lm = np.full(zz.shape, f.scale.logmag)
            ph = np.full(zz.shape, f.scale.phase)
            for base, e in f.factors:
                v = eval_fn(base, zz)
                lm = lm + e * np.log(np.abs(v))
                ph = ph + e * np.angle(v)
            return lm, ph
        v = eval_fn(f, zz)
        return np.log(np.abs(v)), np.angle(v)


def eval_any(f, z):
    """Plain complex value of a (possibly scaled or factored) function; may overflow."""
    if isinstance(f, (ScaledFn, FactoredFn)):
        lm, ph = log_eval(f, z)
        out = np.exp(lm) * np.exp(1j * ph)
        return complex(out[0]) if np.isscalar(z) else out
    return eval_fn(f, z)


def value_lc(f: EntireFn, z: complex) -> LogComplex:
    return LogComplex.from_complex(eval_fn(f, complex(z)))


def truncated_exp(d: int) -> TaylorPoly:
    return TaylorPoly([1.0 / math.factorial(k) for k in range(d + 1)])


# ---------------------------------------------------------------------------
# fnspec mini-language
#
#   spec     := poly | exp | periodic
#   poly     := "poly:" clist
#   exp      := "exp:" INT
#   periodic := "periodic:" INT ":" clist
#   clist    := complex ("," complex)*
#   complex  := real | real? ("+"|"-") real? ("i"|"j") | real? ("i"|"j")


class FnSpecError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


_REAL = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX_RE = re.compile(
    rf"^\s*(?P<re>[+-]?{_REAL})?\s*(?:(?P<sign>[+-])?\s*(?P<im>{_REAL})?\s*(?P<unit>[ij]))?\s*$"
)


def parse_complex(text: str, position: int = 0) -> complex:
    m = _COMPLEX_RE.match(text)
    if not text.strip() or m is None or (m.group("re") is None and m.group("unit") is None):
        raise FnSpecError(f"bad complex literal {text!r}", position)
    re_part = float(m.group("re")) if m.group("re") is not None else 0.0
    im_part = 0.0
    if m.group("unit"):
        if m.group("re") is not None and m.group("sign") is None and m.group("im") is None:
            # "2i": the leading number is the imaginary part
            im_part, re_part = re_part, 0.0
        elif m.group("re") is not None and m.group("sign") is None:
            raise FnSpecError(f"bad complex literal {text!r}", position)
        else:
            im_part = float(m.group("im")) if m.group("im") is not None else 1.0
            if m.group("sign") == "-":
                im_part = -im_part
    return complex(re_part, im_part)


def _parse_clist(body: str, offset: int) -> list[complex]:
    out = []
    pos = offset
    for item in body.split(","):
        out.append(parse_complex(item, pos))
        pos += len(item) + 1
    return out


def parse_fnspec(text: str) -> EntireFn:
    """Parse ``poly:...``, ``exp:d`` or ``periodic:n:...`` into a surrogate."""
    kind, sep, rest = text.partition(":")
    if not sep:
        raise FnSpecError("expected '<kind>:'", len(text))
    start = len(kind) + 1
    if kind == "poly":
        return TaylorPoly(_parse_clist(rest, start))
    if kind == "exp":
        if not rest.strip().isdigit():
            raise FnSpecError(f"expected a nonnegative integer degree, got {rest!r}", start)
        return truncated_exp(int(rest))
    if kind == "periodic":
        n_txt, sep2, clist = rest.partition(":")
        if not sep2:
            raise FnSpecError("expected 'periodic:<n>:<coeffs>'", len(text))
        if not n_txt.strip().isdigit() or int(n_txt) < 1:
            raise FnSpecError(f"bad period {n_txt!r}", start)
        return PeriodicPoly(int(n_txt), _parse_clist(clist, start + len(n_txt) + 1))
    raise FnSpecError(f"unknown function kind {kind!r}", 0)


# ---------------------------------------------------------------------------
# serialization (17 significant digits round-trips a double exactly)


def _num(x: float) -> str:
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return f"{x:.17g}"


def _cstr(z: complex) -> str:
    z = complex(z)
    return f"{z.real:.17g}{z.imag:+.17g}j"


def _cparse(s: str) -> complex:
    return complex(s)


def _b64(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<c16").tobytes()).decode("ascii")


def _unb64(s: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<c16").astype(complex)


def fn_to_json(f) -> dict:
    if isinstance(f, TaylorPoly):
        return {"kind": "taylor", "coeffs": [_cstr(a) for a in f.coeffs]}
    if isinstance(f, PeriodicPoly):
        if f.inner is not None:
            return {"kind": "periodic", "period": f.period, "inner": f.inner.to_json()}
        return {"kind": "periodic", "period": f.period, "wcoeffs": [_cstr(b) for b in f.wcoeffs]}
    if isinstance(f, OrthoPoly):
        return f.to_json()
    if isinstance(f, SumFn):
        return {"kind": "sum", "terms": [fn_to_json(t) for t in f.terms]}
    if isinstance(f, ScaledFn):
        return {"kind": "scaled", "scale": f.scale.to_json(), "body": fn_to_json(f.body)}
    if isinstance(f, FactoredFn):
        return {
            "kind": "factored",
            "scale": f.scale.to_json(),
            "factors": [[fn_to_json(b), e] for b, e in f.factors],
        }
    raise TypeError(type(f).__name__)


def fn_from_json(d: dict):
    kind = d["kind"]
    if kind == "taylor":
        return TaylorPoly([_cparse(s) for s in d["coeffs"]])
    if kind == "periodic":
        if "inner" in d:
            return PeriodicPoly(int(d["period"]), inner=fn_from_json(d["inner"]))
        return PeriodicPoly(int(d["period"]), [_cparse(s) for s in d["wcoeffs"]])
    if kind == "ortho":
        n = int(d["size"])
        band = _unb64(d["hess"])
        hess = np.zeros((n, max(n - 1, 0)), dtype=complex)
        pos = 0
        for k in range(n - 1):
            hess[: k + 2, k] = band[pos: pos + k + 2]
            pos += k + 2
        return OrthoPoly(
            center=_cparse(d["center"]),
            scale=float(d["scale"]),
            hess=hess,
            coeffs=_unb64(d["coeffs"]),
            shift=_cparse(d["shift"]),
            nderiv=int(d["nderiv"]),
            zmul=_cparse(d.get("zmul", "1+0j")),
        )
    if kind == "sum":
        return SumFn(tuple(fn_from_json(t) for t in d["terms"]))
    if kind == "scaled":
        return ScaledFn(LogComplex.from_json(d["scale"]), fn_from_json(d["body"]))
    if kind == "factored":
        return FactoredFn(
            tuple((fn_from_json(b), int(e)) for b, e in d["factors"]),
            LogComplex.from_json(d["scale"]),
        )
    raise ValueError(f"unknown function kind {kind!r}")
