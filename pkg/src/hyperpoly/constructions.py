"""Witness builders for mixing, chaos and frequent hypercyclicity of P(f) = f(0) f(z+1).

Every builder verifies its own output; a witness that fails verification is
never returned silently.

Shared device: the cocycle ``c_n(p) = prod_k p(k)^(2^(n-1-k))`` depends only on
the integer node values, so pinning those values exactly through solver point
constraints makes ``c_n(p) = 1`` up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import (
    TranslationEval,
    ZeroNodeError,
    cocycle_translation,
    cocycle_unity,
    iterate_closed,
)
from .fnspace import (
    EntireFn,
    LogComplex,
    OrthoPoly,
    PeriodicPoly,
    ScaledFn,
    SumFn,
    eval_any,
    eval_fn,
    fn_from_json,
    fn_to_json,
    lc_inv,
    lc_mul,
    lc_pow,
    lc_prod,
    lc_root,
    scale_fn,
    translate,
)
from .runge import ApproxProblem, PointConstraint, RegionTarget, SolverError, solve
from .topology import (
    Disk,
    LayoutInfeasible,
    MappedDisk,
    RegionSet,
    SampleGrid,
    layout_fh,
    layout_mixing,
    layout_unity,
    roots_of_unity,
    sup_diff,
)


class WitnessFailed(SolverError):
    """A solve returned but the built object does not meet its tolerances."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


def _lc_json(c: LogComplex) -> list[float]:
    return [c.logmag, c.phase]


def _nonzero(values, label: str = "integer node"):
    for k, v in values:
        if v == 0:
            raise ZeroNodeError(f"zero at {label} {k}")


# ---------------------------------------------------------------------------
# mixing


@dataclass(frozen=True)
class MixingWitnessSpec:
    f: EntireFn
    g: EntireFn
    eps: float
    R: float
    n: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.R > 0 or float(self.R).is_integer():
            raise ValueError("R must be a positive non-integer")
        if not self.n > 2 * self.R + 2:
            raise LayoutInfeasible(f"layout infeasible: n <= 2R+2 ({self.n} <= {2 * self.R + 2:g})")


@dataclass(frozen=True, eq=False)
class MixingWitness:
    p: EntireFn
    res_start: float
    res_end: float
    cn: LogComplex
    degree: int = 0
    alpha: LogComplex | None = None

    def to_json(self) -> dict:
        return {
            "p": fn_to_json(self.p),
            "res_start": self.res_start,
            "res_end": self.res_end,
            "cn": _lc_json(self.cn),
            "degree": self.degree,
        }


MIX_TOL_FACTOR = 0.9  # solver tolerance as a fraction of eps; sampled sups sit slightly below polished ones
NODE_WEIGHT = 1e-3  # soft disks around pinned nodes keep the basis evaluable there


def _node_targets(layout: RegionSet, vals: dict, locate) -> list[RegionTarget]:
    """Soft targets on the layout's node disks, each carrying its pinned value."""
    out = []
    for d, lab in zip(layout.disks, layout.labels):
        if lab in ("B1", "B2", "B3") and isinstance(d, Disk):
            out.append(RegionTarget(d, vals[locate(d.center)], lab, NODE_WEIGHT))
    return out


def mixing_alpha(f: EntireFn, g_shift: EntireFn, R: float, n: int) -> LogComplex:
    """The root ``alpha`` whose inverse at node ``floor(R)+1`` pins ``c_n = 1``."""
    fl = math.floor(R)
    prod = lc_prod([(eval_fn(f, j), 2 ** (n - 1 - j)) for j in range(fl + 1)]
                   + [(eval_fn(g_shift, j), 2 ** (n - 1 - j)) for j in range(n - fl, n)])
    return lc_root(prod, 2 ** (n - fl - 2))


def mixing_nodes(f: EntireFn, g_shift: EntireFn, R: float, n: int) -> dict[int, complex]:
    fl = math.floor(R)
    _nonzero([(j, eval_fn(f, j)) for j in range(fl + 1)])
    _nonzero([(j, eval_fn(g_shift, j)) for j in range(n - fl, n)])
    inv_alpha = lc_inv(mixing_alpha(f, g_shift, R, n)).to_complex()
    vals = {j: eval_fn(f, j) for j in range(fl + 1)}
    vals[fl + 1] = inv_alpha
    vals.update({j: 1.0 + 0j for j in range(fl + 2, n - fl)})
    vals.update({j: eval_fn(g_shift, j) for j in range(n - fl, n)})
    return vals


def verify_mixing(p: EntireFn, spec: MixingWitnessSpec, grid: SampleGrid = SampleGrid()):
    """``(res_start, res_end, c_n)`` measured from scratch."""
    res_start = sup_diff(p, spec.f, Disk(0, spec.R), grid)
    it = iterate_closed(TranslationEval(), p, spec.n)
    res_end = sup_diff(lambda z: eval_any(it, z), spec.g, Disk(0, spec.R), grid)
    return res_start, res_end, cocycle_translation(p, spec.n)[spec.n]


def build_mixing_witness(spec: MixingWitnessSpec, budget: int = 96,
                         grid: SampleGrid = SampleGrid()) -> MixingWitness:
    """A polynomial ``p`` with ``p`` near ``f`` on ``B(0,R)`` and ``P^n p`` near ``g``.

    Only the two outer disks carry least-squares targets; the middle
    integers are pinned exactly (``1/alpha`` next to ``B(0,R)``, ``1`` beyond),
    which is all the cocycle sees.
    """
    R, n = spec.R, spec.n
    layout = layout_mixing(R, n)
    g_shift = translate(spec.g, -n)
    vals = mixing_nodes(spec.f, g_shift, R, n)
    problem = ApproxProblem(
        targets=(RegionTarget(Disk(0, R), spec.f, "start"),
                 RegionTarget(Disk(n, R), g_shift, "end"),
                 *_node_targets(layout, vals, lambda c: round(c.real))),
        constraints=tuple(PointConstraint(j, v) for j, v in sorted(vals.items())),
        degree_budget=budget,
        tol=MIX_TOL_FACTOR * spec.eps,
    )
    sol = solve(problem, grid)
    res_start, res_end, cn = verify_mixing(sol.poly, spec, grid)
    w = MixingWitness(sol.poly, res_start, res_end, cn, sol.degree,
                      mixing_alpha(spec.f, g_shift, R, n))
    if not (res_start < spec.eps and res_end < spec.eps and abs(cn.logmag) < 1e-6):
        raise WitnessFailed(
            f"witness failed verification: res_start={res_start:.3g}, res_end={res_end:.3g}, "
            f"log|c_n|={cn.logmag:.3g}", w.to_json())
    return w


# ---------------------------------------------------------------------------
# periodic vectors


@dataclass(frozen=True, eq=False)
class PeriodicVector:
    v: PeriodicPoly
    n: int
    res_target: float
    res_period: float
    c_tilde: LogComplex = LogComplex(0.0)
    rescale: LogComplex = LogComplex(0.0)
    nudge: complex = 0j

    def to_json(self) -> dict:
        return {
            "v": fn_to_json(self.v),
            "n": self.n,
            "res_target": self.res_target,
            "res_period": self.res_period,
            "c_tilde": _lc_json(self.c_tilde),
            "rescale": _lc_json(self.rescale),
        }


PERIOD_TOL = 1e-6
PERIODIC_TOL_FACTOR = 0.5


def verify_periodic(v: PeriodicPoly, g: EntireFn, R: float, grid: SampleGrid = SampleGrid()):
    """``(res_target, res_period)``; the period is ``v.period``."""
    n = v.period
    res_target = sup_diff(v, g, Disk(0, R), grid)
    it = iterate_closed(TranslationEval(), v, n)
    res_period = sup_diff(lambda z: eval_any(it, z), v, Disk(0, R), grid)
    return res_target, res_period


def build_periodic_vector(g: EntireFn, eps: float, R: float, n: int, budget: int = 128,
                          grid: SampleGrid = SampleGrid()) -> PeriodicVector:
    """An ``n``-periodic point of ``P`` within ``eps`` of ``g`` on ``B(0,R)``.

    ``h`` is fitted in ``w = exp(2 pi i z / n)`` over the image of ``B(0,R)``.
    The roots of unity inside the image and the first one on either side
    carry ``g``'s own values; the remaining far roots share one value
    ``lam`` that balances the cocycle, so the final rescale
    ``c~^(-1/(2^n - 1))`` only mops up rounding.  A zero of ``g`` at a
    pinned node is nudged by ``eps/3``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    layout = layout_unity(R, n)  # raises on n <= 4R
    fl = math.floor(R)
    om = roots_of_unity(n)
    near = sorted(set(range(fl + 2)) | set(range(n - fl - 1, n)))
    far = [j for j in range(n) if j not in near]
    # node j sits at z = j, or z = j - n past the middle
    gvals = {j: eval_fn(g, j if j <= n // 2 else j - n) for j in near}
    nudge = 0j
    for j in near:
        if gvals[j] == 0:
            nudge = eps / 3
            gvals[j] = nudge
    G = lc_prod([(gvals[j], 2 ** (n - 1 - j)) for j in near])
    lam = lc_root(lc_inv(G), sum(2 ** (n - 1 - j) for j in far)).to_complex()
    vals = dict(gvals)
    vals.update({j: lam for j in far})
    image = MappedDisk(Disk(0, R), n)
    problem = ApproxProblem(
        targets=(RegionTarget(image, g, "image"),
                 *_node_targets(layout, vals,
                                lambda c: int(round(np.angle(c) / (2 * np.pi) * n)) % n)),
        constraints=tuple(PointConstraint(om[j], v) for j, v in sorted(vals.items())),
        degree_budget=budget,
        tol=PERIODIC_TOL_FACTOR * eps,
    )
    sol = solve(problem, grid)
    h = sol.poly
    c_tilde = cocycle_unity(h, n)
    rescale = lc_root(lc_inv(c_tilde), 2**n - 1)
    v = PeriodicPoly(n, inner=scale_fn(h, rescale.to_complex()))
    res_target, res_period = verify_periodic(v, g, R, grid)
    pv = PeriodicVector(v, n, res_target, res_period, c_tilde, rescale, nudge)
    if not (res_period < PERIOD_TOL and res_target < eps):
        raise WitnessFailed(
            f"periodicity verification failed: res_period={res_period:.3g}, "
            f"res_target={res_target:.3g}", pv.to_json())
    return pv


# ---------------------------------------------------------------------------
# frequency schedules


@dataclass(frozen=True)
class FrequencySchedule:
    """Pairwise disjoint sets ``A_{n,m}`` given by dyadic residue classes.

    Pair number ``p`` (1-based, in input order) owns the odd multiples of
    ``S * 2^(p-1)`` with ``S = 2 (max m + 1)``.
    """

    pairs: tuple[tuple[int, int], ...]
    horizon: int
    S: int
    density: tuple[float, ...]
    N0: tuple[int, ...]

    def members(self, pair_index: int, N: int | None = None) -> list[int]:
        N = self.horizon if N is None else N
        p = pair_index + 1
        step, first = self.S * 2**p, self.S * 2 ** (p - 1)
        m = self.pairs[pair_index][1]
        return [k for k in range(first, N + 1, step) if k > m]

    def merged(self, N: int | None = None) -> list[tuple[int, int]]:
        """Increasing ``(k, pair_index)`` up to ``N``."""
        out = [(k, i) for i in range(len(self.pairs)) for k in self.members(i, N)]
        return sorted(out)

    def radius(self, pair_index: int) -> float:
        m = self.pairs[pair_index][1]
        return m / 2 + 1 / m

    def elements(self, count: int) -> list[tuple[int, tuple[int, int], float]]:
        """First ``count`` merged elements as ``(k, (n, m), r)`` regardless of horizon."""
        N = self.horizon
        while True:
            mer = self.merged(N)
            if len(mer) >= count or not self.pairs:
                break
            N *= 2
        return [(k, self.pairs[i], self.radius(i)) for k, i in mer[:count]]

    def to_json(self) -> dict:
        return {"pairs": [list(p) for p in self.pairs], "horizon": self.horizon, "S": self.S,
                "density": list(self.density), "N0": list(self.N0)}


def check_schedule(s: FrequencySchedule, N: int | None = None) -> list[str]:
    """Exhaustive prefix checks; returns the violated constraints (empty if none)."""
    N = s.horizon if N is None else N
    bad = []
    owner = {}
    for i, (_, m) in enumerate(s.pairs):
        for k in s.members(i, N):
            if k <= m:
                bad.append(f"k > m fails for k={k}, pair {s.pairs[i]}")
            if k in owner:
                bad.append(f"k={k} in two sets")
            owner[k] = i
    ks = sorted(owner)
    # the tightest gap constraint is between neighbours only when m+m' is bounded;
    # check every pair within the largest possible reach
    reach = 2 * max((m for _, m in s.pairs), default=0)
    for a, k in enumerate(ks):
        for k2 in ks[a + 1:]:
            if k2 - k > reach:
                break
            m, m2 = s.pairs[owner[k]][1], s.pairs[owner[k2]][1]
            if not k2 - k > m + m2:
                bad.append(f"|k-k'| > m+m' fails for {k}, {k2}")
    for i in range(len(s.pairs)):
        count, mem = 0, set(s.members(i, N))
        for t in range(1, N + 1):
            count += t in mem
            if t >= s.N0[i] and count / t < s.density[i]:
                bad.append(f"density below {s.density[i]:.4g} at N={t} for pair {s.pairs[i]}")
                break
    return bad


def build_schedule(pairs: Sequence[tuple[int, int]], N: int) -> FrequencySchedule:
    pairs = tuple((int(n), int(m)) for n, m in pairs)
    if len(set(pairs)) != len(pairs):
        raise ValueError("pairs must be distinct")
    if any(n < 1 or m < 1 for n, m in pairs):
        raise ValueError("pair entries must be positive integers")
    if not pairs:
        return FrequencySchedule((), N, 2, (), ())
    mmax = max(m for _, m in pairs)
    if N < 4 * mmax * 2 ** len(pairs):
        raise ValueError(f"horizon too short: N < 4 max(m) 2^#pairs = {4 * mmax * 2 ** len(pairs)}")
    S = 2 * (mmax + 1)
    # count(A_p cap [1,N]) >= (N - S 2^(p-1)) / (S 2^p) >= N / (S 2^(p+1)) once N >= S 2^p
    density = tuple(1.0 / (S * 2 ** (p + 1)) for p in range(1, len(pairs) + 1))
    N0 = tuple(S * 2**p for p in range(1, len(pairs) + 1))
    s = FrequencySchedule(pairs, N, S, density, N0)
    bad = check_schedule(s)
    if bad:
        raise AssertionError("constraint violation at horizon: " + bad[0])
    return s


# ---------------------------------------------------------------------------
# frequently hypercyclic stages


class StageInfeasible(WitnessFailed):
    """A stage cannot meet conditions (a)-(e); ``build`` holds the stages done so far."""

    def __init__(self, message: str, report: dict | None = None, build=None):
        super().__init__(message, report)
        self.build = build


class GammaUnderflow(StageInfeasible):
    pass


@dataclass(frozen=True)
class FHConfig:
    K_max: int = 24
    budget: int = 1024
    grids: tuple[int, ...] = (1024,)  # per stage; the last entry repeats
    tol_factor: float = 0.9  # solver tolerance as a fraction of the stage's delta
    delta_factor: float = 0.5  # delta_j is this fraction of the (c)-(d) bound
    guard_factor: float = 0.5  # look-ahead disks aim this far below their planned delta
    node_weight: float = 1e-3
    node_rho: float = 0.25
    eps_l1: float = 1.0  # bound on sum eps_j; 2^-j dominates the default sequence
    gamma_floor: float = 1e-300
    zero_window: int = 8  # (e) is checked on integers in [-w, k_J + r_J + w]
    check_grid: int = 4096

    def grid(self, s: int) -> SampleGrid:
        return SampleGrid(self.grids[min(s, len(self.grids) - 1)])

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["grids"] = list(self.grids)
        return d


@dataclass(frozen=True, eq=False)
class FHStage:
    j: int
    k: int
    pair: tuple[int, int]
    r: float
    correction: EntireFn  # f_j - f_{j-1}
    delta: float
    gamma: float
    eps: float
    K: float
    audit: dict
    measured: dict
    degree: int = 0

    @property
    def ok(self) -> bool:
        return all(self.audit.values())

    def to_json(self) -> dict:
        return {"j": self.j, "k": self.k, "pair": list(self.pair), "r": self.r,
                "delta": self.delta, "gamma": self.gamma, "eps": self.eps, "K": self.K,
                "audit": dict(self.audit), "measured": dict(self.measured),
                "degree": self.degree, "correction": fn_to_json(self.correction)}


@dataclass(frozen=True, eq=False)
class FHBuild:
    stages: tuple[FHStage, ...]
    targets: tuple[EntireFn, ...]
    eps: tuple[float, ...]  # eps_1 .. eps_{J+1}
    delta0: float
    final: tuple[tuple[int, float, float], ...] = ()  # (j, bound, 1/m)
    config: FHConfig = FHConfig()

    @property
    def f(self) -> SumFn:
        return SumFn(tuple(s.correction for s in self.stages))

    @property
    def ok(self) -> bool:
        return (all(s.ok for s in self.stages) and len(self.final) == len(self.stages)
                and all(b < lim for _, b, lim in self.final))

    def to_json(self) -> dict:
        return {"stages": [s.to_json() for s in self.stages],
                "targets": [fn_to_json(t) for t in self.targets],
                "eps": list(self.eps), "delta0": self.delta0,
                "final": [list(x) for x in self.final], "config": self.config.to_json()}


def default_eps(elements) -> tuple[float, ...]:
    """``eps_j = min(1/(2 m_j), 2^-j)``: summable and strictly below ``1/m``."""
    return tuple(min(0.5 / m, 2.0 ** -(j + 1)) for j, (_, (_, m), _) in enumerate(elements))


def shifted_target(p: EntireFn, k: int) -> EntireFn:
    """``p~(z) = p(z - k)``."""
    return translate(p, -k)


def phi_gamma(x: Sequence[complex], eps_j: float, K: float, eps_l1: float) -> float:
    """A radius ``gamma`` with ``|Phi(y) - Phi(x)| < eps_j / (2 (K + eps_l1))`` on ``||y - x|| < gamma``.

    ``Phi(x) = prod x_i^(2^(k-1-i))``.  Writing ``Phi(y) = Phi(x) prod (1+u_i)^e_i``
    with ``|u_i| <= gamma/|x_i|`` and ``|log(1+u)| <= |u|/(1-|u|)`` gives the
    closed form ``gamma = L / (S + L/min|x|)`` where ``L = log(1 + tau/|Phi(x)|)``
    and ``S = sum e_i/|x_i|``.  Everything large stays in logs.
    """
    k = len(x)
    ax = np.abs(np.asarray(x, dtype=complex))
    if not np.all(ax > 0):
        raise ZeroNodeError("zero at integer node in the cocycle vector")
    tau = eps_j / (2 * (K + eps_l1))
    logphi = math.fsum(math.ldexp(math.log(a), k - 1 - i) for i, a in enumerate(ax))
    L = math.log1p(math.exp(min(math.log(tau) - logphi, 700.0)))
    S = math.fsum(math.ldexp(1.0 / a, k - 1 - i) for i, a in enumerate(ax))
    return L / (S + L / float(ax.min()))


def _next_delta(s: int, eps, gammas, deltas, factor: float) -> float:
    """``delta_{s+1}`` (0-based ``s``) from conditions (c) and (d)."""
    cands = [eps[s], eps[s + 1] / 2, gammas[s]]
    cands += [gammas[l] - math.fsum(deltas[l:s]) for l in range(s)]
    bound = min(cands)
    if not bound > 0:
        raise StageInfeasible(f"stage infeasible: condition (d) leaves no room at stage {s + 1}")
    return factor * bound


def fh_node_plan(elements, targets: Sequence[EntireFn]):
    """Values pinned at every integer node ``0 .. k_J + floor(r_J) + 1``.

    Around each ``k_j`` the shifted target's own values; between disks 1;
    one free node per stage (0 for the first, the most central gap node
    after) takes the root that makes ``c_{k_j} = 1``.
    """
    v: dict[int, complex] = {}
    fixes, shoulders = [], {}
    prev_hi = -1
    for j, (k, (n, _m), r) in enumerate(elements):
        fr = math.floor(r)
        pt = shifted_target(targets[n - 1], k)
        lo, hi = k - fr - 1, k + fr + 1
        if lo <= prev_hi + 1:
            raise StageInfeasible(f"stage infeasible: no free integer node before B_{j + 1}")
        for i in range(lo, hi + 1):
            val = eval_fn(pt, i)
            if val == 0:
                raise ZeroNodeError(f"zero at integer node {i} (target {n} shifted to {k})")
            v[i] = val
        shoulders[lo], shoulders[hi] = j, j
        mids = list(range(prev_hi + 1, lo))
        for i in mids:
            v[i] = 1.0 + 0j
        if j == 0:
            fix = 0
        else:
            kp, rp = elements[j - 1][0], elements[j - 1][2]
            fix = max(mids, key=lambda i: min(i - (kp + rp), k - r - i))
        rest = lc_prod([(v[i], 2 ** (k - 1 - i)) for i in range(k) if i != fix])
        v[fix] = lc_root(lc_inv(rest), 2 ** (k - 1 - fix)).to_complex()
        fixes.append(fix)
        prev_hi = hi
    return v, fixes, shoulders


def _sup_abs(f, disk: Disk, m: int) -> float:
    return float(np.max(np.abs(eval_fn(f, disk.boundary(m)))))


def _planned_deltas(elements, targets, v, eps, delta0, cfg: FHConfig) -> list[float]:
    """The delta chain predicted from the node plan alone (nodes are pinned exactly)."""
    gammas, deltas = [], []
    for s, (k, (n, _), r) in enumerate(elements):
        x = [v[i] for i in range(k)]
        K = max(max(abs(a) for a in x), _sup_abs(shifted_target(targets[n - 1], k), Disk(k, r), 512))
        gammas.append(phi_gamma(x, eps[s], K, cfg.eps_l1))
        deltas.append(_next_delta(s, eps, gammas, deltas, cfg.delta_factor))
    return [delta0] + deltas


def _cocycle(f, k: int) -> LogComplex:
    return cocycle_translation(f, k)[k]


def _no_integer_zeros(f, lo: int, hi: int) -> bool:
    zs = np.arange(lo, hi + 1).astype(complex)
    with np.errstate(all="ignore"):
        vals = eval_fn(f, zs)
    return bool(np.all(vals != 0))


def audit_stage(s: int, elements, targets, corrections, deltas, gammas, eps, delta0,
                cfg: FHConfig) -> tuple[dict, dict]:
    """Conditions (a)-(e) for 0-based stage ``s`` from stored data; no solving."""
    k, (n, _), r = elements[s]
    grid = SampleGrid(cfg.check_grid)
    f = SumFn(tuple(corrections[: s + 1]))
    prev_delta = delta0 if s == 0 else deltas[s - 1]
    meas, audit = {}, {}
    if s:
        kp = elements[s - 1][0]
        meas["a"] = seminorm_fn(corrections[s], Disk(0, kp + 1 / kp), grid)
        audit["a"] = meas["a"] < prev_delta
    else:
        audit["a"] = True  # nothing to preserve before the first stage
    c = _cocycle(f, k)
    meas["log_c"] = c.logmag
    cz = c.to_complex()
    meas["b"] = sup_diff(lambda z: cz * eval_fn(f, z), shifted_target(targets[n - 1], k),
                         Disk(k, r), grid)
    audit["b"] = meas["b"] < prev_delta
    d = deltas[s]
    audit["c"] = d < min(eps[s], eps[s + 1] / 2, gammas[s])
    audit["d"] = all(d < gammas[l] - math.fsum(deltas[l:s]) for l in range(s))
    top = elements[-1][0] + math.floor(elements[-1][2]) + 1
    audit["e"] = _no_integer_zeros(f, -cfg.zero_window, top + cfg.zero_window)
    return audit, meas


def seminorm_fn(f, K: Disk, grid: SampleGrid) -> float:
    return sup_diff(f, lambda z: np.zeros_like(z), K, grid)


def stage_gamma(f, k: int, r: float, eps_j: float, cfg: FHConfig) -> tuple[float, float]:
    """``(gamma_j, K_j)`` for the built ``f_j``; ``K_j`` bounds the nodes and ``B_j``."""
    x = [eval_fn(f, i) for i in range(k)]
    K = max(max(abs(a) for a in x), _sup_abs(f, Disk(k, r), 512))
    g = phi_gamma(x, eps_j, K, cfg.eps_l1)
    if g < cfg.gamma_floor:
        raise GammaUnderflow(f"gamma underflow: gamma={g:.3g} at k={k}; reduce the stage count")
    return g, K


def final_bounds(elements, targets, f, cfg: FHConfig) -> tuple[tuple[int, float, float], ...]:
    """``sup_{B(0,r_j)} |P^{k_j} f - p_n| = sup_{B_j} |c_{k_j}(f) f - p~_j|`` per stage."""
    grid = SampleGrid(cfg.check_grid)
    out = []
    for s, (k, (n, m), r) in enumerate(elements):
        cz = _cocycle(f, k).to_complex()
        b = sup_diff(lambda z: cz * eval_fn(f, z), shifted_target(targets[n - 1], k), Disk(k, r), grid)
        out.append((s + 1, b, 1.0 / m))
    return tuple(out)


def _stage_problem(s, elements, targets, v, fixes, shoulders, F, tol, planned, cfg: FHConfig):
    k, (n, _), r = elements[s]
    J = len(elements)

    def resid(p):
        return lambda z: eval_fn(p, z) - (eval_fn(F, z) if F is not None else 0)

    regs = []
    lo_a = -math.inf
    if s:
        kp, _, rp = elements[s - 1]
        lo_a = kp + 1 / kp
        regs += [RegionTarget(Disk(0, lo_a), 0.0, "a"), RegionTarget(Disk(kp, rp), 0.0, "prev")]
    regs.append(RegionTarget(Disk(k, r), resid(shifted_target(targets[n - 1], k)), "target"))
    for l in range(s + 1, J):
        kl, (nl, _), rl = elements[l]
        regs.append(RegionTarget(Disk(kl, rl), resid(shifted_target(targets[nl - 1], kl)),
                                 f"ahead{l + 1}", 1.0, cfg.guard_factor * planned[l]))
    # soft disks keep the basis evaluable at pinned nodes outside every region
    disks = [(e[0], e[2]) for e in elements]
    for i in sorted(v):
        room = min([abs(i - kl) - rl for kl, rl in disks] + [i - lo_a])
        if room <= 0.05:
            continue
        rho = min(cfg.node_rho, 0.4 * room)
        if F is not None:
            tgt = 0.0
        elif i in shoulders:
            l = shoulders[i]
            tgt = shifted_target(targets[elements[l][1][0] - 1], elements[l][0])
        else:
            tgt = v[i]
        regs.append(RegionTarget(Disk(i, rho), tgt, f"n{i}", cfg.node_weight))
    # exact pins; the stage's free node absorbs the rounding left in c_{k_j}
    cur = {i: (eval_fn(F, i) if F is not None else 0j) for i in v}
    pins = {i: v[i] - cur[i] for i in v}
    fix = fixes[s]
    rest = lc_prod([(cur[i] + pins[i], 2 ** (k - 1 - i)) for i in range(k) if i != fix])
    pins[fix] = lc_root(lc_inv(rest), 2 ** (k - 1 - fix)).to_complex() - cur[fix]
    return ApproxProblem(tuple(regs), tuple(PointConstraint(i, x) for i, x in sorted(pins.items())),
                         cfg.budget, tol)


def build_fh_vector(schedule, targets: Sequence[EntireFn], J: int,
                    eps_seq: Sequence[float] | None = None,
                    config: FHConfig = FHConfig()) -> FHBuild:
    """Stages ``f_1 .. f_J`` meeting (a)-(e), each a correction fitted on top of the last.

    Every integer node up to the last disk is pinned from the start, so each
    ``c_{k_j}`` is 1 by construction and the delta chain is known before any
    solve; each fit therefore also aims at the later disks with their
    planned tolerances, which leaves later corrections small.
    """
    targets = tuple(targets)
    elements = schedule.elements(J + 1)
    if len(elements) < J + 1:
        raise StageInfeasible("stage infeasible: schedule has fewer than J+1 elements")
    for j, (k, (n, _), _r) in enumerate(elements[:J]):
        if k > config.K_max:
            raise StageInfeasible(f"stage infeasible: k_{j + 1}={k} exceeds K_max={config.K_max}")
        if not 1 <= n <= len(targets):
            raise ValueError(f"no target p_{n} for pair index {n}")
    eps = tuple(eps_seq) if eps_seq is not None else default_eps(elements)
    if len(eps) < J + 1:
        raise ValueError("eps_seq needs J+1 entries")
    if any(e <= 0 for e in eps) or math.fsum(eps) > config.eps_l1:
        raise ValueError("eps must be positive with sum <= eps_l1")
    elements = elements[:J]
    for j, (_, (_, m), _) in enumerate(elements):
        if not eps[j] < 1.0 / m:
            raise ValueError(f"eps_{j + 1} must be below 1/m = {1 / m:g}")
    delta0 = config.delta_factor * min(eps[0], eps[1] / 2)
    v, fixes, shoulders = fh_node_plan(elements, targets)
    planned = _planned_deltas(elements, targets, v, eps, delta0, config)

    corrections, deltas, gammas, stages = [], [], [], []

    def partial():
        return FHBuild(tuple(stages), targets, eps, delta0, (), config)

    for s, (k, pair, r) in enumerate(elements):
        F = SumFn(tuple(corrections)) if corrections else None
        tol = config.tol_factor * (delta0 if s == 0 else deltas[-1])
        problem = _stage_problem(s, elements, targets, v, fixes, shoulders, F, tol, planned, config)
        sol = solve(problem, config.grid(s))
        corrections.append(sol.poly)
        f = SumFn(tuple(corrections))
        try:
            g, K = stage_gamma(f, k, r, eps[s], config)
        except StageInfeasible as exc:
            exc.build = partial()
            raise
        gammas.append(g)
        deltas.append(_next_delta(s, eps, gammas, deltas, config.delta_factor))
        audit, meas = audit_stage(s, elements, targets, corrections, deltas, gammas, eps, delta0, config)
        meas["solver_residuals"] = list(sol.residuals)
        stages.append(FHStage(s + 1, k, pair, r, sol.poly, deltas[-1], g, eps[s], K,
                              audit, meas, sol.degree))
        if not all(audit.values()):
            bad = ", ".join(c for c, ok in audit.items() if not ok)
            b = partial()
            raise StageInfeasible(f"stage infeasible: condition ({bad}) fails at stage {s + 1}",
                                  b.to_json(), b)
    build = FHBuild(tuple(stages), targets, eps, delta0,
                    final_bounds(elements, targets, SumFn(tuple(corrections)), config), config)
    if not build.ok:
        raise WitnessFailed("witness failed verification: final bound >= 1/m", build.to_json())
    return build


def fh_from_json(d: dict) -> FHBuild:
    cfg = d.get("config", {})
    cfg = FHConfig(**{**cfg, "grids": tuple(cfg.get("grids", (1024,)))})
    stages = tuple(FHStage(s["j"], s["k"], tuple(s["pair"]), s["r"], fn_from_json(s["correction"]),
                           s["delta"], s["gamma"], s["eps"], s["K"], dict(s["audit"]),
                           dict(s["measured"]), s["degree"]) for s in d["stages"])
    return FHBuild(stages, tuple(fn_from_json(t) for t in d["targets"]), tuple(d["eps"]),
                   d["delta0"], tuple(tuple(x) for x in d["final"]), cfg)


def verify_fh(build: FHBuild) -> FHBuild:
    """Recompute gammas, audits and final bounds from the stored corrections."""
    cfg = build.config
    elements = [(s.k, s.pair, s.r) for s in build.stages]
    corrections = [s.correction for s in build.stages]
    deltas = [s.delta for s in build.stages]
    gammas = []
    stages = []
    for i, st in enumerate(build.stages):
        g, K = stage_gamma(SumFn(tuple(corrections[: i + 1])), st.k, st.r, st.eps, cfg)
        gammas.append(g)
        audit, meas = audit_stage(i, elements, build.targets, corrections, deltas, gammas,
                                  build.eps, build.delta0, cfg)
        stages.append(FHStage(st.j, st.k, st.pair, st.r, st.correction, st.delta, g, st.eps, K,
                              audit, meas, st.degree))
    final = final_bounds(elements, build.targets, SumFn(tuple(corrections)), cfg) if stages else ()
    return FHBuild(tuple(stages), build.targets, build.eps, build.delta0, final, cfg)
