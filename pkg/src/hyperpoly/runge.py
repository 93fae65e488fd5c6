"""Simultaneous polynomial approximation on disjoint regions with exact node values.

The solver is a constructive stand-in for Runge's theorem on finite unions
of disks.  Least squares runs on boundary samples (max modulus makes the
interior redundant).  Node constraints are exact by construction: the
coefficient vector is split as ``x = x_node + Z y`` where ``x_node`` solves
the constraint rows and the columns of ``Z`` span their null space.  This is
the coefficient-space form of ``p = L + omega * q``.

The basis is discrete-orthonormal on the sample cloud (Vandermonde with
Arnoldi), which keeps the least-squares matrix well conditioned even on
wide layouts such as ``[0, n]`` with ``n = 20``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .fnspace import (
    EntireFn,
    OrthoPoly,
    PeriodicPoly,
    TaylorPoly,
    eval_fn,
    fn_from_json,
    fn_to_json,
)
from .topology import Disk, MappedDisk, Region, SampleGrid, region_from_json

COND_LIMIT = 1e12
DEGREE_STEP = 4
LARGE_STEP = 32  # ladder step past degree 128, where single solves get costly
START_PAD = 8


class SolverError(RuntimeError):
    pass


class IllConditioned(SolverError):
    pass


Target = Union[EntireFn, complex]


@dataclass(frozen=True)
class RegionTarget:
    """Approximate ``target`` on ``region``.

    For a ``MappedDisk`` the target is a function of the preimage variable
    ``z`` (the region's boundary is sampled as images of ``z`` points).
    """

    region: Region
    target: Target
    label: str = ""
    weight: float = 1.0
    tol: float | None = None  # overrides the problem tolerance on this region

    @property
    def soft(self) -> bool:
        """Soft targets regularize the fit but never decide conformance."""
        return self.weight < 1.0

    def samples(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        if isinstance(self.region, MappedDisk):
            zs = self.region.disk.boundary(m)
            pts = self.region.to_w(zs)
        else:
            zs = pts = self.region.boundary(m)
        if isinstance(self.target, (TaylorPoly, PeriodicPoly, OrthoPoly)):
            vals = eval_fn(self.target, zs)
        elif callable(self.target):
            vals = np.asarray(self.target(zs), dtype=complex)
        else:
            vals = np.full(m, complex(self.target))
        return pts, vals


@dataclass(frozen=True)
class PointConstraint:
    node: complex
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "node", complex(self.node))
        object.__setattr__(self, "value", complex(self.value))
        if not abs(self.value) < 1e6:
            raise ValueError(f"constraint value {self.value} too large")


@dataclass(frozen=True)
class ApproxProblem:
    targets: tuple[RegionTarget, ...]
    constraints: tuple[PointConstraint, ...] = ()
    degree_budget: int = 96
    tol: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        nodes = [c.node for c in self.constraints]
        if len(set(nodes)) != len(nodes):
            raise ValueError("constraint nodes must be distinct")
        if len(nodes) > self.degree_budget:
            raise ValueError("more constraints than the degree budget allows")

    def to_json(self) -> dict:
        def tgt(t):
            if isinstance(t, (TaylorPoly, PeriodicPoly, OrthoPoly)):
                return fn_to_json(t)
            t = complex(t)
            return {"kind": "const", "value": [t.real, t.imag]}

        return {
            "targets": [
                {"region": rt.region.to_json(), "target": tgt(rt.target), "label": rt.label,
                 "weight": rt.weight, "tol": rt.tol}
                for rt in self.targets
            ],
            "constraints": [
                {"node": [c.node.real, c.node.imag], "value": [c.value.real, c.value.imag]}
                for c in self.constraints
            ],
            "degree_budget": self.degree_budget,
            "tol": self.tol,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ApproxProblem":
        def tgt(t):
            if t["kind"] == "const":
                return complex(*t["value"])
            return fn_from_json(t)

        return cls(
            targets=tuple(
                RegionTarget(region_from_json(t["region"]), tgt(t["target"]), t.get("label", ""),
                             float(t.get("weight", 1.0)), t.get("tol"))
                for t in d["targets"]
            ),
            constraints=tuple(
                PointConstraint(complex(*c["node"]), complex(*c["value"])) for c in d["constraints"]
            ),
            degree_budget=int(d["degree_budget"]),
            tol=float(d["tol"]),
        )


@dataclass(frozen=True, eq=False)
class ApproxSolution:
    poly: OrthoPoly
    residuals: tuple[float, ...]
    constraint_error: float
    degree: int
    conforming: bool
    status: str = "ok"
    cond: float = 1.0
    rms: float = 0.0


# ---------------------------------------------------------------------------


def arnoldi(t: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (w.r.t. the mean over ``t``) polynomial basis of degree ``n``.

    Returns ``(Q, H)`` with ``Q`` of shape ``(len(t), n+1)`` and the
    ``(n+1, n)`` Hessenberg recurrence matrix ``H``.
    """
    Q = np.ones((t.size, 1), dtype=complex)
    H = np.zeros((1, 0), dtype=complex)
    return arnoldi_extend(t, Q, H, n)


def arnoldi_extend(t: np.ndarray, Q: np.ndarray, H: np.ndarray, n: int):
    """Continue an Arnoldi run from degree ``Q.shape[1] - 1`` up to ``n``."""
    M = t.size
    k0 = Q.shape[1] - 1
    if n <= k0:
        return Q[:, : n + 1], H[: n + 1, :n]
    Qn = np.zeros((M, n + 1), dtype=complex)
    Hn = np.zeros((n + 1, n), dtype=complex)
    Qn[:, : k0 + 1] = Q
    Hn[: k0 + 1, :k0] = H
    for k in range(k0, n):
        q = t * Qn[:, k]
        for _ in range(2):  # classical Gram-Schmidt, twice
            h = Qn[:, : k + 1].conj().T @ q / M
            q = q - Qn[:, : k + 1] @ h
            Hn[: k + 1, k] += h
        Hn[k + 1, k] = np.linalg.norm(q) / math.sqrt(M)
        if Hn[k + 1, k] == 0:
            raise SolverError("Arnoldi breakdown: too few distinct sample points")
        Qn[:, k + 1] = q / Hn[k + 1, k]
    return Qn, Hn


def _frame(points: np.ndarray) -> tuple[complex, float]:
    lo = complex(points.real.min(), points.imag.min())
    hi = complex(points.real.max(), points.imag.max())
    center = (lo + hi) / 2
    scale = max((hi - lo).real, (hi - lo).imag) / 2 or 1.0
    return center, float(scale)


@dataclass
class _Setup:
    center: complex
    scale: float
    t: np.ndarray
    nsamp: int
    Qall: np.ndarray
    H: np.ndarray
    b: np.ndarray
    slices: list
    v: np.ndarray
    w: np.ndarray
    hard: list[float | None]

    def grow(self, d: int) -> None:
        if self.Qall.shape[1] <= d:
            self.Qall, self.H = arnoldi_extend(self.t, self.Qall, self.H, d)

    @property
    def Q(self) -> np.ndarray:
        return self.Qall[: self.nsamp]

    @property
    def C(self) -> np.ndarray:
        return self.Qall[self.nsamp:]


def _setup(problem: ApproxProblem, grid: SampleGrid) -> _Setup:
    pts, vals, slices, weights = [], [], [], []
    start = 0
    for rt in problem.targets:
        p, v = rt.samples(grid.m)
        pts.append(p)
        vals.append(v)
        # a region with its own tolerance pulls in proportion to how tight it is
        w = rt.weight if rt.tol is None or rt.soft else rt.weight * problem.tol / rt.tol
        weights.append(np.full(p.size, w))
        slices.append(slice(start, start + p.size))
        start += p.size
    nodes = np.array([c.node for c in problem.constraints], dtype=complex)
    allpts = np.concatenate(pts + [nodes])
    center, scale = _frame(allpts)
    nsamp = sum(p.size for p in pts)
    # nodes join the Arnoldi cloud so the basis stays tame at every constraint
    t = (allpts - center) / scale
    Qall, H = arnoldi(t, 0)
    v = np.array([c.value for c in problem.constraints], dtype=complex)
    # per-region tolerance; None marks soft regions, which never decide conformance
    hard = [None if rt.soft else (problem.tol if rt.tol is None else rt.tol)
            for rt in problem.targets]
    return _Setup(center, scale, t, nsamp, Qall, H, np.concatenate(vals), slices, v,
                  np.concatenate(weights), hard)


def _solve_degree(s: _Setup, d: int) -> tuple[np.ndarray, float]:
    s.grow(d)
    A = s.w[:, None] * s.Q[:, : d + 1]
    b = s.w * s.b
    C = s.C[:, : d + 1]
    K = C.shape[0]
    if K == 0:
        x, *_ = np.linalg.lstsq(A, b, rcond=None)
        return x, float(np.linalg.cond(A))
    U, Rfull = np.linalg.qr(C.conj().T, mode="complete")
    R = Rfull[:K, :K]
    Y, Z = U[:, :K], U[:, K:]
    sv = np.abs(np.diag(R))
    cond_c = float(sv.max() / sv.min()) if sv.min() > 0 else math.inf
    if not math.isfinite(cond_c) or cond_c > COND_LIMIT:
        raise IllConditioned(f"ill-conditioned system: constraint conditioning {cond_c:.3g}")
    x0 = Y @ np.linalg.solve(R.conj().T, s.v)
    AZ = A @ Z
    if AZ.shape[1]:
        y, *_ = np.linalg.lstsq(AZ, b - A @ x0, rcond=None)
        x = x0 + Z @ y
        cond_az = float(np.linalg.cond(AZ))
    else:
        x, cond_az = x0, 1.0
    # one refinement sweep on the constraint rows
    x = x + Y @ np.linalg.solve(R.conj().T, s.v - C @ x)
    return x, max(cond_c, cond_az)


def _evaluate(s: _Setup, x: np.ndarray, problem: ApproxProblem, d: int):
    r = s.Q[:, : d + 1] @ x - s.b
    residuals = tuple(float(np.max(np.abs(r[sl]))) for sl in s.slices)
    cerr = float(np.max(np.abs(s.C[:, : d + 1] @ x - s.v))) if s.v.size else 0.0
    rms = float(np.sqrt(np.mean(np.abs(s.w * r) ** 2)))
    return residuals, cerr, rms


def _worst(s: _Setup, residuals) -> float:
    """Largest residual-to-tolerance ratio over hard regions; <= 1 conforms."""
    return max((r / t for r, t in zip(residuals, s.hard) if t is not None), default=0.0)


def _degrees(problem: ApproxProblem) -> list[int]:
    start = min(len(problem.constraints) + START_PAD, problem.degree_budget)
    ds = list(range(start, min(problem.degree_budget, 128) + 1, DEGREE_STEP)) or [start]
    while ds[-1] + LARGE_STEP <= problem.degree_budget:
        ds.append(ds[-1] + LARGE_STEP)
    if ds[-1] != problem.degree_budget:
        ds.append(problem.degree_budget)
    return ds


def solve(problem: ApproxProblem, grid: SampleGrid = SampleGrid()) -> ApproxSolution:
    """Lowest escalated degree whose per-region sampled residuals are all <= tol.

    If the budget runs out, the best-effort solution (smallest worst-region
    residual) comes back with ``conforming=False``.
    """
    s = _setup(problem, grid)
    best = None
    for d in _degrees(problem):
        x, cond = _solve_degree(s, d)
        residuals, cerr, rms = _evaluate(s, x, problem, d)
        poly = OrthoPoly(s.center, s.scale, s.H[: d + 1, :d], x)
        sol = ApproxSolution(poly, residuals, cerr, d, True, "ok", cond, rms)
        if _worst(s, residuals) <= 1.0:
            return sol
        if best is None or _worst(s, residuals) < _worst(s, best.residuals):
            best = sol
    return ApproxSolution(best.poly, best.residuals, best.constraint_error, best.degree,
                          False, "budget exhausted", best.cond, best.rms)


@dataclass
class ConditionReport:
    degrees: list[int] = field(default_factory=list)
    cond: list[float] = field(default_factory=list)
    residuals: list[tuple[float, ...]] = field(default_factory=list)
    rms: list[float] = field(default_factory=list)
    degree_used: int | None = None

    def to_json(self) -> dict:
        return {
            "degrees": self.degrees,
            "cond": self.cond,
            "residuals": [list(r) for r in self.residuals],
            "rms": self.rms,
            "degree_used": self.degree_used,
        }


def condition_report(problem: ApproxProblem, grid: SampleGrid = SampleGrid()) -> ConditionReport:
    """Residual-vs-degree curve over the whole escalation ladder."""
    s = _setup(problem, grid)
    rep = ConditionReport()
    for d in _degrees(problem):
        x, cond = _solve_degree(s, d)
        residuals, _, rms = _evaluate(s, x, problem, d)
        rep.degrees.append(d)
        rep.cond.append(cond)
        rep.residuals.append(residuals)
        rep.rms.append(rms)
        if rep.degree_used is None and _worst(s, residuals) <= 1.0:
            rep.degree_used = d
    return rep
