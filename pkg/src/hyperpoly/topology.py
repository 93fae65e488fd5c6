"""Disks, sup-seminorms, argument-principle zero counting and region layouts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .fnspace import (
    TWO_PI,
    EntireFn,
    FactoredFn,
    ScaledFn,
    eval_fn,
    log_eval,
)


class LayoutInfeasible(ValueError):
    pass


class ZeroNearContour(ArithmeticError):
    pass


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def boundary(self, m: int) -> np.ndarray:
        theta = TWO_PI * np.arange(m) / m
        return self.center + self.radius * np.exp(1j * theta)

    def contains(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius

    def to_json(self) -> dict:
        return {"type": "disk", "center": [self.center.real, self.center.imag], "radius": self.radius}


@dataclass(frozen=True)
class MappedDisk:
    """Image of ``disk`` under ``w = exp(2 pi i z / period)``.

    Injective when the disk radius is below ``period / 2``, so the image of
    the boundary circle is the boundary of the image.
    """

    disk: Disk
    period: int

    def to_w(self, z):
        return np.exp(1j * TWO_PI * np.asarray(z, dtype=complex) / self.period)

    def boundary(self, m: int) -> np.ndarray:
        return self.to_w(self.disk.boundary(m))

    def contains(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = self.period * np.log(w) / (1j * TWO_PI)
        c = self.disk.center.real
        # shift by whole periods into the strip centred on the disk
        z = z + self.period * np.round((c - z.real) / self.period)
        return self.disk.contains(z)

    @property
    def center(self) -> complex:
        return complex(self.to_w(self.disk.center))

    def to_json(self) -> dict:
        return {"type": "mapped_disk", "disk": self.disk.to_json(), "period": self.period}


Region = Union[Disk, MappedDisk]


def region_from_json(d: dict) -> Region:
    if d["type"] == "disk":
        return Disk(complex(*d["center"]), d["radius"])
    return MappedDisk(region_from_json(d["disk"]), int(d["period"]))


def region_distance(a: Region, b: Region, m: int = 4096) -> float:
    """Gap between closures; negative when they overlap."""
    if isinstance(a, Disk) and isinstance(b, Disk):
        return abs(a.center - b.center) - a.radius - b.radius
    if isinstance(a, Disk):
        a, b = b, a
    if isinstance(b, Disk):
        pts = a.boundary(m)
        if a.contains(b.center) or b.contains(pts).any():
            return -1.0
        return float(np.min(np.abs(pts - b.center))) - b.radius
    pa, pb = a.boundary(m), b.boundary(m)
    if a.contains(pb).any() or b.contains(pa).any():
        return -1.0
    return float(np.min(np.abs(pa[:, None] - pb[None, :])))


@dataclass(frozen=True)
class SampleGrid:
    m: int = 256

    def __post_init__(self):
        if self.m < 32 or self.m & (self.m - 1):
            raise ValueError("sample count must be a power of two >= 32")

    def doubled(self) -> "SampleGrid":
        return SampleGrid(2 * self.m)


@dataclass(frozen=True)
class RegionSet:
    """Ordered, pairwise disjoint regions.  ``labels[i]`` names the role of region i."""

    disks: tuple
    labels: tuple = ()
    margin: float = 0.0

    def __post_init__(self):
        disks = tuple(self.disks)
        labels = tuple(self.labels) or tuple(str(i) for i in range(len(disks)))
        object.__setattr__(self, "disks", disks)
        object.__setattr__(self, "labels", labels)
        gaps = [region_distance(disks[i], disks[j])
                for i in range(len(disks)) for j in range(i + 1, len(disks))]
        gap = min(gaps) if gaps else math.inf
        if gap <= 0:
            raise LayoutInfeasible(f"regions overlap (min gap {gap:.3g})")
        object.__setattr__(self, "margin", gap)

    def group(self, label: str) -> list[Region]:
        return [d for d, lab in zip(self.disks, self.labels) if lab == label]

    def owner(self, z: complex) -> str | None:
        for d, lab in zip(self.disks, self.labels):
            if d.contains(z):
                return lab
        return None

    def to_json(self) -> dict:
        return {
            "regions": [d.to_json() for d in self.disks],
            "labels": list(self.labels),
            "margin": self.margin,
        }


# ---------------------------------------------------------------------------
# seminorms


POLISH_PEAKS = 4


def _boundary_at(K: Region, theta):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if isinstance(K, Disk):
        return K.center + K.radius * np.exp(1j * theta)
    return K.to_w(K.disk.center + K.disk.radius * np.exp(1j * theta))


def polished_max(fun, K: Region, grid: SampleGrid = SampleGrid()) -> float:
    """Max of a real function on the boundary of ``K``.

    The sampled maximum is refined by a bounded 1-D search around each of
    the largest local peaks, so the result no longer depends on where the
    grid happens to fall.
    """
    m = grid.m
    theta = TWO_PI * np.arange(m) / m
    vals = np.asarray(fun(_boundary_at(K, theta)), dtype=float)
    best = float(np.max(vals))
    if not np.isfinite(best):
        return best
    peaks = np.flatnonzero((vals >= np.roll(vals, 1)) & (vals >= np.roll(vals, -1)))
    peaks = peaks[np.argsort(vals[peaks])[::-1][:POLISH_PEAKS]]
    h = TWO_PI / m
    for i in peaks:
        res = minimize_scalar(lambda t: -float(fun(_boundary_at(K, t))[0]),
                              bounds=(theta[i] - h, theta[i] + h), method="bounded",
                              options={"xatol": 1e-10})
        best = max(best, -float(res.fun))
    return best


def seminorm(f, K: Region, grid: SampleGrid = SampleGrid()) -> float:
    """Sup of ``|f|`` over the boundary of ``K``.

    Plain surrogates return the sup itself; ``ScaledFn``/``FactoredFn`` return
    the log of the sup.
    """
    if isinstance(f, (ScaledFn, FactoredFn)):
        return polished_max(lambda z: log_eval(f, z)[0], K, grid)
    return polished_max(lambda z: np.abs(eval_fn(f, z)), K, grid)


def seminorm_values(values: np.ndarray) -> float:
    return float(np.max(np.abs(values)))


def ball_dist(f: EntireFn, g: EntireFn, R: float, grid: SampleGrid = SampleGrid()) -> float:
    """``||f - g||`` on ``B(0, R)``; ``h`` lies in ``U(eps, f, R)`` iff this is < eps."""
    return sup_diff(f, g, Disk(0, R), grid)


def sup_diff(f, g, K: Region, grid: SampleGrid = SampleGrid()) -> float:
    """``||f - g||_K`` for any callables or surrogates."""
    def diff(z):
        fv = f(z) if callable(f) else eval_fn(f, z)
        gv = g(z) if callable(g) else eval_fn(g, z)
        return np.abs(fv - gv)
    return polished_max(diff, K, grid)


# ---------------------------------------------------------------------------
# argument principle


def _winding(f, K: Disk, m: int) -> int:
    pts = K.boundary(m)
    lm, ph = log_eval(f, pts)
    if not np.all(np.isfinite(lm)):
        raise ZeroNearContour("zero on contour")
    dph = np.diff(np.concatenate([ph, ph[:1]]))
    dph = (dph + math.pi) % TWO_PI - math.pi
    if np.max(np.abs(dph)) > math.pi / 4:
        raise _Undersampled()
    # a zero hugging the contour shows up as a deep dip of |f| along it
    if np.min(lm) < np.max(lm) - 30:
        raise ZeroNearContour("zero near contour")
    w = np.sum(dph) / TWO_PI
    if abs(w - round(w)) > 0.1:
        raise ZeroNearContour(f"non-integer winding {w:.3f}")
    return int(round(w))


class _Undersampled(Exception):
    pass


def _count_single(f, K: Disk, grid: SampleGrid, max_m: int = 1 << 16) -> int:
    m = grid.m
    while True:
        try:
            return _winding(f, K, m)
        except _Undersampled:
            if m >= max_m:
                raise ZeroNearContour("contour undersampled even at max resolution")
            m *= 2


_JITTER = (0.0, 0.01, -0.01, 0.005, -0.005, 0.0075)


def count_zeros(f, K: Disk, grid: SampleGrid = SampleGrid(), retries: int = 5) -> int:
    """Zeros of ``f`` inside ``K`` (with multiplicity).

    Factored inputs are counted per factor.  When a zero sits near the
    contour the radius is jittered by +-1% and the count retried.
    """
    if isinstance(f, FactoredFn):
        return sum(e * count_zeros(b, K, grid, retries) for b, e in f.factors)
    last = None
    for attempt in range(retries + 1):
        r = K.radius * (1 + _JITTER[attempt % len(_JITTER)])
        try:
            return _count_single(f, Disk(K.center, r), grid)
        except ZeroNearContour as exc:
            last = exc
    raise ZeroNearContour(f"zero near contour after {retries} retries: {last}")


# ---------------------------------------------------------------------------
# layouts


def _chain(nodes: Sequence[complex], radius: float) -> list[Disk]:
    return [Disk(z, radius) for z in nodes]


def layout_mixing(R: float, n: int) -> RegionSet:
    """``B(0,R)``, ``B1`` around ``floor(R)+1``, a chain covering the middle
    integers, and ``B(n,R)``."""
    if float(R).is_integer():
        raise LayoutInfeasible("R must not be an integer")
    if not n > 2 * R + 2:
        raise LayoutInfeasible(f"layout infeasible: n <= 2R+2 ({n} <= {2 * R + 2:g})")
    fl = math.floor(R)
    rho = min(0.3, 0.4 * (fl + 1 - R))
    disks = [Disk(0, R), Disk(fl + 1, rho)]
    labels = ["start", "B1"]
    mid = list(range(fl + 2, n - fl))
    disks += _chain(mid, rho)
    labels += ["B2"] * len(mid)
    disks.append(Disk(n, R))
    labels.append("end")
    return RegionSet(tuple(disks), tuple(labels))


def roots_of_unity(n: int) -> np.ndarray:
    return np.exp(1j * TWO_PI * np.arange(n) / n)


def layout_unity(R: float, n: int) -> RegionSet:
    """w-domain layout: image of ``B(0,R)``, a disk at the first root of unity
    outside it, and a chain over the remaining middle roots."""
    if not n > 4 * R:
        raise LayoutInfeasible(f"layout infeasible: n <= 4R ({n} <= {4 * R:g})")
    if float(R).is_integer():
        raise LayoutInfeasible("R must not be an integer (root of unity on the image boundary)")
    fl = math.floor(R)
    if n < 2 * fl + 2:
        raise LayoutInfeasible(f"layout infeasible: n < 2 floor(R) + 2 ({n})")
    image = MappedDisk(Disk(0, R), n)
    om = roots_of_unity(n)
    bnd = image.boundary(4096)
    gap = float(np.min(np.abs(bnd - om[fl + 1])))
    gap = min(gap, float(np.min(np.abs(bnd - om[n - fl - 1]))))
    rho = min(0.4 * gap, 0.4 * abs(om[1] - om[0]))
    disks: list = [image, Disk(om[fl + 1], rho)]
    labels = ["B1", "B2"]
    mid = [om[j] for j in range(fl + 2, n - fl)]
    disks += _chain(mid, rho)
    labels += ["B3"] * len(mid)
    return RegionSet(tuple(disks), tuple(labels))


def layout_fh(k_j: int, k_next: int, r_next: float, r_prev: float | None = None) -> RegionSet:
    """Stage layout ``B(0, k_j + r_prev)``, ``B1``, chain, ``B(k_next, r_next)``.

    ``r_prev`` defaults to ``1/k_j``.  ``B1`` holds the first integer past the
    previous disk.
    """
    rp = 1.0 / k_j if r_prev is None else r_prev
    R0 = k_j + rp
    first = k_j + math.floor(rp) + 1
    lo_next = k_next - r_next
    last = k_next - math.floor(r_next) - 1
    if not (first <= last and lo_next > R0 + 1):
        raise LayoutInfeasible(
            f"layout infeasible: no room for integer nodes between {R0:g} and {lo_next:g}")
    rho = min(0.3, 0.4 * (first - R0), 0.4 * (lo_next - last))
    disks = [Disk(0, R0), Disk(first, rho)]
    labels = ["prev", "B1"]
    mid = list(range(first + 1, k_next - math.floor(r_next)))
    disks += _chain(mid, rho)
    labels += ["B2"] * len(mid)
    disks.append(Disk(k_next, r_next))
    labels.append("target")
    return RegionSet(tuple(disks), tuple(labels))


def layout_fh_first(k1: int, r1: float) -> RegionSet:
    """First stage: nothing to preserve; node 0 carries the correction scalar."""
    top = k1 - math.floor(r1)
    if not top >= 1 or not k1 - r1 > 0.5:
        raise LayoutInfeasible("layout infeasible: first schedule element too small")
    rho = min(0.3, 0.4 * (k1 - r1 - (top - 1)))
    disks = [Disk(0, rho)] + _chain(range(1, top), rho) + [Disk(k1, r1)]
    labels = ["B1"] + ["B2"] * (top - 1) + ["target"]
    return RegionSet(tuple(disks), tuple(labels))
