import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperpoly.fnspace import TaylorPoly, eval_fn
from hyperpoly.runge import (
    ApproxProblem,
    PointConstraint,
    RegionTarget,
    condition_report,
    solve,
)
from hyperpoly.topology import Disk, SampleGrid, sup_diff


def test_exact_representation():
    f = TaylorPoly([1, 0, 0, 1])
    sol = solve(ApproxProblem((RegionTarget(Disk(0, 1), f),), degree_budget=8, tol=1e-12))
    assert sol.conforming
    assert max(sol.residuals) <= 1e-12


def test_two_disks_cross_checked_on_finer_grid():
    prob = ApproxProblem((RegionTarget(Disk(0, 1), 0), RegionTarget(Disk(6, 1), 1)),
                         degree_budget=40, tol=1e-3)
    sol = solve(prob)
    assert sol.conforming and max(sol.residuals) <= 1e-3
    fine = SampleGrid(1024)
    assert sup_diff(sol.poly, lambda z: 0 * z, Disk(0, 1), fine) <= 1e-3
    assert sup_diff(sol.poly, lambda z: 1 + 0 * z, Disk(6, 1), fine) <= 1e-3


def test_constraint_enforced():
    prob = ApproxProblem((RegionTarget(Disk(0, 1), TaylorPoly([0, 1])),),
                         (PointConstraint(2, 5),), degree_budget=16, tol=1e-6)
    sol = solve(prob)
    assert abs(eval_fn(sol.poly, 2.0) - 5) <= 1e-9 * 5


def test_problem_validation():
    with pytest.raises(ValueError):
        PointConstraint(1, 1e7)
    with pytest.raises(ValueError):
        ApproxProblem((RegionTarget(Disk(0, 1), 0),), (PointConstraint(1, 1), PointConstraint(1, 2)))
    with pytest.raises(ValueError):
        ApproxProblem((RegionTarget(Disk(0, 1), 0),),
                      tuple(PointConstraint(k + 2, 1) for k in range(5)), degree_budget=4)


def test_budget_exhausted_is_best_effort():
    # 1/z has no polynomial approximant on a disk around its pole's circle
    prob = ApproxProblem((RegionTarget(Disk(0, 1), lambda z: 1 / z),), degree_budget=16, tol=1e-3)
    sol = solve(prob)
    assert not sol.conforming and sol.status == "budget exhausted"
    assert len(sol.residuals) == 1


def test_soft_regions_never_decide():
    prob = ApproxProblem((RegionTarget(Disk(0, 1), TaylorPoly([0, 1])),
                          RegionTarget(Disk(4, 0.5), lambda z: 1 / (z - 4), weight=1e-3)),
                         degree_budget=16, tol=1e-2)
    sol = solve(prob)
    # the soft target is unreachable, yet only the hard region decides
    assert sol.conforming and sol.residuals[0] <= 1e-2 and sol.residuals[1] > 1e-2


def test_per_region_tolerance():
    prob = ApproxProblem((RegionTarget(Disk(0, 1), 0),
                          RegionTarget(Disk(5, 1), 1, tol=0.1)), degree_budget=40, tol=1e-8)
    sol = solve(prob)
    assert sol.conforming
    assert sol.residuals[0] <= 1e-8 and sol.residuals[1] <= 0.1


def test_problem_json_roundtrip():
    prob = ApproxProblem((RegionTarget(Disk(0, 1), TaylorPoly([1, 2]), "a"),
                          RegionTarget(Disk(3, 0.5), 2 - 1j, "b", 0.5, 0.1)),
                         (PointConstraint(1.5, 1j),), degree_budget=20, tol=1e-4)
    back = ApproxProblem.from_json(prob.to_json())
    assert back.to_json() == prob.to_json()


def _random_problem(seed: int):
    rng = np.random.default_rng(seed)
    a = TaylorPoly(rng.normal(size=4) + 1j * rng.normal(size=4))
    b = complex(rng.normal(), rng.normal())
    nodes = (PointConstraint(2.5, complex(rng.uniform(0.5, 2), rng.uniform(-1, 1))),)
    return ApproxProblem((RegionTarget(Disk(0, 1), a), RegionTarget(Disk(5, 1), b)), nodes,
                         degree_budget=48, tol=1e-14)


@settings(max_examples=10)
@given(st.integers(0, 2**31))
def test_constraint_exact_even_when_exhausted(seed):
    prob = _random_problem(seed)
    sol = solve(prob)
    c = prob.constraints[0]
    assert abs(eval_fn(sol.poly, c.node) - c.value) <= 1e-9 * max(1, abs(c.value))
    assert sol.constraint_error <= 1e-9 * max(1, abs(c.value))


@settings(max_examples=10)
@given(st.integers(0, 2**31))
def test_residual_monotone_in_degree(seed):
    rep = condition_report(_random_problem(seed))
    worst = [max(r) for r in rep.residuals]
    for lo, hi in zip(worst, worst[1:]):
        assert hi <= lo + 1e-12 * max(1.0, lo) or hi <= 1e-10


@settings(max_examples=15)
@given(st.integers(0, 2**31), st.integers(0, 20))
def test_faithful_on_representable_targets(seed, deg):
    rng = np.random.default_rng(seed)
    q = TaylorPoly(rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1))
    regions = (Disk(0, 1), Disk(3, 0.5))
    prob = ApproxProblem(tuple(RegionTarget(d, q) for d in regions),
                         (PointConstraint(1.6, eval_fn(q, 1.6)),), degree_budget=32, tol=1e-10)
    sol = solve(prob)
    qn = max(sup_diff(q, lambda z: 0 * z, d) for d in regions)
    assert max(sol.residuals) <= 1e-9 * (1 + qn)
