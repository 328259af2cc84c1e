"""Kernel tests: correctness against scipy.optimize.linprog (independent
oracle, tests only), warm starts, purification, determinism."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from invlinopt.simplex import (
    AT_LOWER, AT_UPPER, BASIC, NB_FREE,
    KernelResult, extend_vstatus, solve_kernel,
)


def random_lp(rng, n, m, senses="mixed", box=True):
    A = rng.normal(size=(m, n))
    x0 = rng.normal(size=n)
    b = A @ x0 + rng.uniform(0.1, 2.0, size=m)  # x0 strictly feasible
    c = rng.normal(size=n)
    lo = np.full(n, -10.0) if box else np.full(n, -np.inf)
    up = np.full(n, 10.0) if box else np.full(n, np.inf)
    if senses == "mixed":
        sl = []
        for i in range(m):
            k = rng.integers(3)
            if k == 0:
                sl.append("<=")
            elif k == 1:
                sl.append(">=")
                A[i] = -A[i]
                b[i] = -b[i]
            else:
                sl.append("=")
                b[i] = A[i] @ x0  # keep x0 feasible
        senses = sl
    else:
        senses = [senses] * m
    return c, A, b, senses, lo, up


def scipy_solve(c, A, b, senses, lo, up):
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i, s in enumerate(senses):
        if s == "<=":
            A_ub.append(A[i])
            b_ub.append(b[i])
        elif s == ">=":
            A_ub.append(-A[i])
            b_ub.append(-b[i])
        else:
            A_eq.append(A[i])
            b_eq.append(b[i])
    res = linprog(
        c,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=list(zip(lo, up)),
        method="highs",
    )
    return res


def test_tiny_known_lp():
    # min -x1 - 2 x2 s.t. 3 x1 - x2 <= 3, x1 + x2 <= 2, x >= 0
    c = [-1.0, -2.0]
    A = [[3.0, -1.0], [1.0, 1.0]]
    b = [3.0, 2.0]
    res = solve_kernel(c, A, b, lower=[0, 0], upper=[np.inf, np.inf])
    assert res.status == "optimal"
    assert np.allclose(res.x, [0.0, 2.0], atol=1e-9)
    assert res.obj == pytest.approx(-4.0, abs=1e-9)
    # duals: row 2 binding with y = -2, upper-bound free row 1 slack
    assert res.duals[1] == pytest.approx(-2.0, abs=1e-9)


def test_equality_rows():
    # min x1 + x2 s.t. x1 + x2 = 1, x >= 0
    res = solve_kernel([1.0, 1.0], [[1.0, 1.0]], [1.0], senses=["="],
                       lower=[0, 0], upper=[np.inf, np.inf])
    assert res.status == "optimal"
    assert res.obj == pytest.approx(1.0, abs=1e-9)
    assert res.x.sum() == pytest.approx(1.0, abs=1e-9)


def test_infeasible_detection():
    res = solve_kernel([0.0], [[1.0], [-1.0]], [1.0, -2.0],
                       lower=[-np.inf], upper=[np.inf])
    assert res.status == "infeasible"


def test_unbounded_detection():
    res = solve_kernel([-1.0], [[-1.0]], [0.0])
    assert res.status == "unbounded"


def test_no_rows_box_only():
    res = solve_kernel([1.0, -2.0], np.zeros((0, 2)), np.zeros(0),
                       lower=[-1, -1], upper=[1, 1])
    assert res.status == "optimal"
    assert np.allclose(res.x, [-1.0, 1.0])
    assert res.obj == pytest.approx(-3.0)


def test_fixed_variables():
    res = solve_kernel([1.0, 1.0], [[1.0, 1.0]], [5.0],
                       lower=[2.0, 0.0], upper=[2.0, np.inf])
    assert res.status == "optimal"
    assert res.x[0] == pytest.approx(2.0)
    assert res.x[1] == pytest.approx(0.0)


@pytest.mark.parametrize("seed", range(30))
def test_random_vs_scipy(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(2, 9))
    m = int(rng.integers(1, 14))
    c, A, b, senses, lo, up = random_lp(rng, n, m)
    res = solve_kernel(c, A, b, senses, lo, up)
    ref = scipy_solve(c, A, b, senses, lo, up)
    assert res.status == "optimal"
    assert ref.status == 0
    assert res.obj == pytest.approx(ref.fun, abs=1e-6 * (1 + abs(ref.fun)))
    # feasibility of our point
    act = A @ res.x
    for i, s in enumerate(senses):
        if s == "<=":
            assert act[i] <= b[i] + 1e-7
        elif s == ">=":
            assert act[i] >= b[i] - 1e-7
        else:
            assert act[i] == pytest.approx(b[i], abs=1e-7)
    assert np.all(res.x >= lo - 1e-9) and np.all(res.x <= up + 1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_kkt_at_optimum(seed):
    rng = np.random.default_rng(2000 + seed)
    n, m = 5, 12
    c, A, b, senses, lo, up = random_lp(rng, n, m, senses="<=", box=False)
    res = solve_kernel(c, A, b, senses, lo, up)
    if res.status == "unbounded":
        assert scipy_solve(c, A, b, senses, lo, up).status == 3
        return
    assert res.status == "optimal"
    y = res.duals
    # stationarity c - A'y = 0 over free variables, y <= 0 for <= rows
    assert np.max(np.abs(c - A.T @ y)) <= 1e-7 * (1 + np.abs(c).max())
    assert np.all(y <= 1e-9)
    slack = b - A @ res.x
    assert np.all(slack >= -1e-7)
    assert abs(y @ slack) <= 1e-6


def test_warm_start_bound_change_dual_path():
    rng = np.random.default_rng(7)
    c, A, b, senses, lo, up = random_lp(rng, 6, 10, senses="<=")
    first = solve_kernel(c, A, b, senses, lo, up)
    assert first.status == "optimal"
    # tighten a bound that is active in the relaxation, like branching does
    j = int(np.argmax(np.abs(first.x)))
    up2 = up.copy()
    up2[j] = first.x[j] / 2 if first.x[j] > 0 else up[j]
    lo2 = lo.copy()
    if first.x[j] <= 0:
        lo2[j] = first.x[j] / 2
    warm = solve_kernel(c, A, b, senses, lo2, up2, vstatus=first.vstatus)
    cold = solve_kernel(c, A, b, senses, lo2, up2)
    assert warm.status == cold.status == "optimal"
    assert warm.obj == pytest.approx(cold.obj, abs=1e-7)
    assert warm.iterations <= cold.iterations + 5


def test_warm_start_added_row():
    rng = np.random.default_rng(11)
    c, A, b, senses, lo, up = random_lp(rng, 5, 8, senses="<=")
    first = solve_kernel(c, A, b, senses, lo, up)
    assert first.status == "optimal"
    # cut off the current optimum
    new_row = -c / max(np.linalg.norm(c), 1e-12)
    new_b = new_row @ first.x - 0.05
    A2 = np.vstack([A, new_row])
    b2 = np.append(b, new_b)
    senses2 = list(senses) + ["<="]
    token = extend_vstatus(first.vstatus, 1)
    warm = solve_kernel(c, A2, b2, senses2, lo, up, vstatus=token)
    cold = solve_kernel(c, A2, b2, senses2, lo, up)
    assert warm.status == cold.status
    if warm.status == "optimal":
        assert warm.obj == pytest.approx(cold.obj, abs=1e-7)


def test_purify_returns_vertex():
    # objective 0: any feasible point optimal; purified solve must still
    # land on a vertex (n independent tight rows)
    A = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    b = np.array([1.0, 1.0, 0.0, 0.0])
    res = solve_kernel([0.0, 0.0], A, b, purify=True)
    assert res.status == "optimal"
    tight = np.abs(A @ res.x - b) <= 1e-8
    assert np.linalg.matrix_rank(A[tight]) == 2


def test_determinism():
    rng = np.random.default_rng(21)
    c, A, b, senses, lo, up = random_lp(rng, 6, 9)
    r1 = solve_kernel(c, A, b, senses, lo, up)
    r2 = solve_kernel(c, A, b, senses, lo, up)
    assert r1.status == r2.status
    assert np.array_equal(r1.x, r2.x)
    assert np.array_equal(r1.vstatus, r2.vstatus)
    assert r1.iterations == r2.iterations


def test_degenerate_lp_terminates():
    # highly degenerate: many redundant copies of the same facet
    A = np.vstack([np.eye(3)] * 5 + [-np.eye(3)])
    b = np.concatenate([np.ones(15), np.zeros(3)])
    res = solve_kernel([-1.0, -1.0, -1.0], A, b)
    assert res.status == "optimal"
    assert res.obj == pytest.approx(-3.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_property_feasible_optima_satisfy_kkt(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    m = int(rng.integers(n, 10))
    c, A, b, senses, lo, up = random_lp(rng, n, m, senses="<=", box=False)
    res = solve_kernel(c, A, b, senses, lo, up)
    if res.status != "optimal":
        assert res.status == "unbounded"
        return
    y = res.duals
    assert np.max(np.abs(c - A.T @ y)) <= 1e-6 * (1 + np.abs(c).max())
    assert np.all(y <= 1e-8)
    slack = b - A @ res.x
    assert np.all(slack >= -1e-6)
