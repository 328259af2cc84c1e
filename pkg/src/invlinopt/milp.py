"""Mixed-integer linear programming by LP-based branch and bound.

Node selection is best-bound (ties broken by creation order, floor child
created first); branching picks the integer variable whose fractional part
is closest to one half, lowest index on ties. Children warm-start from the
parent basis token, which stays dual feasible under bound tightening, so
most node solves are a handful of dual simplex pivots.

Two operating modes:

* ``optimal``: prove optimality (or infeasibility) of the incumbent.
* ``first_feasible``: return the first integral solution with objective at
  or below ``cutoff``; exhausting the tree proves none exists. Used by the
  enumeration loop to probe for alternate optima after exclusion cuts.

``MilpModel.obj_lower_bound`` carries a caller-known valid lower bound on
the objective (for instance zero for a sum of absolute deviations); a seed
incumbent that attains it is accepted without solving any LP.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .simplex import KernelError, extend_vstatus, solve_kernel

INT_TOL = 1e-6


@dataclass
class MilpModel:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: list
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray          # boolean mask over variables
    obj_lower_bound: float = -np.inf
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.integer = np.asarray(self.integer, dtype=bool)
        n = self.c.shape[0]
        if self.A.shape != (self.b.shape[0], n) \
                or self.lower.shape != (n,) or self.upper.shape != (n,) \
                or self.integer.shape != (n,) \
                or len(self.senses) != self.A.shape[0]:
            raise ValueError("inconsistent model shapes")

    @property
    def n(self):
        return self.c.shape[0]

    @property
    def m(self):
        return self.A.shape[0]


def with_extra_row(model, row, rhs, sense="<="):
    """New model with one appended constraint row."""
    row = np.asarray(row, dtype=float).reshape(1, -1)
    if row.shape[1] != model.n:
        raise ValueError("row length mismatch")
    return replace(
        model,
        A=np.vstack([model.A, row]),
        b=np.append(model.b, float(rhs)),
        senses=list(model.senses) + [sense],
        meta=dict(model.meta),
    )


@dataclass
class MilpSolution:
    status: str          # optimal | feasible | infeasible | incumbent_only
                         # | unknown
    x: np.ndarray
    objective: float
    bound: float         # best proven lower bound
    nodes: int
    runtime: float


def _check_incumbent(model, x):
    """Validate a seed incumbent; returns its objective or None."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        return None
    if np.any(x < model.lower - 1e-7) or np.any(x > model.upper + 1e-7):
        return None
    act = model.A @ x
    for i, s in enumerate(model.senses):
        tol = 1e-7 * (1 + abs(model.b[i]))
        if s == "<=" and act[i] > model.b[i] + tol:
            return None
        if s == ">=" and act[i] < model.b[i] - tol:
            return None
        if s == "=" and abs(act[i] - model.b[i]) > tol:
            return None
    fr = x[model.integer]
    if fr.size and np.max(np.abs(fr - np.round(fr))) > INT_TOL:
        return None
    return float(model.c @ x)


def _pin_integers(model, lo, up, x):
    """Re-solve a node with every integer pinned to its rounded value.

    A relaxation can come out integral only to within the integrality
    tolerance; pinning and re-solving recovers the exact continuous
    completion of the rounded point, or proves that rounding infeasible
    (returns None), in which case the caller keeps branching.

    The solve is deliberately cold-started: a cold start leaves every
    pinned variable nonbasic at its bound, where it sits exactly, whereas
    a warm basis may keep it basic and a feasibility tolerance away from
    the pin -- room that a big-M row multiplies into a material violation.
    """
    iv = np.flatnonzero(model.integer)
    r = np.round(x[iv])
    lo2 = lo.copy()
    up2 = up.copy()
    lo2[iv] = r
    up2[iv] = r
    try:
        res = solve_kernel(model.c, model.A, model.b, model.senses,
                           lo2, up2)
    except KernelError:
        return None
    if res.status != "optimal":
        return None
    x2 = res.x.copy()
    x2[iv] = r
    return x2, float(model.c @ x2)


def solve_milp(model, *, incumbent=None, mode="optimal", cutoff=None,
               node_limit=100_000, time_limit=None):
    """Branch and bound over the model; see the module docstring.

    In ``first_feasible`` mode the incumbent seed is ignored and the first
    integral point with objective <= cutoff (when given) is returned with
    status "feasible"; tree exhaustion yields "infeasible".
    """
    if mode not in ("optimal", "first_feasible"):
        raise ValueError("unknown mode %r" % (mode,))
    t0 = time.monotonic()
    best_x = None
    best_obj = np.inf
    if mode == "optimal" and incumbent is not None:
        obj = _check_incumbent(model, incumbent)
        if obj is not None:
            best_x = np.asarray(incumbent, dtype=float).copy()
            best_obj = obj
            if best_obj <= model.obj_lower_bound + 1e-9:
                return MilpSolution("optimal", best_x, best_obj, best_obj,
                                    0, time.monotonic() - t0)

    def prune(bound):
        if cutoff is not None and bound > cutoff + 1e-9:
            return True
        return mode == "optimal" and bound >= best_obj - 1e-9

    # heap of (bound estimate, seq, fixings, warm token); fixings is a
    # tuple of (var, lo, up) overrides relative to the root bounds
    seq = 0
    heap = [(-np.inf, seq, (), None)]
    nodes = 0
    exhausted = True
    while heap:
        bound_est, _, fixings, token = heapq.heappop(heap)
        if prune(bound_est):
            continue
        if nodes >= node_limit or (time_limit is not None
                                   and time.monotonic() - t0 > time_limit):
            exhausted = False
            break
        nodes += 1
        lo = model.lower.copy()
        up = model.upper.copy()
        for j, fl, fu in fixings:
            lo[j] = max(lo[j], fl)
            up[j] = min(up[j], fu)
        if np.any(lo > up + 1e-12):
            continue
        try:
            res = solve_kernel(model.c, model.A, model.b, model.senses,
                               lo, up, vstatus=token)
        except KernelError:
            res = solve_kernel(model.c, model.A, model.b, model.senses,
                               lo, up)
        if res.status == "infeasible":
            continue
        if res.status != "optimal":
            raise KernelError("node relaxation returned %s" % res.status)
        if prune(res.obj):
            continue
        x = res.x
        iv = np.flatnonzero(model.integer)
        frac = np.abs(x[iv] - np.round(x[iv]))
        if frac.size == 0 or frac.max() <= INT_TOL:
            xi, obj = x, float(res.obj)
            closes = True  # incumbent attains the subtree bound
            if frac.size and frac.max() > 0.0:
                pol = _pin_integers(model, lo, up, x)
                if pol is None:
                    xi = None  # rounding infeasible or numerically lost
                else:
                    xi, obj = pol
                    closes = obj <= res.obj + 1e-9
            ok = xi is not None and (cutoff is None or obj <= cutoff + 1e-9)
            if ok:
                if mode == "first_feasible":
                    return MilpSolution("feasible", xi.copy(), obj, obj,
                                        nodes, time.monotonic() - t0)
                if obj < best_obj - 1e-12:
                    best_obj = obj
                    best_x = xi.copy()
                    if best_obj <= model.obj_lower_bound + 1e-9:
                        break
            if ok and closes:
                continue
            # the exact completions of this subtree are not settled by the
            # incumbent: dichotomize an unfixed integer so they stay
            # partitioned (a near-integral relaxation point survives the
            # split, but every child strictly shrinks the integer box)
            for t in np.argsort(-frac, kind="stable"):
                j = int(iv[t])
                r_j = float(np.round(x[j]))
                if r_j > lo[j] + 1e-12:
                    pair = ((j, lo[j], r_j - 1.0), (j, r_j, up[j]))
                elif r_j < up[j] - 1e-12:
                    pair = ((j, lo[j], r_j), (j, r_j + 1.0, up[j]))
                else:
                    continue  # already pinned
                for child in pair:
                    seq += 1
                    heapq.heappush(heap, (res.obj, seq, fixings + (child,),
                                          res.vstatus))
                break
            continue
        # branch on the fractional integer closest to one half
        dist = np.abs((x[iv] - np.floor(x[iv])) - 0.5)
        dist[frac <= INT_TOL] = np.inf
        j = int(iv[np.argmin(dist)])
        fl = float(np.floor(x[j]))
        for child in ((j, lo[j], fl), (j, fl + 1.0, up[j])):
            seq += 1
            heapq.heappush(heap, (res.obj, seq, fixings + (child,),
                                  res.vstatus))

    runtime = time.monotonic() - t0
    open_bounds = [h[0] for h in heap if not prune(h[0])]
    if exhausted and not open_bounds:
        if mode == "first_feasible":
            return MilpSolution("infeasible", np.zeros(model.n), np.nan,
                                np.inf, nodes, runtime)
        if best_x is None:
            return MilpSolution("infeasible", np.zeros(model.n), np.nan,
                                np.inf, nodes, runtime)
        return MilpSolution("optimal", best_x, best_obj, best_obj, nodes,
                            runtime)
    bound = min(open_bounds) if open_bounds else best_obj
    bound = max(bound, model.obj_lower_bound)
    if best_x is None:
        return MilpSolution("unknown", np.zeros(model.n), np.nan,
                            float(bound), nodes, runtime)
    if bound >= best_obj - 1e-9:
        return MilpSolution("optimal", best_x, best_obj, best_obj, nodes,
                            runtime)
    return MilpSolution("incumbent_only", best_x, best_obj, float(bound),
                        nodes, runtime)
