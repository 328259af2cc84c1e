"""Polytopes, vertex-returning LP solves, and polyhedral cone operations.

Everything here is in the minimization convention: the forward problem is
min c'x over a compact polytope {x : A x <= b}, and the admissible cone of
an observed solution is spanned by the negated active rows.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .simplex import KernelError, solve_kernel

FEAS_TOL = 1e-7     # relative feasibility / active-set tolerance
VERTEX_TOL = 1e-8   # vertex deduplication tolerance


class UnboundedPolytopeError(ValueError):
    """The inequality system does not describe a compact set."""


def _interval_propagation(A, b, sweeps=4):
    """Variable boxes implied by A x <= b, by interval sweeps over rows.

    Returns (lo, up) arrays, entries infinite when a row set never pins the
    coordinate. Sound but not tight; used for boundedness fast paths and
    slack range bounds.
    """
    m, n = A.shape
    lo = np.full(n, -np.inf)
    up = np.full(n, np.inf)
    for _ in range(sweeps):
        changed = False
        for k in range(m):
            row = A[k]
            nz = np.flatnonzero(row)
            if nz.size == 0:
                continue
            pos = row > 0
            neg = row < 0
            # minimal contribution of every variable in the row
            mins = np.zeros(n)
            mins[pos] = row[pos] * lo[pos]
            mins[neg] = row[neg] * up[neg]
            finite = np.isfinite(mins[nz])
            n_inf = int(np.count_nonzero(~finite))
            finite_sum = float(mins[nz][finite].sum())
            for j in nz:
                if np.isfinite(mins[j]):
                    if n_inf > 0:
                        continue  # some other term is unbounded below
                    rest = finite_sum - mins[j]
                else:
                    if n_inf > 1:
                        continue
                    rest = finite_sum
                room = b[k] - rest
                if row[j] > 0:
                    new_up = room / row[j]
                    if new_up < up[j] - 1e-12:
                        up[j] = new_up
                        changed = True
                else:
                    new_lo = room / row[j]
                    if new_lo > lo[j] + 1e-12:
                        lo[j] = new_lo
                        changed = True
        if not changed:
            break
    return lo, up


def _positively_spanning(A):
    """True when the rows of A positively span R^n.

    Decided by one LP: max delta s.t. Ahat' lam = 0, sum lam = 1,
    lam_i >= delta, over the 2-norm normalized rows Ahat. The rows span
    positively iff the optimum is strictly positive, which together with
    rank(A) = n is equivalent to {d : A d <= 0} = {0}, i.e. compactness of
    any nonempty {x : A x <= b}.
    """
    m, n = A.shape
    norms = np.linalg.norm(A, axis=1)
    keep = norms > 1e-12
    Ah = A[keep] / norms[keep, None]
    mm = Ah.shape[0]
    if mm == 0 or np.linalg.matrix_rank(Ah) < n:
        return False
    # variables (lam_1..lam_mm, delta)
    cols = mm + 1
    c = np.zeros(cols)
    c[-1] = -1.0  # maximize delta
    rows = []
    rhs = []
    senses = []
    for j in range(n):
        r = np.zeros(cols)
        r[:mm] = Ah[:, j]
        rows.append(r)
        rhs.append(0.0)
        senses.append("=")
    r = np.zeros(cols)
    r[:mm] = 1.0
    rows.append(r)
    rhs.append(1.0)
    senses.append("=")
    for i in range(mm):
        r = np.zeros(cols)
        r[i] = -1.0
        r[-1] = 1.0
        rows.append(r)  # delta - lam_i <= 0
        rhs.append(0.0)
        senses.append("<=")
    lower = np.zeros(cols)
    lower[-1] = -1.0
    upper = np.ones(cols)
    res = solve_kernel(c, np.array(rows), np.array(rhs), senses,
                       lower, upper)
    return res.status == "optimal" and -res.obj > 1e-9


@dataclass
class Polytope:
    """Compact feasible set {x : A x <= b}.

    equality_pairs lists index pairs (k, k2) encoding a_k x = b_k as the two
    inequalities k and k2 = (-a_k, -b_k); both rows are tight at every
    feasible point, which downstream model builders exploit.

    Construction verifies compactness (rank n plus positively spanning
    rows); pass the check because an unbounded forward problem makes the
    inverse problem ill-posed.
    """

    A: np.ndarray
    b: np.ndarray
    equality_pairs: list = field(default_factory=list)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.A.ndim != 2 or self.b.ndim != 1 \
                or self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b shapes are inconsistent")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValueError("A and b must be finite")
        for k, k2 in self.equality_pairs:
            if not (np.allclose(self.A[k], -self.A[k2])
                    and np.isclose(self.b[k], -self.b[k2])):
                raise ValueError("equality pair %d,%d rows do not negate"
                                 % (k, k2))
        lo, up = _interval_propagation(self.A, self.b)
        self._box = (lo, up)
        if np.all(np.isfinite(lo)) and np.all(np.isfinite(up)):
            pass  # finite box implies compactness, no LP needed
        elif not _positively_spanning(self.A):
            raise UnboundedPolytopeError(
                "rows do not positively span; the set is unbounded or empty "
                "in some direction")

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.A.shape[0]

    def box(self):
        """Interval-propagation variable box (lo, up); entries may be inf."""
        return self._box

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.A @ x - self.b
                           <= tol * (1 + np.abs(self.b))))


@dataclass
class LpSolution:
    x: np.ndarray
    objective: float
    duals: np.ndarray       # lam >= 0 with c + A' lam = 0
    active: np.ndarray      # indices of tight rows at x
    status: str
    vstatus: np.ndarray     # kernel warm-start token
    iterations: int


def active_set(poly, x, tol=FEAS_TOL):
    """Indices of rows tight at x, with tolerance relative to 1 + |b_k|."""
    resid = np.abs(poly.A @ np.asarray(x, dtype=float) - poly.b)
    return np.flatnonzero(resid <= tol * (1 + np.abs(poly.b)))


def solve_lp(poly, c, *, vstatus=None):
    """min c'x over the polytope; returns a vertex solution.

    The returned duals satisfy c + A' lam = 0 with lam >= 0 supported on
    tight rows (complementary slackness), verified before returning. Free
    nonbasic variables are purified into the basis so the solution is a
    vertex even for degenerate objectives such as c = 0.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (poly.n,):
        raise ValueError("cost vector has wrong length")
    res = solve_kernel(c, poly.A, poly.b, vstatus=vstatus, purify=True)
    if res.status != "optimal":
        raise KernelError("polytope solve returned %s" % res.status)
    lam = -res.duals
    scale = 1 + float(np.abs(c).max(initial=0.0))
    if np.max(np.abs(c + poly.A.T @ lam)) > 1e-7 * scale:
        raise KernelError("stationarity residual too large")
    if lam.min(initial=0.0) < -1e-9:
        raise KernelError("negative multiplier on a <= row")
    slack = poly.b - res.row_activity
    if slack.min(initial=0.0) < -FEAS_TOL * (1 + np.abs(poly.b).max(
            initial=0.0)):
        raise KernelError("primal infeasibility above tolerance")
    if abs(lam @ slack) > 1e-7 * scale * (1 + np.abs(poly.b).max(
            initial=0.0)):
        raise KernelError("complementary slackness violated")
    return LpSolution(x=res.x, objective=res.obj, duals=lam,
                      active=active_set(poly, res.x), status=res.status,
                      vstatus=res.vstatus, iterations=res.iterations)


def enumerate_vertices(poly, max_subsets=2 * 10 ** 6):
    """All vertices of the polytope by row-subset enumeration.

    Exponential in n; intended for the small instances used in oracles and
    examples. Vertices are deduplicated at tolerance 1e-8 and returned in
    first-discovery order over lexicographic row subsets.
    """
    A, b, n = poly.A, poly.b, poly.n
    m = A.shape[0]
    from math import comb
    if comb(m, n) > max_subsets:
        raise ValueError("too many row subsets (%d); raise max_subsets to "
                         "force" % comb(m, n))
    out = []
    for rows in itertools.combinations(range(m), n):
        sub = A[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x = np.linalg.solve(sub, b[list(rows)])
        if not poly.contains(x):
            continue
        if any(np.max(np.abs(x - v)) <= VERTEX_TOL for v in out):
            continue
        out.append(x)
    return out


@dataclass
class ConeGenerators:
    """Finitely generated cone {sum_t gamma_t g_t : gamma >= 0}.

    Generators are the rows of ``G``. An empty generator list denotes the
    trivial cone {0}.
    """

    G: np.ndarray

    def __post_init__(self):
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        if self.G.size == 0:
            self.G = self.G.reshape(0, self.G.shape[1] if self.G.ndim == 2
                                    else 0)

    @property
    def T(self):
        return self.G.shape[0]

    @property
    def n(self):
        return self.G.shape[1]

    def normalized(self):
        """Same cone with unit 2-norm generators (zero rows dropped)."""
        norms = np.linalg.norm(self.G, axis=1)
        keep = norms > 1e-12
        return ConeGenerators(self.G[keep] / norms[keep, None])


def cone_membership(y, cone, tol=FEAS_TOL):
    """Whether y lies in the cone; returns (member, gamma_or_None).

    Decided by a feasibility LP in the generator weights. The weights are
    boxed by a data-driven bound large enough to express any member of the
    cone at the scale of y, so the LP stays bounded.
    """
    y = np.asarray(y, dtype=float)
    G = cone.G
    if G.shape[0] == 0:
        if np.max(np.abs(y), initial=0.0) <= tol:
            return True, np.zeros(0)
        return False, None
    T, n = G.shape
    if y.shape != (n,):
        raise ValueError("dimension mismatch")
    dist, gamma, _ = _cone_distance_lp(y, G)
    scale = 1 + float(np.abs(y).max(initial=0.0))
    if dist <= tol * scale:
        return True, gamma
    return False, None


def _cone_distance_lp(y, G, norm=1):
    """(distance, gamma, point) of min_{gamma>=0} ||y - G' gamma||_norm."""
    T, n = G.shape
    if norm == 1:
        k = n
    elif norm == np.inf or norm == "inf":
        k = 1
    else:
        raise ValueError("only the 1- and infinity-norms are supported")
    cols = T + k
    c = np.zeros(cols)
    c[T:] = 1.0
    # epigraph rows: y_j - g_j' gamma <= e_j  and  g_j' gamma - y_j <= e_j
    rows = []
    rhs = []
    for j in range(n):
        r = np.zeros(cols)
        r[:T] = -G[:, j]
        r[T + (j % k)] = -1.0
        rows.append(r)
        rhs.append(-y[j])
        r = np.zeros(cols)
        r[:T] = G[:, j]
        r[T + (j % k)] = -1.0
        rows.append(r)
        rhs.append(y[j])
    lower = np.zeros(cols)
    upper = np.full(cols, np.inf)
    res = solve_kernel(c, np.array(rows), np.array(rhs),
                       ["<="] * len(rows), lower, upper)
    if res.status != "optimal":
        raise KernelError("cone distance LP returned %s" % res.status)
    gamma = res.x[:T]
    return float(res.obj), gamma, G.T @ gamma


def min_distance_to_cone(y, cone, norm=1):
    """Minimum distance from y to the cone, and the attaining cone point.

    Returns (distance, point). The 1-norm is the default used by the
    adaptive scoring machinery; the infinity norm is also supported.
    """
    y = np.asarray(y, dtype=float)
    G = cone.G
    if G.shape[0] == 0:
        if norm == 1:
            return float(np.abs(y).sum()), np.zeros_like(y)
        return float(np.abs(y).max(initial=0.0)), np.zeros_like(y)
    dist, _, point = _cone_distance_lp(y, G, norm)
    return dist, point
