"""Convex quadratic programming by a primal active-set method.

Solves

    minimize    (1/2) x' Q x + q' x
    subject to  E x = h,   C x <= d,   x >= lower

with ``Q`` positive semidefinite.  Lower bounds and inequality rows in the
working set are treated as equalities; every step solves the resulting
equality-constrained subproblem on the free variables through a nullspace
basis from a singular value decomposition, which stays well defined under
rank deficiency and semidefinite curvature.  Blocking constraints and
working-set drops are resolved by lowest index, so runs are deterministic.

The module also builds the projection problem used by the estimation
pipeline: find the point of an intersection of finitely generated cones
closest to a target vector, with the cost vector eliminated through the
first cone's generators.  The projected point is unique (projection onto a
convex set); the generator weights are generally not and are reported for
diagnostics only.
"""

from dataclasses import dataclass

import numpy as np

from .lp import ConeGenerators, cone_membership
from .simplex import solve_kernel

# Search box used only to keep the feasible-start linear programs bounded.
_START_BOX = 1e8


@dataclass
class QuadraticProgram:
    Q: np.ndarray
    q: np.ndarray
    E: np.ndarray = None     # equality rows, E x = h
    h: np.ndarray = None
    C: np.ndarray = None     # inequality rows, C x <= d
    d: np.ndarray = None
    lower: np.ndarray = None  # elementwise lower bounds (may be -inf)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        n = self.q.shape[0]
        self.Q = np.asarray(self.Q, dtype=float)
        if self.Q.shape != (n, n):
            raise ValueError("Q shape mismatch")
        self.Q = 0.5 * (self.Q + self.Q.T)
        if self.E is None:
            self.E = np.zeros((0, n))
            self.h = np.zeros(0)
        self.E = np.atleast_2d(np.asarray(self.E, dtype=float))
        self.h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if self.C is None:
            self.C = np.zeros((0, n))
            self.d = np.zeros(0)
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.d = np.atleast_1d(np.asarray(self.d, dtype=float))
        if self.lower is None:
            self.lower = np.full(n, -np.inf)
        self.lower = np.asarray(self.lower, dtype=float)
        if self.E.shape != (self.h.shape[0], n) \
                or self.C.shape != (self.d.shape[0], n) \
                or self.lower.shape != (n,):
            raise ValueError("inconsistent constraint shapes")

    @property
    def n(self):
        return self.q.shape[0]


@dataclass
class QpResult:
    status: str              # optimal | infeasible | unbounded
                             # | iteration_limit
    x: np.ndarray
    objective: float
    iterations: int


def _objective(qp, x):
    return float(0.5 * (x @ (qp.Q @ x)) + qp.q @ x)


def _nullspace(M):
    """Orthonormal basis of the nullspace of M (columns)."""
    if M.shape[0] == 0:
        return np.eye(M.shape[1])
    if M.shape[1] == 0:
        return np.zeros((0, 0))
    u, s, vt = np.linalg.svd(M, full_matrices=True)
    tol = max(M.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > max(tol, 1e-13)))
    return vt[rank:].T


def find_feasible_point(qp, objective=None):
    """A feasible point via one linear program, or None when infeasible.

    An auxiliary +/- 1e8 box keeps the search bounded; feasible sets that
    only contain points outside it are reported infeasible.
    """
    n = qp.n
    A = np.vstack([qp.E, qp.C])
    b = np.concatenate([qp.h, qp.d])
    senses = ["="] * qp.E.shape[0] + ["<="] * qp.C.shape[0]
    c = np.zeros(n) if objective is None else np.asarray(objective, float)
    lower = np.where(np.isfinite(qp.lower), qp.lower, -_START_BOX)
    upper = np.full(n, _START_BOX)
    res = solve_kernel(c, A, b, senses, lower=lower, upper=upper)
    if res.status != "optimal":
        return None
    return res.x


def _is_feasible(qp, x, tol=1e-9):
    if np.any(x < qp.lower - tol):
        return False
    if qp.E.shape[0]:
        if np.max(np.abs(qp.E @ x - qp.h)) > tol * (1 + np.max(np.abs(qp.h))):
            return False
    if qp.C.shape[0]:
        if np.max(qp.C @ x - qp.d) > tol * (1 + np.max(np.abs(qp.d))):
            return False
    return True


def solve_qp(qp, *, x0=None, feas_tol=1e-9, opt_tol=1e-8, max_iter=None):
    """Minimize the quadratic program from a feasible start.

    When ``x0`` is omitted a start is found with one linear program.  The
    initial working set is the set of bounds and rows active at the start.
    """
    n = qp.n
    if x0 is None:
        x0 = find_feasible_point(qp)
        if x0 is None:
            return QpResult("infeasible", np.zeros(n), np.inf, 0)
    x = np.array(x0, dtype=float)
    if not _is_feasible(qp, x, tol=1e-7):
        raise ValueError("starting point is infeasible")
    x = np.maximum(x, qp.lower)

    kC = qp.C.shape[0]
    pE = qp.E.shape[0]
    finite_lb = np.isfinite(qp.lower)
    lb0 = np.where(finite_lb, qp.lower, 0.0)
    wb = finite_lb & (x <= qp.lower + feas_tol * (1 + np.abs(lb0)))
    if kC:
        wc = (qp.d - qp.C @ x) <= feas_tol * (1 + np.abs(qp.d))
    else:
        wc = np.zeros(0, dtype=bool)

    soft_limit = max(100, 10 * (n + kC + pE))
    if max_iter is None:
        max_iter = 2 * soft_limit + 50
    Qw = qp.Q

    it = 0
    while True:
        it += 1
        if it > max_iter:
            return QpResult("iteration_limit", x, _objective(qp, x), it)
        if it == soft_limit:
            # regularize against degenerate cycling; the perturbation is
            # far below every tolerance in use
            bump = 1e-12 * max(1.0, float(np.max(np.abs(qp.Q), initial=0.0)))
            Qw = qp.Q + bump * np.eye(n)

        g = Qw @ x + qp.q
        free = ~wb
        CmW = qp.C[wc]
        M = np.vstack([qp.E[:, free], CmW[:, free]])
        Z = _nullspace(M)

        p = np.zeros(n)
        alpha_cap = 1.0
        if Z.shape[0] and Z.shape[1]:
            gF = g[free]
            Zg = Z.T @ gF
            QFF = Qw[np.ix_(free, free)]
            H = Z.T @ (QFF @ Z)
            u = np.linalg.lstsq(H, -Zg, rcond=None)[0]
            resid = H @ u + Zg
            if np.max(np.abs(resid), initial=0.0) \
                    <= 1e-7 * (1 + np.max(np.abs(Zg), initial=0.0)):
                p[free] = Z @ u
                alpha_cap = 1.0
            else:
                # zero-curvature descent direction; step to the line minimum
                pF = -(Z @ Zg)
                curv = float(pF @ (QFF @ pF))
                gp = float(gF @ pF)
                p[free] = pF
                alpha_cap = -gp / curv if curv > 1e-14 * (1 + abs(gp)) \
                    else np.inf

        if np.max(np.abs(p), initial=0.0) \
                <= 1e-11 * (1 + np.max(np.abs(x), initial=0.0)):
            # stationary on the working set: check multipliers
            EW = qp.E[:, free]
            CW = CmW[:, free]
            At = np.vstack([EW, CW]).T
            if At.shape[1]:
                mvec = np.linalg.lstsq(At, -g[free], rcond=None)[0]
            else:
                mvec = np.zeros(0)
            nu = mvec[:pE]
            muC = mvec[pE:]
            resid_full = g + qp.E.T @ nu + CmW.T @ muC
            scale = opt_tol * (1 + np.max(np.abs(g), initial=0.0))
            candidates = [int(j) for j, v in
                          zip(np.flatnonzero(wb), resid_full[wb])
                          if v < -scale]
            candidates += [n + int(i) for i, v in
                           zip(np.flatnonzero(wc), muC) if v < -scale]
            if not candidates:
                return QpResult("optimal", x, _objective(qp, x), it)
            drop = min(candidates)
            if drop < n:
                wb[drop] = False
            else:
                wc[drop - n] = False
            continue

        # ratio test against bounds and rows outside the working set
        gidx = []
        ratio = []
        bmask = (~wb) & finite_lb & (p < -1e-11)
        for j in np.flatnonzero(bmask):
            gidx.append(int(j))
            ratio.append((qp.lower[j] - x[j]) / p[j])
        if kC:
            Cp = qp.C @ p
            slack = qp.d - qp.C @ x
            rmask = (~wc) & (Cp > 1e-11)
            for i in np.flatnonzero(rmask):
                gidx.append(n + int(i))
                ratio.append(slack[i] / Cp[i])
        alpha = alpha_cap
        block = -1
        if ratio:
            ratio = np.maximum(np.asarray(ratio), 0.0)
            rmin = float(ratio.min())
            if rmin < alpha_cap:
                alpha = rmin
                near = ratio <= rmin + 1e-12 * (1 + rmin)
                block = min(g for g, keep in zip(gidx, near) if keep)
        if not np.isfinite(alpha):
            return QpResult("unbounded", x, -np.inf, it)
        x = x + alpha * p
        if block >= 0:
            if block < n:
                wb[block] = True
                x[block] = qp.lower[block]
            else:
                wc[block - n] = True


def solve_qp_multistart(qp, *, n_starts=3, seed=0):
    """Best result over several deterministic starting points.

    Start 1 is the clipped origin when feasible, start 2 a feasibility
    vertex, and later starts are vertices found under random objectives
    drawn from ``seed``.  For a convex objective every optimal run reaches
    the same value; multiple starts guard against a stalled run.
    """
    starts = []
    z = np.maximum(np.zeros(qp.n), np.where(np.isfinite(qp.lower),
                                            qp.lower, 0.0))
    if _is_feasible(qp, z):
        starts.append(z)
    fp = find_feasible_point(qp)
    if fp is not None:
        starts.append(fp)
    rng = np.random.default_rng(seed)
    while len(starts) < n_starts:
        fp = find_feasible_point(qp, objective=rng.standard_normal(qp.n))
        if fp is None:
            break
        starts.append(fp)
    if not starts:
        return QpResult("infeasible", np.zeros(qp.n), np.inf, 0)
    best = None
    fallback = None
    for x0 in starts:
        res = solve_qp(qp, x0=x0)
        if res.status == "optimal":
            if best is None or res.objective < best.objective - 1e-12:
                best = res
        else:
            fallback = res
    return best if best is not None else fallback


def _generator_matrices(cones, n):
    """Unit-length generator rows per cone, with the original lengths.

    Cones are scale invariant, so normalizing keeps the weight variables
    on a bounded scale regardless of how the caller scaled the rows; the
    lengths let weights be mapped back to the original generators.  Zero
    rows are kept as-is (length one) since they add nothing to the cone.
    """
    mats = []
    scales = []
    for cone in cones:
        G = getattr(cone, "G", cone)
        G = np.atleast_2d(np.asarray(G, dtype=float))
        if G.shape[1] != n:
            raise ValueError("generator dimension mismatch")
        if G.shape[0] == 0:
            raise ValueError("cone with no generators")
        s = np.linalg.norm(G, axis=1)
        s[s == 0.0] = 1.0
        mats.append(G / s[:, None])
        scales.append(s)
    return mats, scales


def build_cone_projection(target, cones, sign_rows=None, sign_rhs=None):
    """Quadratic program projecting ``target`` onto intersecting cones.

    Variables are the stacked nonnegative weights of every cone's
    generators, rescaled to unit length so the program is invariant to how
    the caller scaled the rows; the projected vector itself is eliminated
    through the first cone's generators, and equality rows force all cones
    to reproduce the same vector.  Optional rows ``sign_rows @ cost <=
    sign_rhs`` restrict the projected vector directly.  Returns the
    program and the weight-block offsets (one per cone, plus the total
    size).
    """
    target = np.asarray(target, dtype=float)
    n = target.shape[0]
    if not cones:
        raise ValueError("need at least one cone")
    Gs, _ = _generator_matrices(cones, n)
    sizes = [G.shape[0] for G in Gs]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    N = int(offsets[-1])
    T1 = sizes[0]
    G1 = Gs[0]

    Q = np.zeros((N, N))
    Q[:T1, :T1] = 2.0 * (G1 @ G1.T)
    q = np.zeros(N)
    q[:T1] = -2.0 * (G1 @ target)

    nE = n * (len(Gs) - 1)
    E = np.zeros((nE, N))
    for i in range(1, len(Gs)):
        r0 = n * (i - 1)
        E[r0:r0 + n, :T1] = G1.T
        E[r0:r0 + n, offsets[i]:offsets[i + 1]] = -Gs[i].T
    h = np.zeros(nE)

    C = d = None
    if sign_rows is not None:
        S = np.atleast_2d(np.asarray(sign_rows, dtype=float))
        if S.shape[1] != n:
            raise ValueError("sign row dimension mismatch")
        C = np.zeros((S.shape[0], N))
        C[:, :T1] = S @ G1.T
        d = np.atleast_1d(np.asarray(sign_rhs, dtype=float))

    qp = QuadraticProgram(Q=Q, q=q, E=E, h=h, C=C, d=d, lower=np.zeros(N))
    return qp, offsets


@dataclass
class ConeProjection:
    status: str
    cost: np.ndarray         # closest point of the intersection, or None
    distance: float          # Euclidean distance from the target
    coefficients: list       # per-cone generator weights (diagnostic)
    iterations: int


def _membership_fast_path(target, cones, sign_rows, sign_rhs):
    """Exact shortcut: a target inside the intersection projects to itself.

    Returns the per-cone weights when the target satisfies the sign rows
    and belongs to every cone, else None.  Checked before the quadratic
    program because the common recoverability scenario (reference equal to
    the data-generating cost) makes the target admissible by construction.
    """
    if sign_rows is not None:
        S = np.atleast_2d(np.asarray(sign_rows, dtype=float))
        d = np.atleast_1d(np.asarray(sign_rhs, dtype=float))
        if np.any(S @ target > d + 1e-9 * (1.0 + np.abs(d))):
            return None
    coeff = []
    for cone in cones:
        G = getattr(cone, "G", cone)
        member, gamma = cone_membership(target, ConeGenerators(G))
        if not member:
            return None
        coeff.append(gamma)
    return coeff


def project_to_cones(target, cones, *, sign_rows=None, sign_rhs=None,
                     n_starts=3, seed=0):
    """Euclidean projection of ``target`` onto the cone intersection."""
    target = np.asarray(target, dtype=float)
    coeff = _membership_fast_path(target, cones, sign_rows, sign_rhs)
    if coeff is not None:
        return ConeProjection("optimal", target.copy(), 0.0, coeff, 0)
    qp, offsets = build_cone_projection(target, cones,
                                        sign_rows=sign_rows,
                                        sign_rhs=sign_rhs)
    res = solve_qp_multistart(qp, n_starts=n_starts, seed=seed)
    if res is None or res.status != "optimal":
        status = res.status if res is not None else "infeasible"
        return ConeProjection(status, None, np.inf, [],
                              res.iterations if res is not None else 0)
    Gs, scales = _generator_matrices(cones, target.shape[0])
    cost = Gs[0].T @ res.x[:offsets[1]]
    # weights are reported against the caller's original generators
    coeff = [np.maximum(res.x[offsets[i]:offsets[i + 1]], 0.0) / scales[i]
             for i in range(len(Gs))]
    distance = float(np.linalg.norm(target - cost))
    return ConeProjection("optimal", cost, distance, coeff, res.iterations)
