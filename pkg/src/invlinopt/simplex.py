"""Dense bounded-variable simplex kernel (primal and dual).

Solves
    min  c'x   s.t.   A x  (<= / = / >=)  b,    lower <= x <= upper

with a revised simplex method over the slacked system [A I] v = b. The
kernel keeps an explicit dense basis inverse with product-form updates and
periodic refactorization, which is plenty for the dense mid-size problems
this package generates.

Conventions
-----------
* Minimization. Row duals ``y`` satisfy ``d = c - A'y`` for the reduced
  costs; for a binding ``<=`` row at a minimum, ``y_i <= 0`` (so callers
  that want nonnegative multipliers for ``c + A'lam = 0`` use ``lam = -y``).
* Variable statuses: a variable is basic, nonbasic at its lower or upper
  bound, or nonbasic free at value zero. The full status vector (structural
  variables followed by one slack per row) is the warm-start token: pass it
  back via ``vstatus`` to resume from that basis. Appending rows to a
  problem extends the token with one BASIC entry per new row.
* Pricing is Dantzig (most negative violation) with lowest-index
  tie-breaking. After a run of degenerate pivots the kernel switches to
  Bland's rule until a nondegenerate step is made, which guarantees
  termination.
* Phase one minimizes the total bound violation of the basic variables
  (composite objective, no artificial columns), so the status token keeps a
  fixed length throughout.

The kernel is deterministic: identical inputs produce identical pivot
sequences and results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AT_LOWER = 0
AT_UPPER = 1
BASIC = 2
NB_FREE = 3

_STATUS_OPTIMAL = "optimal"
_STATUS_INFEASIBLE = "infeasible"
_STATUS_UNBOUNDED = "unbounded"


class KernelError(RuntimeError):
    """Numerical failure inside the simplex kernel."""


class _RecoverableError(KernelError):
    """Numerical dead end that a restart from a fresh basis may clear."""


@dataclass
class KernelResult:
    status: str
    x: np.ndarray            # structural variable values, shape (n,)
    obj: float
    duals: np.ndarray        # row duals y, shape (m,)
    reduced: np.ndarray      # reduced costs of structural variables, shape (n,)
    vstatus: np.ndarray      # warm-start token, shape (n + m,)
    iterations: int
    row_activity: np.ndarray  # A @ x, shape (m,)


def _as_float_array(x, name, ndim):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise ValueError("%s must be %d-dimensional" % (name, ndim))
    if not np.all(np.isfinite(arr) | np.isinf(arr)):
        raise ValueError("%s contains NaN" % name)
    return arr


class _Simplex:
    """One solve over the slacked system. Not reusable."""

    def __init__(self, c, A, b, senses, lower, upper, feas_tol, opt_tol,
                 max_iter):
        m, n = A.shape
        self.m = m
        self.n = n
        self.N = n + m
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.max_iter = max_iter

        # the slacked system is [A I] v = b; the identity block is implicit
        self.A = np.ascontiguousarray(A)
        self.b = b
        self.cost = np.concatenate([c, np.zeros(m)])
        slo = np.zeros(m)
        sup = np.zeros(m)
        for i, s in enumerate(senses):
            if s == "<=":
                sup[i] = np.inf
            elif s == ">=":
                slo[i] = -np.inf
            elif s == "=":
                pass
            else:
                raise ValueError("unknown row sense %r" % (s,))
        self.lo = np.concatenate([lower, slo])
        self.up = np.concatenate([upper, sup])
        if np.any(self.lo > self.up + 1e-12):
            raise ValueError("lower bound exceeds upper bound")
        # Fixed variables can never move; exclude them from entering.
        self.movable = self.up > self.lo

        self.vstatus = None
        self.basic = None        # variable index at each basis position
        self.in_basis = None     # position of each variable, -1 if nonbasic
        self.B_inv = None
        self.xB = None
        self.d = None            # cached phase-two reduced costs
        self._upd = None         # preallocated rank-one update buffer
        self._probe = None
        self.iterations = 0
        self.bland = False
        self.degen_streak = 0
        self.pivots_since_refactor = 0
        self.refresh_every = 128

    # -- basis bookkeeping -------------------------------------------------

    def crash_basis(self):
        vs = np.empty(self.N, dtype=np.int8)
        for j in range(self.n):
            if np.isfinite(self.lo[j]):
                vs[j] = AT_LOWER
            elif np.isfinite(self.up[j]):
                vs[j] = AT_UPPER
            else:
                vs[j] = NB_FREE
        vs[self.n:] = BASIC
        return vs

    def install(self, vstatus):
        vs = np.asarray(vstatus, dtype=np.int8).copy()
        if vs.shape != (self.N,) or np.count_nonzero(vs == BASIC) != self.m:
            vs = self.crash_basis()
        self.vstatus = vs
        self.basic = np.flatnonzero(vs == BASIC)
        self.in_basis = np.full(self.N, -1, dtype=int)
        self.in_basis[self.basic] = np.arange(self.m)
        try:
            self.factorize()
        except KernelError:
            if np.array_equal(vs, self.crash_basis()):
                raise
            self.install(self.crash_basis())

    def factorize(self):
        if self.m == 0:
            self.B_inv = np.zeros((0, 0))
            self.xB = np.zeros(0)
            return
        for attempt in (0, 1):
            B = np.zeros((self.m, self.m))
            strt = self.basic < self.n
            B[:, strt] = self.A[:, self.basic[strt]]
            slk = np.flatnonzero(~strt)
            B[self.basic[slk] - self.n, slk] = 1.0
            try:
                inv = np.linalg.inv(B)
            except np.linalg.LinAlgError:
                inv = None
            if inv is not None and np.all(np.isfinite(inv)):
                self.B_inv = inv
                break
            if attempt or not self.repair_basis(B):
                raise _RecoverableError("singular basis")
        if self._upd is None or self._upd.shape[0] != self.m:
            self._upd = np.empty((self.m, self.m))
            i = np.arange(self.m)
            self._probe = np.sin(0.7 * i + 0.3) + 1.5
        self.pivots_since_refactor = 0
        self.d = None  # force a clean pricing pass after refactorization
        self.recompute_xB()

    def repair_basis(self, B):
        """Swap numerically dependent basic columns for independent slacks.

        Greedy in basis order: a column whose orthogonal distance to the
        span of the previous columns is negligible is evicted (its variable
        moves to a finite bound, or goes free) and replaced by the unit
        column of a row the kept columns leave unspanned. Returns True when
        the basis changed; the caller refactorizes afterwards. Primal or
        dual feasibility may be lost, so conclusions drawn after a repair
        must re-prove whichever invariant they rely on.
        """
        r_diag = np.abs(np.diag(np.linalg.qr(B, mode="r")))
        scale = max(1.0, float(r_diag.max()))
        bad = np.flatnonzero(r_diag <= 1e-9 * scale)
        if bad.size == 0:
            return False
        keep = np.setdiff1d(np.arange(self.m), bad)
        qa, _ = np.linalg.qr(B[:, keep])
        # rows whose slack stays basic are not available as replacements
        kept_vars = self.basic[keep]
        blocked = kept_vars[kept_vars >= self.n] - self.n
        rows = []
        for _ in range(bad.size):
            res2 = 1.0 - np.einsum("ij,ij->i", qa, qa)
            res2[blocked] = -np.inf
            res2[rows] = -np.inf
            i = int(np.argmax(res2))
            if res2[i] <= 1e-12:
                return False  # no unspanned row left to complete the basis
            e = np.zeros(self.m)
            e[i] = 1.0
            v = e - qa @ (qa.T @ e)
            qa = np.concatenate([qa, (v / np.linalg.norm(v))[:, None]],
                                axis=1)
            rows.append(i)
        rows.sort()
        for k in bad:  # evict all before inserting: a slack evicted at one
            out = self.basic[k]  # position may re-enter at another
            self.in_basis[out] = -1
            if np.isfinite(self.lo[out]):
                self.vstatus[out] = AT_LOWER
            elif np.isfinite(self.up[out]):
                self.vstatus[out] = AT_UPPER
            else:
                self.vstatus[out] = NB_FREE
        for k, i in zip(bad, rows):
            j = self.n + i
            self.basic[k] = j
            self.in_basis[j] = k
            self.vstatus[j] = BASIC
        self.d = None
        return True

    def basis_drift(self):
        """Residual ||B (B_inv p) - p||_inf for a fixed probe vector p."""
        y = self.B_inv @ self._probe
        strt = self.basic < self.n
        By = self.A[:, self.basic[strt]] @ y[strt]
        slk = np.flatnonzero(~strt)
        By[self.basic[slk] - self.n] += y[slk]
        return float(np.max(np.abs(By - self._probe)))

    def refresh_if_drifting(self):
        """Periodic hygiene: refactorize only when the inverse has drifted."""
        if self.basis_drift() > 1e-8:
            self.factorize()
        else:
            self.pivots_since_refactor = 0
            self.d = None
            self.recompute_xB()

    def nonbasic_values(self):
        v = np.zeros(self.N)
        at_lo = self.vstatus == AT_LOWER
        at_up = self.vstatus == AT_UPPER
        v[at_lo] = self.lo[at_lo]
        v[at_up] = self.up[at_up]
        return v

    def start_value(self, j):
        s = self.vstatus[j]
        if s == AT_LOWER:
            return self.lo[j]
        if s == AT_UPPER:
            return self.up[j]
        return 0.0

    def recompute_xB(self):
        v = self.nonbasic_values()
        rhs = self.b - self.A @ v[:self.n] - v[self.n:]
        self.xB = self.B_inv @ rhs

    def values(self):
        v = self.nonbasic_values()
        v[self.basic] = self.xB
        return v

    def tableau_dot(self, y):
        """[A I]' @ y without materializing the slack block."""
        return np.concatenate([self.A.T @ y, y])

    # -- pricing -----------------------------------------------------------

    def duals_for(self, cost):
        if self.m == 0:
            return np.zeros(0)
        return self.B_inv.T @ cost[self.basic]

    def reduced_costs(self, cost):
        y = self.duals_for(cost)
        return cost - self.tableau_dot(y)

    def entering_candidates(self, d):
        """Violation score per nonbasic variable (0 when not improving)."""
        score = np.zeros(self.N)
        vs = self.vstatus
        at_lo = (vs == AT_LOWER) & self.movable
        at_up = (vs == AT_UPPER) & self.movable
        free = vs == NB_FREE
        score[at_lo] = np.maximum(-d[at_lo], 0.0)
        score[at_up] = np.maximum(d[at_up], 0.0)
        score[free] = np.abs(d[free])
        score[score <= self.opt_tol] = 0.0
        return score

    def pick_entering(self, score):
        idx = np.flatnonzero(score > 0)
        if idx.size == 0:
            return -1
        if self.bland:
            return int(idx[0])
        best = score[idx].max()
        # lowest index among near-ties for determinism
        return int(idx[score[idx] >= best * (1 - 1e-12)][0])

    # -- pivoting ----------------------------------------------------------

    def ftran(self, j):
        if j >= self.n:
            return self.B_inv[:, j - self.n].copy()
        return self.B_inv @ self.A[:, j]

    def update_basis(self, r, j, w):
        """Variable j enters at basis position r; column w = B_inv @ F_j."""
        piv = w[r]
        if abs(piv) < 1e-11:
            self.factorize()
            w2 = self.ftran(j)
            if abs(w2[r]) < 1e-11:
                raise _RecoverableError("pivot element vanished")
            w = w2
            piv = w[r]
        leave = self.basic[r]
        self.in_basis[leave] = -1
        self.basic[r] = j
        self.in_basis[j] = r
        self.B_inv[r] /= piv
        wz = w.copy()
        wz[r] = 0.0
        np.multiply(wz[:, None], self.B_inv[r][None, :], out=self._upd)
        self.B_inv -= self._upd
        self.d = None  # callers holding a valid update re-set it
        self.pivots_since_refactor += 1
        return leave

    def maybe_refresh(self):
        """Call once the pivot is fully applied (statuses and xB final)."""
        if self.pivots_since_refactor >= self.refresh_every:
            self.refresh_if_drifting()

    def note_step(self, t):
        if t <= 1e-11:
            self.degen_streak += 1
            if self.degen_streak >= 40:
                self.bland = True
        else:
            self.degen_streak = 0
            self.bland = False

    # -- primal ratio test ---------------------------------------------------

    def primal_step(self, j, sigma, w, phase_one):
        """Max step t >= 0 moving x_j by sigma*t; returns (t, r, leave_status).

        r is the blocking basis position (-1 for a bound flip of x_j,
        -2 for unblocked). In phase one, infeasible basics block at the
        violated bound they are approaching from outside and basics moving
        deeper into violation never block.
        """
        delta = sigma * w  # x_B changes by -delta * t
        lo_B = self.lo[self.basic]
        up_B = self.up[self.basic]
        xB = self.xB
        tol = self.feas_tol

        dec = delta > 1e-11   # basic value decreases with t
        inc = delta < -1e-11
        if phase_one:
            below = xB < lo_B - tol
            above = xB > up_B + tol
        else:
            below = np.zeros(self.m, dtype=bool)
            above = below

        target = np.full(self.m, np.nan)
        use_dec = dec & ~below
        use_inc = inc & ~above
        target[use_dec] = np.where(above[use_dec], up_B[use_dec],
                                   lo_B[use_dec])
        target[use_inc] = np.where(below[use_inc], lo_B[use_inc],
                                   up_B[use_inc])
        ok = np.isfinite(target)
        ratios = np.full(self.m, np.inf)
        ratios[ok] = np.maximum((xB[ok] - target[ok]) / delta[ok], 0.0)

        tmin = ratios.min() if self.m else np.inf
        rng = self.up[j] - self.lo[j]
        if rng < tmin - tol:  # entering hits its own opposite bound first
            return rng, -1, AT_UPPER if sigma > 0 else AT_LOWER
        if not np.isfinite(tmin):
            return np.inf, -2, AT_LOWER
        ties = np.flatnonzero(ratios <= tmin + tol * (1 + tmin))
        if self.bland:
            r = int(ties[np.argmin(self.basic[ties])])
        else:
            r = int(ties[np.argmax(np.abs(delta[ties]))])
        status = AT_LOWER if target[r] == lo_B[r] else AT_UPPER
        return float(ratios[r]), r, status

    def apply_primal_pivot(self, j, sigma, w, t, r, leave_status):
        start = self.start_value(j)
        if r == -1:  # bound flip
            self.vstatus[j] = AT_UPPER if self.vstatus[j] == AT_LOWER \
                else AT_LOWER
            self.xB -= t * sigma * w
            return
        self.xB -= t * sigma * w
        new_val = start + sigma * t
        leave = self.update_basis(r, j, w)
        self.vstatus[leave] = leave_status
        self.vstatus[j] = BASIC
        self.xB[r] = new_val
        self.maybe_refresh()

    # -- phase one -----------------------------------------------------------

    def infeasibility(self):
        lo_B = self.lo[self.basic]
        up_B = self.up[self.basic]
        below = np.maximum(lo_B - self.xB, 0.0)
        above = np.maximum(self.xB - up_B, 0.0)
        below[~np.isfinite(below)] = 0.0
        above[~np.isfinite(above)] = 0.0
        return float(below.sum() + above.sum())

    def phase_one_cost(self):
        cost = np.zeros(self.N)
        lo_B = self.lo[self.basic]
        up_B = self.up[self.basic]
        tol = self.feas_tol
        sig = np.zeros(self.m)
        sig[self.xB < lo_B - tol] = -1.0
        sig[self.xB > up_B + tol] = 1.0
        cost[self.basic] = sig
        return cost

    def run_phase_one(self):
        while True:
            if self.iterations >= self.max_iter:
                raise KernelError("iteration limit in phase one")
            f = self.infeasibility()
            if f <= self.feas_tol * (1 + self.m):
                return True
            cost = self.phase_one_cost()
            d = self.reduced_costs(cost)
            score = self.entering_candidates(d)
            j = self.pick_entering(score)
            if j < 0:
                if self.pivots_since_refactor > 0:
                    self.factorize()  # only conclude from a fresh inverse
                    continue
                return False  # infeasible
            sigma = 1.0
            if self.vstatus[j] == AT_UPPER:
                sigma = -1.0
            elif self.vstatus[j] == NB_FREE:
                sigma = 1.0 if d[j] < 0 else -1.0
            w = self.ftran(j)
            t, r, leave_status = self.primal_step(j, sigma, w, True)
            if r == -2:
                # the composite objective is bounded below by zero, so an
                # unblocked improving ray can only be a stale-inverse artifact
                raise _RecoverableError("unblocked phase-one step")
            self.apply_primal_pivot(j, sigma, w, t, r, leave_status)
            self.iterations += 1
            self.note_step(t)

    # -- phase two -----------------------------------------------------------

    def run_phase_two(self):
        while True:
            if self.iterations >= self.max_iter:
                raise KernelError("iteration limit in phase two")
            d = self.d if self.d is not None \
                else self.reduced_costs(self.cost)
            score = self.entering_candidates(d)
            j = self.pick_entering(score)
            if j < 0:
                if self.pivots_since_refactor > 0:
                    self.factorize()  # only conclude from a fresh inverse
                    continue
                self.d = d
                return _STATUS_OPTIMAL
            sigma = 1.0
            if self.vstatus[j] == AT_UPPER:
                sigma = -1.0
            elif self.vstatus[j] == NB_FREE:
                sigma = 1.0 if d[j] < 0 else -1.0
            w = self.ftran(j)
            t, r, leave_status = self.primal_step(j, sigma, w, False)
            if r == -2:
                if self.pivots_since_refactor > 0:
                    self.factorize()
                    continue
                return _STATUS_UNBOUNDED
            if r >= 0:
                alpha_row = self.tableau_dot(self.B_inv[r])
                d_next = d - (d[j] / w[r]) * alpha_row
            else:
                d_next = d  # bound flip leaves the basis unchanged
            self.d = None
            self.apply_primal_pivot(j, sigma, w, t, r, leave_status)
            if r == -1 or self.pivots_since_refactor > 0:
                d_next[self.basic] = 0.0
                self.d = d_next
            self.iterations += 1
            self.note_step(t)

    # -- dual simplex ----------------------------------------------------------

    def dual_feasible(self, d):
        tol = self.opt_tol * 10
        vs = self.vstatus
        ok_lo = np.all(d[(vs == AT_LOWER) & self.movable] >= -tol)
        ok_up = np.all(d[(vs == AT_UPPER) & self.movable] <= tol)
        ok_fr = np.all(np.abs(d[vs == NB_FREE]) <= tol)
        return bool(ok_lo and ok_up and ok_fr)

    def run_dual(self):
        """Dual simplex; requires a dual-feasible status vector."""
        while True:
            if self.iterations >= self.max_iter:
                raise KernelError("iteration limit in dual simplex")
            lo_B = self.lo[self.basic]
            up_B = self.up[self.basic]
            below = lo_B - self.xB
            above = self.xB - up_B
            below[~np.isfinite(below)] = -np.inf
            above[~np.isfinite(above)] = -np.inf
            viol = np.maximum(below, above)
            worst = viol.max() if self.m else 0.0
            if worst <= self.feas_tol:
                if self.pivots_since_refactor > 0:
                    self.factorize()  # only conclude from a fresh inverse
                    continue
                return _STATUS_OPTIMAL
            if self.bland:
                r = int(np.flatnonzero(viol > self.feas_tol)[0])
            else:
                ties = np.flatnonzero(viol >= worst * (1 - 1e-12))
                r = int(ties[np.argmin(self.basic[ties])])
            too_high = above[r] >= below[r]
            target = up_B[r] if too_high else lo_B[r]

            rho = self.B_inv[r]
            alpha = self.tableau_dot(rho)
            abar = alpha if too_high else -alpha

            d = self.d if self.d is not None \
                else self.reduced_costs(self.cost)
            vs = self.vstatus
            elig = np.zeros(self.N, dtype=bool)
            elig |= (vs == AT_LOWER) & self.movable & (abar > 1e-9)
            elig |= (vs == AT_UPPER) & self.movable & (abar < -1e-9)
            elig |= (vs == NB_FREE) & (np.abs(abar) > 1e-9)
            idx = np.flatnonzero(elig)
            if idx.size == 0:
                if self.pivots_since_refactor > 0:
                    self.factorize()
                    continue
                return _STATUS_INFEASIBLE
            theta = d[idx] / abar[idx]
            theta = np.maximum(theta, 0.0)
            tmin = theta.min()
            ties = idx[theta <= tmin + 1e-12]
            if self.bland:
                j = int(ties[0])
            else:
                j = int(ties[np.argmax(np.abs(abar[ties]))])

            w = self.ftran(j)
            denom = alpha[j]
            if abs(denom) < 1e-11:
                self.factorize()
                continue
            step = (self.xB[r] - target) / denom
            start = self.start_value(j)
            d_next = d - (d[j] / denom) * alpha
            self.d = None
            self.xB -= step * w
            leave = self.update_basis(r, j, w)
            self.vstatus[leave] = AT_UPPER if too_high else AT_LOWER
            self.vstatus[j] = BASIC
            self.xB[r] = start + step
            self.maybe_refresh()
            if self.pivots_since_refactor > 0:
                d_next[self.basic] = 0.0
                self.d = d_next
            self.iterations += 1
            self.note_step(float(tmin))  # dual degeneracy is theta ~ 0

    # -- vertex purification ---------------------------------------------------

    def purify(self):
        """Pivot free nonbasic structurals into the basis.

        At optimality every free nonbasic variable has zero reduced cost, so
        these pivots keep the objective while making every structural basic,
        which turns the solution into a vertex of the structural polytope.
        """
        for j in range(self.n):
            if self.vstatus[j] != NB_FREE:
                continue
            w = self.ftran(j)
            for sigma in (1.0, -1.0):
                t, r, leave_status = self.primal_step(j, sigma, w, False)
                if r >= 0:
                    self.apply_primal_pivot(j, sigma, w, t, r, leave_status)
                    break
            else:
                # both directions unblocked would mean an unbounded line in
                # the feasible set; leave the variable where it is
                continue


def solve_kernel(c, A, b, senses=None, lower=None, upper=None, *,
                 vstatus=None, feas_tol=1e-9, opt_tol=1e-9,
                 max_iter=None, purify=False):
    """Solve min c'x s.t. A x (senses) b, lower <= x <= upper.

    Parameters
    ----------
    senses : sequence of "<=", ">=", "=" per row; all "<=" when omitted.
    lower, upper : bounds per structural variable; default free.
    vstatus : warm-start token from a previous ``KernelResult``. When the
        token is primal feasible the kernel resumes with the primal method,
        when it is dual feasible it runs the dual simplex, otherwise it
        falls back to phase one.
    purify : pivot free nonbasic structurals into the basis after an
        optimal solve so the returned point is a vertex whenever the
        feasible set has one.

    Returns a KernelResult with status "optimal", "infeasible" or
    "unbounded". Raises KernelError on numerical failure.
    """
    A = _as_float_array(A, "A", 2)
    m, n = A.shape
    c = _as_float_array(c, "c", 1)
    if c.shape != (n,):
        raise ValueError("c has wrong length")
    b = _as_float_array(b, "b", 1)
    if b.shape != (m,):
        raise ValueError("b has wrong length")
    if not np.all(np.isfinite(b)):
        raise ValueError("b must be finite")
    if senses is None:
        senses = ["<="] * m
    if len(senses) != m:
        raise ValueError("senses has wrong length")
    lower = np.full(n, -np.inf) if lower is None \
        else _as_float_array(lower, "lower", 1).copy()
    upper = np.full(n, np.inf) if upper is None \
        else _as_float_array(upper, "upper", 1).copy()
    if lower.shape != (n,) or upper.shape != (n,):
        raise ValueError("bounds have wrong length")
    if max_iter is None:
        max_iter = 20000 + 50 * (n + m)

    sx = _Simplex(c, A, b, senses, lower, upper, feas_tol, opt_tol, max_iter)

    def drive():
        while True:
            if sx.infeasibility() > feas_tol * (1 + m):
                d = sx.reduced_costs(sx.cost)
                if sx.dual_feasible(d):
                    st = sx.run_dual()
                    if st != _STATUS_OPTIMAL:
                        return st
                    continue  # reached primal feasibility; confirm below
                if not sx.run_phase_one():
                    return _STATUS_INFEASIBLE
                continue
            st = sx.run_phase_two()
            if sx.infeasibility() > feas_tol * (1 + m):
                continue  # a mid-run basis repair broke feasibility
            return st

    status = None
    for fresh_start in (False, True):
        try:
            if fresh_start:
                # Rank-one updates can drift onto a numerically singular
                # basis. Restart once from the all-slack basis (always
                # factorizable) and refactorize often enough that pivot
                # eligibility is always judged from an accurate inverse.
                sx.install(sx.crash_basis())
                sx.bland = False
                sx.degen_streak = 0
                sx.refresh_every = 16
            else:
                sx.install(vstatus if vstatus is not None
                           else sx.crash_basis())
            status = drive()
            if status == _STATUS_OPTIMAL and purify:
                sx.purify()
            break
        except _RecoverableError:
            if fresh_start:
                raise

    v = sx.values()
    x = v[:n]
    y = sx.duals_for(sx.cost)
    reduced = sx.cost[:n] - (A.T @ y if m else 0.0)
    activity = A @ x if m else np.zeros(0)
    if status == _STATUS_OPTIMAL:
        obj = float(c @ x)
    elif status == _STATUS_UNBOUNDED:
        obj = -np.inf
    else:
        obj = np.nan
    return KernelResult(status=status, x=x, obj=obj, duals=y,
                        reduced=reduced, vstatus=sx.vstatus.copy(),
                        iterations=sx.iterations, row_activity=activity)


def extend_vstatus(vstatus, new_rows):
    """Extend a warm-start token after appending ``new_rows`` rows.

    Slack statuses sit at the tail of the token, so the new slacks (made
    basic) are appended after the existing entries.
    """
    vs = np.asarray(vstatus, dtype=np.int8)
    return np.concatenate([vs, np.full(new_rows, BASIC, dtype=np.int8)])
