"""Cost-vector estimation from observed solutions of linear programs.

Every experiment fixes a polytope ``{x: A_i x <= b_i}`` and contributes
noisy observations of a point that minimized an unknown common cost vector
over it.  Estimation runs in two phases:

* Phase one ("vertex projection") chooses one vertex per experiment and a
  normalized cost vector that makes every chosen vertex optimal, while
  minimizing the total deviation between observations and chosen vertices.
  It is a mixed-integer program built on optimality conditions with big-M
  complementarity, a vertex-degree constraint, and an exact linearization
  of the unit 1-norm normalization.
* Phase two projects a reference cost vector onto the set of cost vectors
  admitted by the chosen vertices — the intersection of the polyhedral
  cones spanned by the negated active rows — yielding the final estimate.

The module also provides the exact sequential decomposition: experiments
are processed one at a time, each solved alone, and a joint re-solve over
the processed prefix is triggered only when no common cost vector supports
all chosen vertices.  A prefix optimum plus a single-experiment optimum is
a valid lower bound on the joint optimum, which the re-solve exploits.

Conventions: forward problems are minimizations; admissible cones are
spanned by the negated rows active at a vertex; estimated cost vectors are
normalized to unit 1-norm.
"""

import math
from dataclasses import dataclass

import numpy as np

from .lp import (ConeGenerators, Polytope, active_set, cone_membership,
                 solve_lp)
from .milp import MilpModel, solve_milp, with_extra_row
from .qp import ConeProjection, project_to_cones
from .simplex import solve_kernel

ACTIVE_TOL = 1e-7


def _canon_norm(norm):
    if norm in (1, "1"):
        return "1"
    if norm in ("inf", np.inf, math.inf):
        return "inf"
    if norm in (2, "2"):
        raise ValueError(
            "the 2-norm deviation loss is not supported: a quadratic loss "
            "would turn the vertex-projection model into a mixed-integer "
            "quadratic program; use norm=1 (default) or norm='inf'")
    raise ValueError("norm must be 1 or 'inf'")


@dataclass
class ExperimentData:
    polytope: Polytope
    observations: np.ndarray      # (n_samples, n)

    def __post_init__(self):
        self.observations = np.atleast_2d(
            np.asarray(self.observations, dtype=float))
        if self.observations.shape[0] < 1 \
                or self.observations.shape[1] != self.polytope.n:
            raise ValueError("observation shape mismatch")

    @property
    def n_samples(self):
        return self.observations.shape[0]


@dataclass
class IopInstance:
    """Experiments plus the estimation configuration they share.

    ``reference_cost`` is the prior belief projected in phase two; the
    estimation functions use it whenever no explicit reference is passed.
    ``loss_norm`` selects the deviation norm (1 or ``"inf"``; the 2-norm
    is rejected with an explanation).  Per-coordinate bounds on the
    estimated cost go in ``cost_lower``/``cost_upper``; arbitrary extra
    linear rows ``sign_rows @ c <= sign_rhs`` are also accepted, and both
    are enforced in every phase.  ``big_m`` overrides the derived
    complementarity bound.
    """

    experiments: list
    reference_cost: np.ndarray = None
    loss_norm: object = 1
    cost_lower: np.ndarray = None  # per-coordinate bounds on the estimate
    cost_upper: np.ndarray = None
    big_m: float = None
    sign_rows: np.ndarray = None   # extra rows sign_rows @ c_hat <= sign_rhs
    sign_rhs: np.ndarray = None

    def __post_init__(self):
        if not self.experiments:
            raise ValueError("need at least one experiment")
        n = self.experiments[0].polytope.n
        if any(e.polytope.n != n for e in self.experiments):
            raise ValueError("experiments must share the decision dimension")
        self.loss_norm = _canon_norm(self.loss_norm)
        if self.reference_cost is not None:
            self.reference_cost = np.asarray(self.reference_cost,
                                             dtype=float).reshape(-1)
            if self.reference_cost.shape != (n,):
                raise ValueError("reference cost length mismatch")
            if not np.all(np.isfinite(self.reference_cost)):
                raise ValueError("reference cost must be finite")
        for name in ("cost_lower", "cost_upper"):
            v = getattr(self, name)
            if v is not None:
                v = np.broadcast_to(
                    np.asarray(v, dtype=float), (n,)).astype(float)
                setattr(self, name, v)
        if self.big_m is not None:
            self.big_m = float(self.big_m)
            if not self.big_m > 0:
                raise ValueError("big_m must be positive")
        if self.sign_rows is not None:
            self.sign_rows = np.atleast_2d(
                np.asarray(self.sign_rows, dtype=float))
            self.sign_rhs = np.atleast_1d(
                np.asarray(self.sign_rhs, dtype=float))
            if self.sign_rows.shape != (self.sign_rhs.shape[0], n):
                raise ValueError("sign constraint shape mismatch")

    @property
    def n(self):
        return self.experiments[0].polytope.n

    @property
    def n_experiments(self):
        return len(self.experiments)

    def sign_system(self):
        """Every cost-vector side constraint as rows ``R @ c <= t``.

        Collects the per-coordinate bound boxes and the explicit extra
        rows into one system; returns ``(None, None)`` when unconstrained.
        """
        n = self.n
        rows, rhs = [], []
        if self.cost_upper is not None:
            for p in np.flatnonzero(np.isfinite(self.cost_upper)):
                row = np.zeros(n)
                row[p] = 1.0
                rows.append(row)
                rhs.append(float(self.cost_upper[p]))
        if self.cost_lower is not None:
            for p in np.flatnonzero(np.isfinite(self.cost_lower)):
                row = np.zeros(n)
                row[p] = -1.0
                rows.append(row)
                rhs.append(-float(self.cost_lower[p]))
        if self.sign_rows is not None:
            rows.extend(self.sign_rows)
            rhs.extend(self.sign_rhs)
        if not rows:
            return None, None
        return np.asarray(rows, dtype=float), np.asarray(rhs, dtype=float)

    def subset(self, indices):
        return IopInstance([self.experiments[i] for i in indices],
                           reference_cost=self.reference_cost,
                           loss_norm=self.loss_norm,
                           cost_lower=self.cost_lower,
                           cost_upper=self.cost_upper,
                           big_m=self.big_m,
                           sign_rows=self.sign_rows,
                           sign_rhs=self.sign_rhs)


# ---------------------------------------------------------------------------
# losses


def point_loss(observations, point, norm=1):
    """Total deviation of the observations from one point."""
    norm = _canon_norm(norm)
    diff = np.atleast_2d(observations) - np.asarray(point, dtype=float)
    if norm == "1":
        return float(np.abs(diff).sum())
    return float(np.abs(diff).max(axis=1).sum())


def projection_loss(instance, vertices, norm=1):
    """Total deviation of all observations from the chosen vertices."""
    return sum(point_loss(e.observations, v, norm)
               for e, v in zip(instance.experiments, vertices))


def _loss_block(obs, norm, split_loss):
    """Epigraph rows for the deviation of ``obs`` from a point.

    Returns ``(n_aux, R, rhs)`` where the rows ``R`` act on the stacked
    columns ``[point (n) | aux (n_aux)]``, all with sense ``<=``, and the
    minimum of the sum of the auxiliary variables subject to them equals
    the deviation.  The 1-norm default uses one auxiliary per coordinate
    with a segment epigraph of the piecewise-linear per-coordinate sum,
    which is equivalent to splitting per sample but about a sample-count
    factor smaller; ``split_loss`` selects the per-sample splitting, and
    the max-norm always uses one auxiliary per sample.
    """
    J, n = obs.shape
    if norm == "inf":
        L = J
        R = np.zeros((2 * J * n, n + L))
        rhs = np.zeros(2 * J * n)
        r = 0
        for j in range(J):
            for p in range(n):
                R[r, p] = 1.0
                R[r, n + j] = -1.0
                rhs[r] = obs[j, p]
                r += 1
                R[r, p] = -1.0
                R[r, n + j] = -1.0
                rhs[r] = -obs[j, p]
                r += 1
        return L, R, rhs
    if split_loss:
        L = J * n
        R = np.zeros((2 * J * n, n + L))
        rhs = np.zeros(2 * J * n)
        r = 0
        for j in range(J):
            for p in range(n):
                u = n + j * n + p
                R[r, p] = 1.0
                R[r, u] = -1.0
                rhs[r] = obs[j, p]
                r += 1
                R[r, p] = -1.0
                R[r, u] = -1.0
                rhs[r] = -obs[j, p]
                r += 1
        return L, R, rhs
    # per-coordinate segment epigraph
    L = n
    R = np.zeros(((J + 1) * n, n + L))
    rhs = np.zeros((J + 1) * n)
    r = 0
    for p in range(n):
        y = np.sort(obs[:, p])
        prefix = np.concatenate([[0.0], np.cumsum(y)])
        total = prefix[-1]
        for k in range(J + 1):
            slope = 2.0 * k - J
            kk = 1 if k == 0 else k
            anchor = y[kk - 1]
            # value of the per-coordinate deviation at the anchor sample
            g = (kk * anchor - prefix[kk]) \
                + (total - prefix[kk] - (J - kk) * anchor)
            R[r, p] = slope
            R[r, n + p] = -1.0
            rhs[r] = slope * anchor - g
            r += 1
    return L, R, rhs


def _loss_values(obs, point, norm, split_loss):
    """Auxiliary-variable values matching ``_loss_block`` at ``point``."""
    diff = obs - point
    if norm == "inf":
        return np.abs(diff).max(axis=1)
    if split_loss:
        return np.abs(diff).ravel()
    return np.abs(diff).sum(axis=0)


def _experiment_loss_lp(exp, norm, split_loss):
    """Continuous relaxation: best deviation over the whole polytope.

    Returns ``(loss, point)``; the loss is a valid lower bound on the
    single-experiment phase-one optimum, and the point feeds the warm
    incumbent when it happens to be a vertex.
    """
    poly = exp.polytope
    n = poly.n
    L, R, rhs = _loss_block(exp.observations, norm, split_loss)
    A = np.zeros((poly.m + R.shape[0], n + L))
    A[:poly.m, :n] = poly.A
    A[poly.m:] = R
    b = np.concatenate([poly.b, rhs])
    lo, hi = poly.box()
    lower = np.concatenate([lo, np.zeros(L)])
    upper = np.concatenate([hi, np.full(L, np.inf)])
    c = np.concatenate([np.zeros(n), np.ones(L)])
    res = solve_kernel(c, A, b, ["<="] * A.shape[0],
                       lower=lower, upper=upper)
    if res.status != "optimal":
        raise RuntimeError(
            "continuous deviation bound failed: %s" % res.status)
    return float(res.obj), res.x[:n]


# ---------------------------------------------------------------------------
# admissible cones and the common-cost decision


@dataclass
class AdmissibleCone:
    """Per-experiment generator cones whose intersection admits the cost.

    Each element spans the cone of cost vectors under which one
    experiment's chosen vertex is optimal; a vector is admissible exactly
    when it belongs to every element.  Iterates and indexes like a list
    of :class:`ConeGenerators`.
    """

    cones: list

    def __post_init__(self):
        self.cones = [c if isinstance(c, ConeGenerators)
                      else ConeGenerators(c) for c in self.cones]

    def __len__(self):
        return len(self.cones)

    def __iter__(self):
        return iter(self.cones)

    def __getitem__(self, i):
        return self.cones[i]

    def contains(self, vector, tol=None):
        """Whether ``vector`` lies in every per-experiment cone."""
        for cone in self.cones:
            ok, _ = (cone_membership(vector, cone) if tol is None
                     else cone_membership(vector, cone, tol))
            if not ok:
                return False
        return True


def admissible_cones(instance, vertices, tol=ACTIVE_TOL):
    """Per-experiment cones of costs supported by the chosen vertices.

    Returns ``(cone, active_sets)`` where the cone is an
    :class:`AdmissibleCone` with one generator set per experiment, each
    spanned by the negated rows active at the experiment's vertex.
    """
    cones = []
    actives = []
    for exp, v in zip(instance.experiments, vertices):
        T = active_set(exp.polytope, v, tol)
        actives.append(T)
        cones.append(ConeGenerators(-exp.polytope.A[T]))
    return AdmissibleCone(cones), actives


def _pinned_signs(sign_rows, sign_rhs, n):
    """Per-coordinate sign forced by unit sign rows (+1, -1, or 0)."""
    neg = np.zeros(n, dtype=bool)
    pos = np.zeros(n, dtype=bool)
    if sign_rows is not None:
        for row, t in zip(sign_rows, sign_rhs):
            nz = np.flatnonzero(row)
            if nz.size != 1 or t > 0:
                continue
            p = int(nz[0])
            if row[p] > 0:
                neg[p] = True      # c_p <= t/row <= 0
            else:
                pos[p] = True      # c_p >= -t/|row| >= 0
    sigma = np.zeros(n, dtype=int)
    sigma[neg & ~pos] = -1
    sigma[pos & ~neg] = 1
    return sigma


def _cone_lp_arrays(cones, n):
    """Columns ``[c_hat | gamma blocks]`` tying c_hat into every cone."""
    sizes = [c.T for c in cones]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    total = n + int(offsets[-1])
    E = np.zeros((n * len(cones), total))
    for i, cone in enumerate(cones):
        r0 = n * i
        E[r0:r0 + n, :n] = np.eye(n)
        E[r0:r0 + n, n + offsets[i]:n + offsets[i + 1]] = -cone.G.T
    return E, offsets, total


def build_common_cost_model(cones, sign_rows=None, sign_rhs=None):
    """Feasibility MILP: a unit-1-norm cost in the intersection of cones.

    Columns: ``[c_hat | c_plus | c_minus | w | gamma blocks]`` with the
    exact 1-norm linearization through the binary sign pattern ``w``.
    Solve in first-feasible mode; proving infeasibility may branch over
    the full sign pattern, so prefer :func:`has_common_cost`, which picks
    a polynomial decision route whenever one is exact.
    """
    n = cones[0].n
    E, offsets, _ = _cone_lp_arrays(cones, n)
    ngam = int(offsets[-1])
    total = 4 * n + ngam

    def cols(block):
        return slice(block * n, (block + 1) * n)

    rows = []
    rhs = []
    senses = []
    # c_hat reproduced inside every cone
    cone_rows = np.zeros((E.shape[0], total))
    cone_rows[:, :n] = E[:, :n]
    cone_rows[:, 4 * n:] = E[:, n:]
    rows.append(cone_rows)
    rhs.extend([0.0] * E.shape[0])
    senses.extend(["="] * E.shape[0])
    # c_hat = c_plus - c_minus
    dec = np.zeros((n, total))
    dec[:, cols(0)] = np.eye(n)
    dec[:, cols(1)] = -np.eye(n)
    dec[:, cols(2)] = np.eye(n)
    rows.append(dec)
    rhs.extend([0.0] * n)
    senses.extend(["="] * n)
    # c_plus <= w, c_minus <= 1 - w
    up = np.zeros((n, total))
    up[:, cols(1)] = np.eye(n)
    up[:, cols(3)] = -np.eye(n)
    rows.append(up)
    rhs.extend([0.0] * n)
    senses.extend(["<="] * n)
    dn = np.zeros((n, total))
    dn[:, cols(2)] = np.eye(n)
    dn[:, cols(3)] = np.eye(n)
    rows.append(dn)
    rhs.extend([1.0] * n)
    senses.extend(["<="] * n)
    # unit 1-norm
    norm_row = np.zeros((1, total))
    norm_row[0, cols(1)] = 1.0
    norm_row[0, cols(2)] = 1.0
    rows.append(norm_row)
    rhs.append(1.0)
    senses.append("=")
    if sign_rows is not None:
        S = np.atleast_2d(np.asarray(sign_rows, dtype=float))
        sr = np.zeros((S.shape[0], total))
        sr[:, :n] = S
        rows.append(sr)
        rhs.extend(np.atleast_1d(sign_rhs).tolist())
        senses.extend(["<="] * S.shape[0])

    lower = np.concatenate([np.full(n, -1.0), np.zeros(3 * n + ngam)])
    upper = np.concatenate([np.ones(4 * n), np.full(ngam, np.inf)])
    integer = np.zeros(total, dtype=bool)
    integer[cols(3)] = True
    return MilpModel(
        c=np.zeros(total), A=np.vstack(rows), b=np.asarray(rhs),
        senses=senses, lower=lower, upper=upper, integer=integer,
        meta={"gamma_offsets": offsets})


def has_common_cost(cones, *, sign_rows=None, sign_rhs=None, witness=False):
    """Decide whether a unit-1-norm cost lies in all cones and sign rows.

    Chooses an exact polynomial route when available: a single feasibility
    linear program when the sign rows pin the sign of every coordinate
    (the 1-norm is then linear), or at most ``2n`` small linear programs
    testing the cone intersection for a nonzero point when the sign rows
    are absent or homogeneous (scaling then preserves them).  Otherwise it
    falls back to the exact feasibility MILP.

    With ``witness=True`` returns ``(ok, c_hat, gammas)`` where ``gammas``
    gives, per cone, nonnegative generator weights reproducing ``c_hat``.
    """
    cones = [c if isinstance(c, ConeGenerators) else ConeGenerators(c)
             for c in cones]
    if not cones:
        raise ValueError("need at least one cone")

    def out(ok, c=None, gam=None):
        return (ok, c, gam) if witness else ok

    if any(c.T == 0 for c in cones):
        return out(False)
    n = cones[0].n
    E, offsets, total = _cone_lp_arrays(cones, n)
    lower = np.concatenate([np.full(n, -1.0), np.zeros(total - n)])
    upper = np.full(total, np.inf)
    upper[:n] = 1.0
    rows = [E]
    rhs = [np.zeros(E.shape[0])]
    senses = ["="] * E.shape[0]
    if sign_rows is not None:
        S = np.atleast_2d(np.asarray(sign_rows, dtype=float))
        t = np.atleast_1d(np.asarray(sign_rhs, dtype=float))
        sr = np.zeros((S.shape[0], total))
        sr[:, :n] = S
        rows.append(sr)
        rhs.append(t)
        senses += ["<="] * S.shape[0]
    sigma = _pinned_signs(sign_rows, sign_rhs, n)

    def split_gammas(x):
        return [x[n + offsets[i]:n + offsets[i + 1]]
                for i in range(len(cones))]

    if sign_rows is not None and np.all(sigma != 0):
        # every coordinate's sign is pinned: the 1-norm is linear
        norm_row = np.zeros((1, total))
        norm_row[0, :n] = sigma
        orthant = np.zeros((n, total))
        orthant[:, :n] = -np.diag(sigma.astype(float))
        A = np.vstack(rows + [norm_row, orthant])
        b = np.concatenate(rhs + [np.ones(1), np.zeros(n)])
        sn = senses + ["="] + ["<="] * n
        res = solve_kernel(np.zeros(total), A, b, sn,
                           lower=lower, upper=upper)
        if res.status != "optimal":
            return out(False)
        return out(True, res.x[:n].copy(), split_gammas(res.x))

    if sign_rows is None or np.all(np.asarray(sign_rhs) == 0.0):
        # scale-invariant constraints: search for any nonzero point
        A = np.vstack(rows)
        b = np.concatenate(rhs)
        for p in range(n):
            for sgn in (1.0, -1.0):
                if sigma[p] * sgn < 0:
                    continue
                c = np.zeros(total)
                c[p] = -sgn
                res = solve_kernel(c, A, b, senses,
                                   lower=lower, upper=upper)
                if res.status == "optimal" and -res.obj > 1e-7:
                    scale = float(np.abs(res.x[:n]).sum())
                    x = res.x / scale
                    return out(True, x[:n].copy(), split_gammas(x))
        return out(False)

    model = build_common_cost_model(cones, sign_rows, sign_rhs)
    sol = solve_milp(model, mode="first_feasible")
    if sol.status != "feasible":
        return out(False)
    goff = model.meta["gamma_offsets"]
    gammas = [sol.x[4 * n + goff[i]:4 * n + goff[i + 1]]
              for i in range(len(cones))]
    return out(True, sol.x[:n].copy(), gammas)


# ---------------------------------------------------------------------------
# phase-one model


@dataclass
class ProjectionLayout:
    n: int
    c_hat: slice
    c_plus: slice
    c_minus: slice
    w: slice
    x: list
    s: list
    lam: list
    z: list
    loss: list
    total: int
    big_m: float
    slack_upper: list       # per-experiment row-wise slack caps
    norm: str
    split_loss: bool


def _default_big_m(instance):
    scale = 1.0
    for exp in instance.experiments:
        poly = exp.polytope
        scale = max(scale,
                    float(np.max(np.abs(poly.b), initial=0.0)),
                    float(np.max(np.linalg.norm(poly.A, axis=1),
                                 initial=0.0)))
    return 1e4 * scale


def _slack_caps(poly, big_m):
    """Valid per-row caps on the polytope slack, from bound propagation.

    Rows of equality pairs get cap zero; rows without a finite propagated
    bound fall back to the big-M value (those remain subject to audit).
    """
    lo, hi = poly.box()
    A = poly.A
    contrib = np.where(A > 0, A * lo[None, :],
                       np.where(A < 0, A * hi[None, :], 0.0))
    smax = poly.b - contrib.sum(axis=1)
    smax = np.where(np.isfinite(smax), np.maximum(smax, 0.0), np.inf)
    for k, k2 in poly.equality_pairs:
        smax[k] = 0.0
        smax[k2] = 0.0
    return np.minimum(smax, big_m)


def build_projection_model(instance, *, norm=None, split_loss=False,
                           big_m=None):
    """Phase-one MILP over all experiments; returns (model, layout).

    ``norm`` and ``big_m`` default to the instance's configuration.
    Exactness-preserving strengthenings applied: binaries of always-active
    equality-pair rows are fixed on, slack complementarities use proven
    per-row caps where bound propagation yields one, and coordinates whose
    sign is pinned by a unit sign row have their sign binary fixed.
    """
    norm = instance.loss_norm if norm is None else _canon_norm(norm)
    n = instance.n
    if big_m is None:
        big_m = instance.big_m
    M = big_m if big_m is not None else _default_big_m(instance)
    sign_rows, sign_rhs = instance.sign_system()

    # column layout
    c_hat = slice(0, n)
    c_plus = slice(n, 2 * n)
    c_minus = slice(2 * n, 3 * n)
    w = slice(3 * n, 4 * n)
    col = 4 * n
    xs, ss, ls, zs, us = [], [], [], [], []
    blocks = []
    for exp in instance.experiments:
        m = exp.polytope.m
        L, R, lrhs = _loss_block(exp.observations, norm, split_loss)
        xs.append(slice(col, col + n))
        col += n
        ss.append(slice(col, col + m))
        col += m
        ls.append(slice(col, col + m))
        col += m
        zs.append(slice(col, col + m))
        col += m
        us.append(slice(col, col + L))
        col += L
        blocks.append((L, R, lrhs))
    total = col

    n_rows = 3 * n + 1 + (0 if sign_rows is None else sign_rows.shape[0])
    for exp, (L, R, _) in zip(instance.experiments, blocks):
        n_rows += n + 3 * exp.polytope.m + 1 + R.shape[0]
    A = np.zeros((n_rows, total))
    b = np.zeros(n_rows)
    senses = []
    slack_caps = []
    r = 0
    eye_n = np.eye(n)
    for i, exp in enumerate(instance.experiments):
        poly = exp.polytope
        m = poly.m
        caps = _slack_caps(poly, M)
        slack_caps.append(caps)
        # stationarity: c_hat + A' lam = 0
        A[r:r + n, c_hat] = eye_n
        A[r:r + n, ls[i]] = poly.A.T
        senses += ["="] * n
        r += n
        # primal feasibility with explicit slack
        A[r:r + m, xs[i]] = poly.A
        A[r:r + m, ss[i]] = np.eye(m)
        b[r:r + m] = poly.b
        senses += ["="] * m
        r += m
        # lam <= M z
        A[r:r + m, ls[i]] = np.eye(m)
        A[r:r + m, zs[i]] = -M * np.eye(m)
        senses += ["<="] * m
        r += m
        # s <= cap (1 - z)
        A[r:r + m, ss[i]] = np.eye(m)
        A[r:r + m, zs[i]] = np.diag(caps)
        b[r:r + m] = caps
        senses += ["<="] * m
        r += m
        # vertex condition: at least n rows flagged active per experiment.
        # Both rows of an equality pair count as distinct flags, so on
        # polytopes with equality rows the count can be met on a face of
        # positive dimension; callers relying on strict vertex solutions
        # should avoid paired rows or expect face-interior projections.
        A[r, zs[i]] = 1.0
        b[r] = float(n)
        senses.append(">=")
        r += 1
        # loss epigraph
        L, R, lrhs = blocks[i]
        A[r:r + R.shape[0], xs[i]] = R[:, :n]
        A[r:r + R.shape[0], us[i]] = R[:, n:]
        b[r:r + R.shape[0]] = lrhs
        senses += ["<="] * R.shape[0]
        r += R.shape[0]
    # c_hat = c_plus - c_minus
    A[r:r + n, c_hat] = eye_n
    A[r:r + n, c_plus] = -eye_n
    A[r:r + n, c_minus] = eye_n
    senses += ["="] * n
    r += n
    # c_plus <= w ; c_minus <= 1 - w
    A[r:r + n, c_plus] = eye_n
    A[r:r + n, w] = -eye_n
    senses += ["<="] * n
    r += n
    A[r:r + n, c_minus] = eye_n
    A[r:r + n, w] = eye_n
    b[r:r + n] = 1.0
    senses += ["<="] * n
    r += n
    # unit 1-norm
    A[r, c_plus] = 1.0
    A[r, c_minus] = 1.0
    b[r] = 1.0
    senses.append("=")
    r += 1
    if sign_rows is not None:
        k = sign_rows.shape[0]
        A[r:r + k, c_hat] = sign_rows
        b[r:r + k] = sign_rhs
        senses += ["<="] * k
        r += k

    lower = np.full(total, -np.inf)
    upper = np.full(total, np.inf)
    lower[c_hat] = -1.0
    upper[c_hat] = 1.0
    lower[c_plus] = 0.0
    upper[c_plus] = 1.0
    lower[c_minus] = 0.0
    upper[c_minus] = 1.0
    lower[w] = 0.0
    upper[w] = 1.0
    integer = np.zeros(total, dtype=bool)
    integer[w] = True
    for i, exp in enumerate(instance.experiments):
        poly = exp.polytope
        lo, hi = poly.box()
        lower[xs[i]] = lo
        upper[xs[i]] = hi
        lower[ss[i]] = 0.0
        upper[ss[i]] = slack_caps[i]
        lower[ls[i]] = 0.0
        upper[ls[i]] = M
        lower[zs[i]] = 0.0
        upper[zs[i]] = 1.0
        integer[zs[i]] = True
        lower[us[i]] = 0.0
        for k, k2 in poly.equality_pairs:
            # both rows of an equality pair are active everywhere
            lower[zs[i].start + k] = 1.0
            lower[zs[i].start + k2] = 1.0
    sigma = _pinned_signs(sign_rows, sign_rhs, n)
    for p in range(n):
        if sigma[p] < 0:
            upper[w.start + p] = 0.0
            upper[c_plus.start + p] = 0.0
            upper[c_hat.start + p] = 0.0
        elif sigma[p] > 0:
            lower[w.start + p] = 1.0
            upper[c_minus.start + p] = 0.0
            lower[c_hat.start + p] = 0.0

    objective = np.zeros(total)
    for sl in us:
        objective[sl] = 1.0
    model = MilpModel(c=objective, A=A, b=b, senses=senses, lower=lower,
                      upper=upper, integer=integer)
    layout = ProjectionLayout(
        n=n, c_hat=c_hat, c_plus=c_plus, c_minus=c_minus, w=w,
        x=xs, s=ss, lam=ls, z=zs, loss=us, total=total, big_m=M,
        slack_upper=slack_caps, norm=norm, split_loss=split_loss)
    return model, layout


def add_projection_cut(model, layout, active_sets):
    """Exclude every phase-one solution reproducing these active sets.

    The cut bounds the number of activity binaries marked inside the
    listed per-experiment active sets; any solution whose chosen vertices
    have the same geometric active sets must mark at least the dimension
    per experiment inside them, so it is removed, while solutions whose
    vertices differ in at least one active row survive.
    """
    row = np.zeros(layout.total)
    for sl, T in zip(layout.z, active_sets):
        row[np.asarray(T, dtype=int) + sl.start] = 1.0
    rhs = float(layout.n * len(active_sets)) - 1.0
    return with_extra_row(model, row, rhs, "<=")


# ---------------------------------------------------------------------------
# phase-one solving


@dataclass
class VertexProjection:
    status: str
    vertices: list
    active_sets: list
    cones: AdmissibleCone
    loss: float                  # exact total deviation of the solution
    losses: list                 # per-experiment deviations
    milp_objective: float
    cost_witness: np.ndarray     # a feasible normalized cost, or None
    solution: np.ndarray
    model: MilpModel
    layout: ProjectionLayout
    nodes: int
    big_m: float
    escalations: int
    audit_clean: bool
    lp_lower_bound: float        # sum of continuous per-experiment bounds


def _cost_multipliers(poly, T, c_hat):
    """Nonnegative multipliers on rows ``T`` with c_hat + A' lam = 0."""
    T = np.asarray(T, dtype=int)
    if T.size == 0:
        return None
    At = poly.A[T].T               # n x |T|
    res = solve_kernel(np.zeros(T.size), At, -np.asarray(c_hat),
                       ["="] * poly.n, lower=np.zeros(T.size),
                       upper=np.full(T.size, np.inf))
    if res.status != "optimal":
        return None
    lam = np.zeros(poly.m)
    lam[T] = res.x
    return lam


def _assemble_incumbent(instance, layout, vertices, c_hat, lams):
    """Full phase-one variable vector from vertices and a supporting cost.

    Returns None when the pieces do not form a feasible assignment (for
    example a chosen point with fewer active rows than the dimension).
    """
    n = layout.n
    scale = float(np.abs(c_hat).sum())
    if scale <= 0:
        return None
    c_hat = np.asarray(c_hat, dtype=float) / scale
    vec = np.zeros(layout.total)
    vec[layout.c_hat] = c_hat
    vec[layout.c_plus] = np.maximum(c_hat, 0.0)
    vec[layout.c_minus] = np.maximum(-c_hat, 0.0)
    vec[layout.w] = (c_hat > 0).astype(float)
    for i, (exp, v) in enumerate(zip(instance.experiments, vertices)):
        poly = exp.polytope
        T = active_set(poly, v)
        if T.size < layout.n:
            return None
        lam = np.asarray(lams[i], dtype=float) / scale
        if np.any(lam < -1e-9):
            return None
        lam = np.maximum(lam, 0.0)
        mask = np.zeros(poly.m, dtype=bool)
        mask[T] = True
        if np.any(lam[~mask] > 1e-9):
            return None
        lam[~mask] = 0.0
        if np.max(np.abs(c_hat + poly.A.T @ lam)) > 2e-6:
            return None
        vec[layout.x[i]] = v
        vec[layout.s[i]] = np.maximum(poly.b - poly.A @ v, 0.0)
        vec[layout.lam[i]] = lam
        z = np.zeros(poly.m)
        z[T] = 1.0
        vec[layout.z[i]] = z
        vec[layout.loss[i]] = _loss_values(
            exp.observations, v, layout.norm, layout.split_loss)
    return vec


def _extract_solution(vec, layout, instance):
    vertices = [vec[sl].copy() for sl in layout.x]
    cones, actives = admissible_cones(instance, vertices)
    c_hat = vec[layout.c_hat].copy()
    losses = [point_loss(e.observations, v, layout.norm)
              for e, v in zip(instance.experiments, vertices)]
    return vertices, actives, cones, c_hat, losses


def _audit_big_m(vec, layout):
    """True when no activity multiplier or slack presses its big-M cap."""
    for i in range(len(layout.x)):
        lam = vec[layout.lam[i]]
        if lam.size and np.max(lam) >= 0.99 * layout.big_m:
            return False
        s = vec[layout.s[i]]
        unproven = layout.slack_upper[i] >= layout.big_m
        if np.any(s[unproven] >= 0.99 * layout.big_m):
            return False
    return True


def solve_projection(instance, *, norm=None, split_loss=False, big_m=None,
                     warm_vertices=None, warm_cost=None, lower_bound=0.0,
                     node_limit=100_000, time_limit=None, audit=True):
    """Solve phase one: loss-minimal vertices with a common cost vector.

    A continuous per-experiment relaxation supplies a lower bound and, at
    low noise, a warm incumbent (the relaxed points are then vertices and
    a common cost exists, which closes the search immediately for exact
    data).  ``warm_vertices``/``warm_cost`` seed an incumbent instead, as
    the sequential engine does with its prefix solution.  After solving,
    solutions pressing the big-M caps trigger up to three re-solves with
    the cap raised tenfold each time.
    """
    norm = instance.loss_norm if norm is None else _canon_norm(norm)
    lp_bound = 0.0
    snaps = []
    for exp in instance.experiments:
        loss_i, point = _experiment_loss_lp(exp, norm, split_loss)
        lp_bound += loss_i
        snaps.append(point)
    bound = max(0.0, float(lower_bound),
                lp_bound - 1e-7 * (1.0 + abs(lp_bound)))

    def candidates():
        out = []
        if warm_vertices is not None:
            out.append((list(warm_vertices), warm_cost))
        out.append((snaps, None))
        return out

    if big_m is None:
        big_m = instance.big_m
    big_m_val = big_m if big_m is not None else _default_big_m(instance)
    escalations = 0
    carried = None
    while True:
        model, layout = build_projection_model(
            instance, norm=norm, split_loss=split_loss, big_m=big_m_val)
        model.obj_lower_bound = bound
        incumbent = None
        cand = ([carried] if carried is not None else []) + candidates()
        for verts, chat in cand:
            incumbent = _incumbent_from(instance, layout, verts, chat)
            if incumbent is not None:
                break
        sol = solve_milp(model, incumbent=incumbent,
                         node_limit=node_limit, time_limit=time_limit)
        if sol.status not in ("optimal", "incumbent_only"):
            default_m = _default_big_m(instance)
            if sol.status == "infeasible" and big_m_val < default_m:
                # a cap below the derived scale can cut off every solution
                # outright, and a barely feasible cap would silently
                # truncate others, so recover at the derived scale
                escalations += 1
                big_m_val = max(default_m, big_m_val * 10.0)
                continue
            return VertexProjection(
                status=sol.status, vertices=[], active_sets=[],
                cones=AdmissibleCone([]), loss=np.inf, losses=[],
                milp_objective=np.inf, cost_witness=None, solution=None,
                model=model, layout=layout, nodes=sol.nodes,
                big_m=big_m_val, escalations=escalations, audit_clean=True,
                lp_lower_bound=lp_bound)
        verts, actives, cones, chat, losses = _extract_solution(
            sol.x, layout, instance)
        clean = _audit_big_m(sol.x, layout) if audit else True
        if clean or escalations >= 3 or sol.status != "optimal":
            break
        escalations += 1
        big_m_val *= 10.0
        carried = (verts, chat)
    return VertexProjection(
        status=sol.status, vertices=verts, active_sets=actives,
        cones=cones, loss=float(sum(losses)), losses=losses,
        milp_objective=sol.objective, cost_witness=chat, solution=sol.x,
        model=model, layout=layout, nodes=sol.nodes, big_m=big_m_val,
        escalations=escalations, audit_clean=clean, lp_lower_bound=lp_bound)


def _incumbent_from(instance, layout, vertices, c_hat):
    """Incumbent vector from candidate vertices, finding a cost if needed."""
    cones, actives = admissible_cones(instance, vertices)
    if any(T.size < layout.n for T in actives):
        return None
    srows, srhs = instance.sign_system()
    if c_hat is None:
        ok, c_hat, gammas = has_common_cost(
            cones, sign_rows=srows, sign_rhs=srhs, witness=True)
        if not ok:
            return None
        lams = []
        for exp, T, gam in zip(instance.experiments, actives, gammas):
            lam = np.zeros(exp.polytope.m)
            lam[T] = gam            # c = sum gam * (-a_t)  =>  c + A' lam = 0
            lams.append(lam)
    else:
        lams = []
        for exp, T in zip(instance.experiments, actives):
            lam = _cost_multipliers(exp.polytope, T, c_hat)
            if lam is None:
                return None
            lams.append(lam)
    return _assemble_incumbent(instance, layout, vertices, c_hat, lams)


# ---------------------------------------------------------------------------
# two-phase estimation


@dataclass
class TiedSolution:
    vertices: list
    active_sets: list
    cones: AdmissibleCone
    loss: float
    projection: ConeProjection = None


@dataclass
class CostEstimate:
    """Final estimate with its loss-tied alternatives and provenance.

    ``trivial`` marks estimates equal to the zero vector, which is always
    admissible; it appears when the side constraints leave no nonzero
    admissible cost (the deviation-minimal vertices then do not exist and
    ``loss`` is infinite) or when the reference projects onto the cone
    intersection at the origin.  Either way the reference carries no
    usable direction information, and ``distance`` is its full norm.
    ``tied_costs`` lists every estimate achieving the best distance, in
    discovery order; ``chosen`` indexes the winner within ``solutions``.
    """

    status: str
    cost: np.ndarray
    distance: float              # Euclidean distance to the reference
    loss: float
    solutions: list
    chosen: int
    tied_costs: list
    trivial: bool
    unique_solution: bool
    enumeration_truncated: bool
    phase1: VertexProjection

    @property
    def squared_distance(self):
        return self.distance ** 2

    @property
    def admissible_cone(self):
        if 0 <= self.chosen < len(self.solutions):
            return self.solutions[self.chosen].cones
        return None


def _resolve_reference(instance, reference_cost):
    if reference_cost is None:
        reference_cost = instance.reference_cost
    if reference_cost is None:
        raise ValueError("no reference cost: pass one explicitly or set "
                         "instance.reference_cost")
    return np.asarray(reference_cost, dtype=float)


def _trivial_estimate(instance, reference_cost, proj, status="trivial"):
    """Zero-vector estimate used when no nonzero cost is admissible."""
    zero = np.zeros(instance.n)
    return CostEstimate(status, zero,
                        float(np.linalg.norm(reference_cost)),
                        np.inf if proj is None else proj.loss,
                        [], -1, [zero], True, True, False, proj)


def two_phase_estimate(instance, reference_cost=None, *, norm=None,
                       split_loss=False, enumerate_solutions=True,
                       max_solutions=20, tie_tol=1e-9, big_m=None,
                       node_limit=100_000, time_limit=None, qp_starts=3,
                       qp_seed=0):
    """Full estimation: phase one, optional tie enumeration, projection.

    When ``enumerate_solutions`` is on, exclusion cuts recover every
    loss-tied phase-one solution (up to ``max_solutions``) by probing the
    cut model for any solution within ``tie_tol`` of the optimum; each
    tied solution is projected and the closest to the reference wins,
    with every equally close estimate listed in ``tied_costs``.  Side
    constraints that exclude all nonzero costs yield the flagged trivial
    zero estimate rather than an error.
    """
    reference_cost = _resolve_reference(instance, reference_cost)
    srows, srhs = instance.sign_system()
    proj = solve_projection(instance, norm=norm, split_loss=split_loss,
                            big_m=big_m, node_limit=node_limit,
                            time_limit=time_limit)
    if proj.status == "infeasible":
        return _trivial_estimate(instance, reference_cost, proj)
    if proj.status not in ("optimal", "incumbent_only"):
        return CostEstimate(proj.status, None, np.inf, np.inf, [], -1,
                            [], False, False, False, proj)
    sols = [TiedSolution(proj.vertices, proj.active_sets, proj.cones,
                         proj.loss)]
    truncated = proj.status != "optimal"
    if enumerate_solutions and proj.status == "optimal":
        model = proj.model
        actives = proj.active_sets
        cutoff = proj.milp_objective + tie_tol * (1 + abs(proj.milp_objective))
        while len(sols) < max_solutions:
            model = add_projection_cut(model, proj.layout, actives)
            probe = solve_milp(model, mode="first_feasible", cutoff=cutoff,
                               node_limit=node_limit, time_limit=time_limit)
            if probe.status != "feasible":
                truncated = truncated or probe.status not in ("infeasible",)
                break
            verts, actives, cones, _, losses = _extract_solution(
                probe.x, proj.layout, instance)
            sols.append(TiedSolution(verts, actives, cones,
                                     float(sum(losses))))
        else:
            truncated = True
    best = -1
    for k, s in enumerate(sols):
        s.projection = project_to_cones(
            reference_cost, s.cones, sign_rows=srows, sign_rhs=srhs,
            n_starts=qp_starts, seed=qp_seed)
        if s.projection.status != "optimal":
            continue
        if best < 0 or s.projection.distance \
                < sols[best].projection.distance - 1e-12:
            best = k
    if best < 0:
        return CostEstimate("projection_failed", None, np.inf, proj.loss,
                            sols, -1, [], False,
                            len(sols) == 1 and not truncated,
                            truncated, proj)
    win = sols[best].projection
    tie_cut = win.distance + 1e-9 * (1.0 + win.distance)
    tied_costs = [s.projection.cost for s in sols
                  if s.projection is not None
                  and s.projection.status == "optimal"
                  and s.projection.distance <= tie_cut]
    trivial = bool(np.max(np.abs(win.cost), initial=0.0) <= 1e-9)
    return CostEstimate("optimal" if proj.status == "optimal"
                        else proj.status,
                        win.cost, win.distance, proj.loss, sols, best,
                        tied_costs, trivial,
                        len(sols) == 1 and not truncated, truncated, proj)


# ---------------------------------------------------------------------------
# sequential decomposition and online updating


@dataclass
class StepRecord:
    index: int
    solo_loss: float
    fp_feasible: bool
    resolved: bool
    prefix_loss_before: float
    prefix_loss_after: float
    joint_loss: float = None
    multiplicity_unchecked: bool = False
    estimate_cost: np.ndarray = None
    estimate_distance: float = None


@dataclass
class RunRecord:
    """Outcome of a sequential run over an experiment stream.

    ``status`` is ``"optimal"`` when every experiment was processed to
    proven optimality, ``"partial"`` when a solver budget ran out
    mid-sequence (the estimate then reflects the experiments processed so
    far and ``partial`` is set), and ``"trivial"`` when the side
    constraints admit no nonzero cost (flagged zero estimate).
    """

    status: str
    steps: list
    vertices: list
    cones: AdmissibleCone
    final_cost: np.ndarray
    final_distance: float
    final_loss: float
    total_resolves: int
    partial: bool = False
    trivial: bool = False


def _finish_run(instance, reference_cost, cones, steps, vertices,
                prefix_loss, resolves, srows, srhs, qp_starts, qp_seed,
                partial=False):
    """Project the reference onto the accumulated cones and wrap up."""
    status = "partial" if partial else "optimal"
    if len(cones) == 0:
        return RunRecord(status if partial else "projection_failed",
                         steps, vertices, AdmissibleCone([]), None,
                         np.inf, prefix_loss, resolves, partial=partial)
    final = project_to_cones(reference_cost, cones, sign_rows=srows,
                             sign_rhs=srhs, n_starts=qp_starts,
                             seed=qp_seed)
    if final.status == "infeasible":
        return RunRecord("trivial", steps, vertices, AdmissibleCone(cones),
                         np.zeros(instance.n),
                         float(np.linalg.norm(reference_cost)),
                         prefix_loss, resolves, partial=partial,
                         trivial=True)
    if final.status != "optimal":
        return RunRecord("projection_failed", steps, vertices,
                         AdmissibleCone(cones), None, np.inf, prefix_loss,
                         resolves, partial=partial)
    trivial = bool(np.max(np.abs(final.cost), initial=0.0) <= 1e-9)
    return RunRecord(status, steps, vertices, AdmissibleCone(cones),
                     final.cost, final.distance, prefix_loss, resolves,
                     partial=partial, trivial=trivial)


def _sequential_engine(instance, reference_cost, *, norm, split_loss,
                       big_m, node_limit, time_limit, project_each_step,
                       qp_starts, qp_seed):
    reference_cost = _resolve_reference(instance, reference_cost)
    srows, srhs = instance.sign_system()
    vertices, actives, cones = [], [], []
    witness = None
    prefix_loss = 0.0
    steps = []
    resolves = 0
    for idx in range(instance.n_experiments):
        exp = instance.experiments[idx]
        solo = solve_projection(instance.subset([idx]), norm=norm,
                                split_loss=split_loss, big_m=big_m,
                                node_limit=node_limit,
                                time_limit=time_limit)
        if solo.status == "infeasible":
            # no nonzero cost satisfies the side constraints on any vertex
            return RunRecord("trivial", steps, vertices,
                             AdmissibleCone(cones), np.zeros(instance.n),
                             float(np.linalg.norm(reference_cost)),
                             prefix_loss, resolves, trivial=True)
        if solo.status != "optimal":
            # budget ran out: report the estimate for the processed prefix
            return _finish_run(instance, reference_cost, cones, steps,
                               vertices, prefix_loss, resolves, srows,
                               srhs, qp_starts, qp_seed, partial=True)
        trial = cones + [solo.cones[0]]
        ok, c_w, _ = has_common_cost(trial, sign_rows=srows,
                                     sign_rhs=srhs, witness=True)
        before = prefix_loss
        if ok:
            vertices.append(solo.vertices[0])
            actives.append(solo.active_sets[0])
            cones = trial
            witness = c_w
            prefix_loss += solo.loss
            rec = StepRecord(idx, solo.loss, True, False, before,
                             prefix_loss)
        else:
            warm = None
            if witness is not None:
                fwd = solve_lp(exp.polytope, witness)
                warm = vertices + [fwd.x]
            joint = solve_projection(
                instance.subset(range(idx + 1)), norm=norm,
                split_loss=split_loss, big_m=big_m, warm_vertices=warm,
                warm_cost=witness, lower_bound=prefix_loss + solo.loss,
                node_limit=node_limit, time_limit=time_limit)
            if joint.status not in ("optimal", "incumbent_only"):
                return _finish_run(instance, reference_cost, cones, steps,
                                   vertices, prefix_loss, resolves, srows,
                                   srhs, qp_starts, qp_seed, partial=True)
            vertices = list(joint.vertices)
            actives = list(joint.active_sets)
            cones = list(joint.cones)
            witness = joint.cost_witness
            prefix_loss = joint.loss
            resolves += 1
            rec = StepRecord(idx, solo.loss, False, True, before,
                             prefix_loss, joint_loss=joint.loss,
                             multiplicity_unchecked=True)
            if joint.status == "incumbent_only":
                # unproven prefix: stop and report what the budget allowed
                steps.append(rec)
                return _finish_run(instance, reference_cost, cones, steps,
                                   vertices, prefix_loss, resolves, srows,
                                   srhs, qp_starts, qp_seed, partial=True)
        if project_each_step:
            proj = project_to_cones(reference_cost, cones,
                                    sign_rows=srows, sign_rhs=srhs,
                                    n_starts=qp_starts, seed=qp_seed)
            if proj.status == "optimal":
                rec.estimate_cost = proj.cost
                rec.estimate_distance = proj.distance
        steps.append(rec)
    return _finish_run(instance, reference_cost, cones, steps, vertices,
                       prefix_loss, resolves, srows, srhs, qp_starts,
                       qp_seed)


def sequential_estimate(instance, reference_cost=None, *, norm=None,
                        split_loss=False, big_m=None, node_limit=100_000,
                        time_limit=None, qp_starts=3, qp_seed=0):
    """Exact estimation processing experiments one at a time.

    Each experiment is first solved alone; a joint re-solve over the
    prefix runs only when no common cost vector supports all chosen
    vertices, warm-started from the prefix solution plus the vertex the
    prefix cost picks for the new experiment, and lower-bounded by the
    prefix optimum plus the single-experiment optimum.  Tie enumeration
    is not performed here, so alternate loss-tied vertex selections go
    undetected; re-solve steps are marked ``multiplicity_unchecked``.
    Budget exhaustion mid-sequence yields a flagged partial estimate
    over the experiments processed so far rather than an error.
    """
    return _sequential_engine(instance, reference_cost, norm=norm,
                              split_loss=split_loss, big_m=big_m,
                              node_limit=node_limit, time_limit=time_limit,
                              project_each_step=False, qp_starts=qp_starts,
                              qp_seed=qp_seed)


def online_estimate(instance, reference_cost=None, *, norm=None,
                    split_loss=False, big_m=None, node_limit=100_000,
                    time_limit=None, qp_starts=3, qp_seed=0):
    """Sequential estimation that re-projects after every experiment.

    Identical to :func:`sequential_estimate` except that each step record
    carries the cost estimate available at that point, supporting
    learning-curve and experiment-selection studies.
    """
    return _sequential_engine(instance, reference_cost, norm=norm,
                              split_loss=split_loss, big_m=big_m,
                              node_limit=node_limit, time_limit=time_limit,
                              project_each_step=True, qp_starts=qp_starts,
                              qp_seed=qp_seed)


# ---------------------------------------------------------------------------
# optional preprocessing


def trim_outliers(observations, k=5.0):
    """Drop samples deviating beyond ``k`` robust spreads per coordinate.

    A sample is kept when, in every coordinate with a positive median
    absolute deviation, it lies within ``k`` of those deviations from the
    coordinate median.  This is an opt-in preprocessing hook: estimation
    never trims by itself, and fewer than three samples (or bands that
    would drop everything) pass through unchanged.
    """
    obs = np.atleast_2d(np.asarray(observations, dtype=float))
    if obs.shape[0] < 3:
        return obs.copy()
    med = np.median(obs, axis=0)
    mad = np.median(np.abs(obs - med), axis=0)
    keep = np.ones(obs.shape[0], dtype=bool)
    for p in range(obs.shape[1]):
        if mad[p] > 0:
            keep &= np.abs(obs[:, p] - med[p]) <= k * mad[p]
    if not np.any(keep):
        return obs.copy()
    return obs[keep]
