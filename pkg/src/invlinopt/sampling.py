"""Adaptive experiment selection by guaranteed admissible-set shrinkage.

After some experiments, the costs still admissible form an intersection
of cones.  A candidate experiment (a fresh constraint system, solved under
a cost probed from the admissible set) is scored by how much it is
GUARANTEED to cut from that set: the largest 1-norm distance between any
bounded conic combination of the current generators and the cone the
candidate would contribute.  A zero score means the candidate's cone
already contains everything tracked, so running it cannot shrink the
admissible set; a positive score certifies a strict cut.  Selection draws
several candidates from a parameter space, scores each, and keeps the
best; drawing a single candidate degenerates to random selection.

The score's inner problem — maximize over the image of a coefficient box,
minimize over the candidate cone — is solved exactly.  The maximum of a
convex function over a box sits at a box vertex, so small generator
counts enumerate the ``2^T`` vertices directly; larger counts switch to
an equivalent mixed-integer reformulation obtained by dualizing the inner
distance (the 1-norm distance to a cone equals the best bounded linear
functional that is nonpositive on the cone), which needs one binary per
generator instead of a full vertex sweep.  Both routes return the same
value and are cross-checked in the tests.
"""

from dataclasses import dataclass, field

import itertools

import numpy as np

from .iop import has_common_cost
from .lp import (ConeGenerators, Polytope, cone_membership,
                 min_distance_to_cone, solve_lp)
from .milp import MilpModel, solve_milp
from .simplex import KernelError

# Above this many current-cone generators the score switches from vertex
# enumeration to the dual mixed-integer route (identical value, far fewer
# subproblems).
_ENUMERATE_MAX = 6


# ---------------------------------------------------------------------------
# candidate parameter space


@dataclass
class ParameterSpace:
    """Family of candidate constraint systems around a template.

    Entries of ``A`` and ``b`` flagged in ``a_mask``/``b_mask`` are drawn
    uniformly from the corresponding ``[lower, upper]`` ranges; all other
    entries stay at the template's values.  Rows tied as equality pairs in
    the template are kept consistent automatically: after a draw, each
    pair's second row is reset to the negation of its first, so flagging
    entries of the first row varies the equality as a whole.

    Draws that fail to produce a compact, nonempty polytope are rejected
    and retried up to ``max_retries`` times; running out raises.
    """

    template: Polytope
    a_mask: np.ndarray = None
    a_lower: np.ndarray = None
    a_upper: np.ndarray = None
    b_mask: np.ndarray = None
    b_lower: np.ndarray = None
    b_upper: np.ndarray = None
    max_retries: int = 50

    def __post_init__(self):
        m, n = self.template.m, self.template.n
        self.a_mask = self._mask(self.a_mask, (m, n))
        self.b_mask = self._mask(self.b_mask, (m,))
        self.a_lower, self.a_upper = self._ranges(
            "a", self.a_mask, self.a_lower, self.a_upper, (m, n))
        self.b_lower, self.b_upper = self._ranges(
            "b", self.b_mask, self.b_lower, self.b_upper, (m,))
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")
        if not self.a_mask.any() and not self.b_mask.any():
            raise ValueError("no entry is flagged as variable")

    @staticmethod
    def _mask(mask, shape):
        if mask is None:
            return np.zeros(shape, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != shape:
            raise ValueError("mask shape mismatch")
        return mask

    @staticmethod
    def _ranges(name, mask, lower, upper, shape):
        if not mask.any():
            return (np.zeros(shape), np.zeros(shape))
        if lower is None or upper is None:
            raise ValueError("%s_mask set but %s ranges missing"
                             % (name, name))
        lower = np.broadcast_to(np.asarray(lower, dtype=float),
                                shape).astype(float)
        upper = np.broadcast_to(np.asarray(upper, dtype=float),
                                shape).astype(float)
        bad = mask & ~(np.isfinite(lower) & np.isfinite(upper)
                       & (lower <= upper))
        if bad.any():
            raise ValueError("%s ranges must be finite with lower <= upper "
                             "on every flagged entry" % name)
        return lower, upper

    def sample(self, rng):
        """One valid polytope drawn from the space, or ValueError."""
        rng = np.random.default_rng(rng)
        tpl = self.template
        for _ in range(self.max_retries):
            A = tpl.A.copy()
            b = tpl.b.copy()
            if self.a_mask.any():
                A[self.a_mask] = rng.uniform(self.a_lower[self.a_mask],
                                             self.a_upper[self.a_mask])
            if self.b_mask.any():
                b[self.b_mask] = rng.uniform(self.b_lower[self.b_mask],
                                             self.b_upper[self.b_mask])
            for k, k2 in tpl.equality_pairs:
                A[k2] = -A[k]
                b[k2] = -b[k]
            try:
                poly = Polytope(A, b, equality_pairs=list(tpl.equality_pairs))
                solve_lp(poly, np.zeros(tpl.n))   # nonempty check
            except (ValueError, KernelError):
                continue
            return poly
        raise ValueError("no compact nonempty polytope within %d draws; "
                         "check the space's ranges" % self.max_retries)


@dataclass
class ExperimentCandidate:
    """A sampled constraint system with its predicted outcome and score.

    ``active_flags[k]`` is True exactly for the rows active at the
    candidate's optimum under the probe cost; the cone those rows span is
    what the score measures against.
    """

    poly: Polytope
    active_flags: np.ndarray
    score: float = None
    probe_cost: np.ndarray = None

    def __post_init__(self):
        self.active_flags = np.asarray(self.active_flags, dtype=bool)
        if self.active_flags.shape != (self.poly.m,):
            raise ValueError("active flags length mismatch")

    def cone(self):
        """Cone the candidate would contribute (negated active rows)."""
        return ConeGenerators(-self.poly.A[self.active_flags])


# ---------------------------------------------------------------------------
# probe costs and predicted outcomes


def sample_probe_cost(cones, rng, *, retries=50, fallback=None):
    """A vector from the intersection of the cones, sampled at random.

    Draws strictly positive uniform coefficients on one randomly chosen
    cone's generators and accepts the combination once it verifies as a
    member of every cone; after ``retries`` rejected draws it returns
    ``fallback`` when given (callers typically pass the current cost
    estimate, which lies in the intersection by construction and is
    returned verbatim) and otherwise a feasibility witness of the
    intersection.  Raises when the intersection contains only the zero
    vector, which no probe can represent.
    """
    cones = [c if isinstance(c, ConeGenerators) else ConeGenerators(c)
             for c in cones]
    if not cones:
        raise ValueError("need at least one cone")
    rng = np.random.default_rng(rng)
    ok, witness, _ = has_common_cost(cones, witness=True)
    if not ok:
        raise ValueError("the admissible set contains only the zero "
                         "vector; there is no nonzero cost to probe")
    for _ in range(retries):
        i = int(rng.integers(len(cones)))
        coeffs = 1.0 - rng.random(cones[i].T)      # uniform over (0, 1]
        probe = coeffs @ cones[i].G
        if all(cone_membership(probe, c)[0] for c in cones):
            return probe
    if fallback is not None:
        return np.asarray(fallback, dtype=float)
    return witness


def predicted_active_flags(cost, poly):
    """Row flags active at the polytope's optimum under ``cost``.

    Costs follow the library's min convention; callers holding a
    maximization objective pass its negation.
    """
    sol = solve_lp(poly, np.asarray(cost, dtype=float))
    flags = np.zeros(poly.m, dtype=bool)
    flags[sol.active] = True
    return flags


# ---------------------------------------------------------------------------
# candidate scoring


def _current_generators(cones):
    """Unit-length generators of all current cones, stacked."""
    blocks = []
    for cone in cones:
        cone = cone if isinstance(cone, ConeGenerators) \
            else ConeGenerators(cone)
        norm = cone.normalized()
        if norm.T:
            blocks.append(norm.G)
    if not blocks:
        return np.zeros((0, 0))
    return np.vstack(blocks)


def _candidate_cone(candidate):
    if isinstance(candidate, ExperimentCandidate):
        return candidate.cone()
    if isinstance(candidate, ConeGenerators):
        return candidate
    return ConeGenerators(candidate)


def _score_by_enumeration(gens, ccone, epsilon):
    T = gens.shape[0]
    combos = np.array(list(itertools.product((0.0, 1.0), repeat=T)))
    points = epsilon * (combos @ gens)
    points = np.unique(np.round(points, 12), axis=0)
    best = 0.0
    for y in points:
        dist, _ = min_distance_to_cone(y, ccone, norm=1)
        best = max(best, dist)
    return float(best)


def _score_by_dual(gens, ccone, epsilon):
    """Score via the dual form of the inner distance.

    The 1-norm distance from ``y`` to the candidate cone equals the
    maximum of ``y @ u`` over ``|u| <= 1`` with ``u`` nonpositive against
    every candidate generator; maximizing jointly over the coefficient
    box makes each generator contribute ``max(g @ u, 0)``, linearized
    with one binary per generator (the bound ``|g @ u| <= l1(g)`` is
    exact under the box on ``u``).
    """
    T, n = gens.shape
    caps = np.abs(gens).sum(axis=1)           # valid relu bounds
    G_cand = ccone.G
    nc = G_cand.shape[0]
    total = n + 2 * T                          # u, r, beta
    u_sl = slice(0, n)
    r_sl = slice(n, n + T)
    b_sl = slice(n + T, n + 2 * T)

    rows, rhs, senses = [], [], []
    for k in range(nc):
        row = np.zeros(total)
        row[u_sl] = G_cand[k]
        rows.append(row)
        rhs.append(0.0)
        senses.append("<=")
    for t in range(T):
        row = np.zeros(total)                 # r_t - g_t u + cap beta_t <= cap
        row[u_sl] = -gens[t]
        row[r_sl.start + t] = 1.0
        row[b_sl.start + t] = caps[t]
        rows.append(row)
        rhs.append(caps[t])
        senses.append("<=")
        row = np.zeros(total)                 # r_t - cap beta_t <= 0
        row[r_sl.start + t] = 1.0
        row[b_sl.start + t] = -caps[t]
        rows.append(row)
        rhs.append(0.0)
        senses.append("<=")

    c = np.zeros(total)
    c[r_sl] = -1.0                             # maximize the relu sum
    lower = np.concatenate([-np.ones(n), np.zeros(T), np.zeros(T)])
    upper = np.concatenate([np.ones(n), caps, np.ones(T)])
    integer = np.zeros(total, dtype=bool)
    integer[b_sl] = True
    model = MilpModel(c=c, A=np.array(rows), b=np.array(rhs), senses=senses,
                      lower=lower, upper=upper, integer=integer)
    sol = solve_milp(model, node_limit=200_000)
    if sol.status != "optimal":
        raise RuntimeError("candidate scoring subproblem returned %s"
                           % sol.status)
    return float(max(0.0, -sol.objective) * epsilon)


def candidate_score(cones, candidate, epsilon=1.0, *, enumeration_cap=20,
                    method="auto"):
    """Guaranteed admissible-set cut of a candidate experiment.

    The exact maximum, over combinations of the current cones' unit
    generators with coefficients in ``[0, epsilon]``, of the 1-norm
    distance to the candidate's cone.  Zero exactly when the candidate's
    cone contains every such combination (running the candidate then
    proves nothing new); scaling ``epsilon`` scales the score linearly
    and never changes which of several candidates wins.

    ``method`` selects the inner solver: ``"enumerate"`` sweeps the
    ``2^T`` coefficient-box vertices, ``"dual"`` solves the equivalent
    mixed-integer form, ``"auto"`` picks by generator count.  More than
    ``enumeration_cap`` current generators raises: shrink the tracked
    representation (see :class:`ConeTracker`) or fall back to random
    selection by drawing a single candidate.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    gens = _current_generators(cones)
    T = gens.shape[0]
    if T == 0:
        return 0.0
    if T > enumeration_cap:
        raise ValueError(
            "the current cones carry %d generators, above the cap of %d; "
            "use a reduced cone representation (ConeTracker) or random "
            "selection (a single candidate) instead" % (T, enumeration_cap))
    ccone = _candidate_cone(candidate)
    if method == "auto":
        method = "enumerate" if T <= _ENUMERATE_MAX else "dual"
    if method == "enumerate":
        return _score_by_enumeration(gens, ccone, epsilon)
    if method == "dual":
        return _score_by_dual(gens, ccone, epsilon)
    raise ValueError("unknown scoring method %r" % (method,))


# ---------------------------------------------------------------------------
# selection


def adaptive_select(cones, space, n_candidates, rng, *, epsilon=1.0,
                    fallback_cost=None, enumeration_cap=20, method="auto",
                    probe_retries=50):
    """Best of ``n_candidates`` sampled experiments by score.

    Each candidate gets a fresh probe cost; ties keep the earliest
    sampled candidate, and with ``n_candidates=1`` the single draw is
    returned regardless of score — the random-selection baseline.
    Candidates whose draw or solve fails are skipped; all failing raises.
    """
    if n_candidates < 1:
        raise ValueError("need at least one candidate")
    rng = np.random.default_rng(rng)
    best = None
    for _ in range(n_candidates):
        try:
            poly = space.sample(rng)
        except ValueError:
            continue
        probe = sample_probe_cost(cones, rng, retries=probe_retries,
                                  fallback=fallback_cost)
        try:
            flags = predicted_active_flags(probe, poly)
        except KernelError:
            continue
        cand = ExperimentCandidate(poly, flags, probe_cost=probe)
        cand.score = candidate_score(cones, cand, epsilon,
                                     enumeration_cap=enumeration_cap,
                                     method=method)
        if best is None or cand.score > best.score:
            best = cand
    if best is None:
        raise ValueError("all %d sampled candidates were invalid"
                         % n_candidates)
    return best


# ---------------------------------------------------------------------------
# bounded cone bookkeeping for long runs


class ConeTracker:
    """Bounded stand-in for the full cone history when scoring.

    Scoring cost grows exponentially (enumeration) or combinatorially
    (dual binaries) with the total generator count, which itself grows by
    roughly the decision dimension per experiment.  The tracker keeps a
    reduced list: a new cone is skipped when some tracked cone already
    lies inside it (intersecting would change nothing — exact), tracked
    cones containing the new cone are dropped as superseded (exact), and
    beyond the generator ``budget`` the oldest cones are evicted (this
    may WIDEN the tracked set, which can only under-report candidate
    scores — selection degrades toward random, never breaks).  Exact
    estimation must keep using the full cone list; the tracker is for
    scoring only.
    """

    def __init__(self, budget=12):
        if budget < 1:
            raise ValueError("budget must be at least 1")
        self.budget = budget
        self.cones = []

    @property
    def generator_count(self):
        return sum(c.T for c in self.cones)

    def offer(self, cone):
        """Fold one experiment's cone in; True when tracking changed."""
        cone = (cone if isinstance(cone, ConeGenerators)
                else ConeGenerators(cone)).normalized()
        if cone.T == 0:
            return False
        for tracked in self.cones:
            if all(cone_membership(g, cone)[0] for g in tracked.G):
                return False     # tracked already implies the new cone
        kept = [t for t in self.cones
                if not all(cone_membership(g, t)[0] for g in cone.G)]
        self.cones = kept + [cone]
        while (self.generator_count > self.budget
               and len(self.cones) > 1):
            self.cones.pop(0)
        return True
