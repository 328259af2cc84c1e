"""Tests for adaptive experiment selection and candidate scoring."""

import numpy as np
import pytest

from invlinopt.lp import ConeGenerators, Polytope, cone_membership, solve_lp
from invlinopt.sampling import (ConeTracker, ExperimentCandidate,
                                ParameterSpace, adaptive_select,
                                candidate_score, predicted_active_flags,
                                sample_probe_cost)


def knapsack_polytope(budget=3.0):
    """max x1 + 2 x2 family: 2 x1 + 3 x2 <= budget inside the unit box."""
    return Polytope(
        np.array([[2.0, 3.0], [1, 0], [0, 1], [-1, 0], [0, -1]]),
        np.array([budget, 1, 1, 0, 0]))


def knapsack_space(lo=2.5, hi=4.0):
    mask = np.zeros(5, dtype=bool)
    mask[0] = True
    return ParameterSpace(knapsack_polytope(), b_mask=mask,
                          b_lower=np.full(5, lo), b_upper=np.full(5, hi))


def observed_cone(poly, cost):
    """Cone contributed by an experiment solved under ``cost``."""
    flags = predicted_active_flags(cost, poly)
    return ConeGenerators(-poly.A[flags])


# --- parameter space -------------------------------------------------------


def test_parameter_space_draws_within_ranges():
    space = knapsack_space()
    rng = np.random.default_rng(7)
    for _ in range(20):
        poly = space.sample(rng)
        assert 2.5 <= poly.b[0] <= 4.0
        assert np.array_equal(poly.b[1:], knapsack_polytope().b[1:])
        assert np.array_equal(poly.A, knapsack_polytope().A)
    a = knapsack_space().sample(np.random.default_rng(3)).b[0]
    b = knapsack_space().sample(np.random.default_rng(3)).b[0]
    assert a == b


def test_parameter_space_rejects_invalid_draws():
    box = Polytope(np.array([[1.0, 0], [0, 1], [-1, 0], [0, -1]]),
                   np.array([1.0, 1, 0, 0]))
    mask = np.zeros(4, dtype=bool)
    mask[0] = True
    # draws with negative ceiling on x1 are empty and get rejected
    space = ParameterSpace(box, b_mask=mask, b_lower=np.full(4, -0.5),
                           b_upper=np.full(4, 0.5), max_retries=100)
    poly = space.sample(np.random.default_rng(0))
    assert poly.b[0] >= 0.0
    # every draw empty: the retry budget runs out
    hopeless = ParameterSpace(box, b_mask=mask, b_lower=np.full(4, -3.0),
                              b_upper=np.full(4, -2.0), max_retries=20)
    with pytest.raises(ValueError, match="draws"):
        hopeless.sample(np.random.default_rng(0))


def test_parameter_space_keeps_equality_pairs_consistent():
    # segment x1 + x2 = 1 in the unit box, with the pair's rhs varying
    A = np.array([[1.0, 1], [-1, -1], [1, 0], [0, 1], [-1, 0], [0, -1]])
    b = np.array([1.0, -1, 1, 1, 0, 0])
    template = Polytope(A, b, equality_pairs=[(0, 1)])
    mask = np.zeros(6, dtype=bool)
    mask[0] = True
    space = ParameterSpace(template, b_mask=mask, b_lower=np.full(6, 0.4),
                           b_upper=np.full(6, 1.6))
    poly = space.sample(np.random.default_rng(5))
    assert poly.b[1] == -poly.b[0]
    assert 0.4 <= poly.b[0] <= 1.6
    assert poly.equality_pairs == [(0, 1)]


def test_parameter_space_validation():
    box = knapsack_polytope()
    mask = np.zeros(5, dtype=bool)
    mask[0] = True
    with pytest.raises(ValueError, match="ranges missing"):
        ParameterSpace(box, b_mask=mask)
    with pytest.raises(ValueError, match="flagged"):
        ParameterSpace(box)
    with pytest.raises(ValueError, match="lower <= upper"):
        ParameterSpace(box, b_mask=mask, b_lower=np.full(5, 2.0),
                       b_upper=np.full(5, 1.0))


# --- probe costs -----------------------------------------------------------


def test_probe_on_single_ray_lies_on_the_ray():
    cone = ConeGenerators(np.array([[2.0, 3.0]]))
    probe = sample_probe_cost([cone], 11)
    assert probe[0] > 0
    assert probe[0] * 3.0 == pytest.approx(probe[1] * 2.0, abs=1e-12)


def test_probe_single_axis_cone():
    probe = sample_probe_cost([ConeGenerators(np.array([[1.0, 0.0]]))], 2)
    assert probe[0] > 0 and probe[1] == 0.0


def test_probe_member_of_every_cone_and_deterministic():
    cones = [ConeGenerators(np.array([[-1.0, 0], [2, 3]])),
             ConeGenerators(np.array([[0.0, 1], [2, 3]]))]
    for seed in range(20):
        probe = sample_probe_cost(cones, seed)
        assert all(cone_membership(probe, c)[0] for c in cones)
    assert np.array_equal(sample_probe_cost(cones, 4),
                          sample_probe_cost(cones, 4))


def test_probe_zero_intersection_raises():
    cones = [ConeGenerators(np.array([[1.0, 0.0]])),
             ConeGenerators(np.array([[-1.0, 0.0]]))]
    with pytest.raises(ValueError, match="zero"):
        sample_probe_cost(cones, 0)


def test_probe_fallback_when_rejection_budget_exhausted():
    cones = [ConeGenerators(np.array([[-1.0, 0], [2, 3]])),
             ConeGenerators(np.array([[0.0, 1], [2, 3]]))]
    given = sample_probe_cost(cones, 0, retries=0,
                              fallback=np.array([2.0, 3.0]))
    assert np.array_equal(given, [2.0, 3.0])
    # without a fallback the feasibility witness is returned
    witness = sample_probe_cost(cones, 0, retries=0)
    assert np.max(np.abs(witness)) > 1e-9
    assert all(cone_membership(witness, c)[0] for c in cones)


# --- predicted outcomes ----------------------------------------------------


def test_predicted_flags_on_knapsack():
    poly = knapsack_polytope()
    flags = predicted_active_flags(np.array([-1.0, -2.0]), poly)
    # optimum (0,1): budget row, the x2 ceiling, and the x1 floor are tight
    assert np.array_equal(flags, [True, False, True, True, False])


def test_predicted_flags_on_box_maximizing_everything():
    box = Polytope(np.array([[1.0, 0], [0, 1], [-1, 0], [0, -1]]),
                   np.array([1.0, 1, 0, 0]))
    flags = predicted_active_flags(np.array([-1.0, -1.0]), box)
    assert np.array_equal(flags, [True, True, False, False])


def test_predicted_flags_on_budget_instance():
    poly = Polytope(
        np.array([[14.0, 10.0], [1, 0], [0, 1], [-1, 0], [0, -1]]),
        np.array([17.0, 1, 1, 0, 0]))
    flags = predicted_active_flags(np.array([-2.0, -1.0]), poly)
    assert np.array_equal(flags, [True, True, False, False, False])


# --- candidate scoring -----------------------------------------------------


def test_score_zero_when_candidate_contains_current():
    current = ConeGenerators(np.array([[1.0, 0], [0, 1]]))
    candidate = ConeGenerators(np.array([[1.0, -1], [-1, 2]]))
    assert candidate_score([current], candidate) == 0.0
    assert candidate_score([current], candidate, method="dual") == 0.0


def test_score_positive_on_overlapping_wedges():
    # tight wedge around the diagonal versus a wedge hugging the x-axis
    current = ConeGenerators(np.array([[0.5547, 0.83205],
                                       [0.99504, 0.0995]]))
    candidate = ConeGenerators(np.array([[0.8944, 0.44], [1.0, 0.0]]))
    enum = candidate_score([current], candidate, method="enumerate")
    dual = candidate_score([current], candidate, method="dual")
    assert enum > 0.01
    assert dual == pytest.approx(enum, abs=1e-9)
    # the min-convention mirror scores identically
    enum_neg = candidate_score(
        [ConeGenerators(-current.G)], ConeGenerators(-candidate.G),
        method="enumerate")
    assert enum_neg == pytest.approx(enum, abs=1e-12)


def test_score_scales_linearly_with_epsilon():
    rng = np.random.default_rng(8)
    for _ in range(6):
        current = [ConeGenerators(rng.normal(size=(2, 2))),
                   ConeGenerators(rng.normal(size=(2, 2)))]
        candidate = ConeGenerators(rng.normal(size=(2, 2)))
        base = candidate_score(current, candidate, 1.0)
        for k in (0.5, 3.0, 7.0):
            scaled = candidate_score(current, candidate, k)
            assert scaled == pytest.approx(k * base, abs=1e-9 * (1 + k))


def test_enumeration_and_dual_routes_agree():
    rng = np.random.default_rng(21)
    for n in (2, 3):
        for _ in range(8):
            current = [ConeGenerators(rng.normal(size=(2, n))),
                       ConeGenerators(rng.normal(size=(2, n)))]
            candidate = ConeGenerators(rng.normal(size=(3, n)))
            enum = candidate_score(current, candidate, 1.3,
                                   method="enumerate")
            dual = candidate_score(current, candidate, 1.3, method="dual")
            assert dual == pytest.approx(enum, abs=1e-8)


def test_zero_score_equals_enumerated_membership():
    rng = np.random.default_rng(14)
    hits = {True: 0, False: 0}
    for trial in range(12):
        current = ConeGenerators(rng.normal(size=(3, 2)))
        if trial % 2:
            # widening the current generators guarantees containment
            candidate = ConeGenerators(
                np.vstack([current.G, rng.normal(size=(1, 2))]))
        else:
            candidate = ConeGenerators(rng.normal(size=(2, 2)))
        score = candidate_score([current], candidate)
        gens = current.normalized().G
        members = []
        for mask in range(2 ** gens.shape[0]):
            sel = [(mask >> t) & 1 for t in range(gens.shape[0])]
            y = np.array(sel, dtype=float) @ gens
            members.append(cone_membership(y, candidate)[0])
        assert (score == 0.0) == all(members)
        hits[score == 0.0] += 1
    assert hits[True] and hits[False]   # both directions exercised


def test_zero_score_means_sampled_members_stay_members():
    current = ConeGenerators(np.array([[1.0, 0], [0, 1]]))
    candidate = ConeGenerators(np.array([[2.0, -1], [-1, 2]]))
    assert candidate_score([current], candidate) == 0.0
    rng = np.random.default_rng(3)
    coeffs = rng.uniform(0.0, 1.0, size=(10_000, 2))
    points = coeffs @ current.normalized().G
    # closed form: weights in the candidate's generator basis stay >= 0
    weights = points @ np.linalg.inv(candidate.G)
    assert np.all(weights >= -1e-9)
    for point in points[rng.integers(0, 10_000, size=50)]:
        assert cone_membership(point, candidate)[0]


def test_sampled_scores_never_exceed_enumerated_score():
    rng = np.random.default_rng(17)
    current = [ConeGenerators(rng.normal(size=(2, 2))),
               ConeGenerators(rng.normal(size=(2, 2)))]
    candidate = ConeGenerators(rng.normal(size=(2, 2)))
    eps = 1.5
    score = candidate_score(current, candidate, eps, method="enumerate")
    gens = np.vstack([c.normalized().G for c in current])
    T = gens.shape[0]
    from invlinopt.lp import min_distance_to_cone
    # interior draws stay below the score; vertex-pattern draws attain it
    interior = rng.uniform(0.0, eps, size=(500, T)) @ gens
    best = 0.0
    for y in interior:
        d, _ = min_distance_to_cone(y, candidate, norm=1)
        assert d <= score + 1e-9
    patterns = rng.integers(0, 2, size=(10_000, T)).astype(float) * eps
    uniq = np.unique(patterns, axis=0)
    for gamma in uniq:
        d, _ = min_distance_to_cone(gamma @ gens, candidate, norm=1)
        assert d <= score + 1e-9
        best = max(best, d)
    assert best == pytest.approx(score, abs=1e-6)


def test_score_cap_raises_with_advice():
    current = ConeGenerators(np.random.default_rng(0).normal(size=(21, 2)))
    candidate = ConeGenerators(np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError, match="cap"):
        candidate_score([current], candidate)
    # a custom cap is honored
    assert candidate_score([current], candidate, enumeration_cap=25) >= 0.0


def test_score_threshold_on_knapsack_family():
    # the knapsack experiment only cuts the admissible set once its budget
    # exceeds the level where a new vertex becomes optimal
    current = observed_cone(knapsack_polytope(3.0), np.array([-1.0, -2.0]))
    for seed, budget in enumerate((2.5, 2.8, 3.0)):
        poly = knapsack_polytope(budget)
        probe = sample_probe_cost([current], seed)
        cand = ExperimentCandidate(poly, predicted_active_flags(probe, poly))
        assert candidate_score([current], cand) == pytest.approx(0.0,
                                                                 abs=1e-9)
    poly = knapsack_polytope(4.0)
    probe = sample_probe_cost([current], 0)
    cand = ExperimentCandidate(poly, predicted_active_flags(probe, poly))
    assert candidate_score([current], cand) > 1e-3


# --- selection -------------------------------------------------------------


def test_adaptive_select_prefers_cutting_budgets():
    current = observed_cone(knapsack_polytope(3.0), np.array([-1.0, -2.0]))
    space = knapsack_space(2.5, 4.0)
    chosen = adaptive_select([current], space, 50, 123)
    assert chosen.poly.b[0] > 3.0
    assert chosen.score > 0.0


def test_adaptive_select_single_candidate_is_the_random_draw():
    current = observed_cone(knapsack_polytope(3.0), np.array([-1.0, -2.0]))
    space = knapsack_space()
    rng = np.random.default_rng(42)
    first = space.sample(rng)           # replay the stream's first draw
    chosen = adaptive_select([current], space, 1, 42)
    assert np.array_equal(chosen.poly.b, first.b)
    again = adaptive_select([current], space, 1, 42)
    assert np.array_equal(chosen.poly.b, again.poly.b)


def test_adaptive_select_tie_keeps_earliest():
    current = observed_cone(knapsack_polytope(3.0), np.array([-1.0, -2.0]))
    space = knapsack_space(2.6, 2.9)    # every candidate scores zero
    rng = np.random.default_rng(9)
    first = space.sample(rng)
    chosen = adaptive_select([current], space, 5, 9)
    assert chosen.score == 0.0
    assert np.array_equal(chosen.poly.b, first.b)


def test_adaptive_select_epsilon_does_not_change_the_choice():
    current = observed_cone(knapsack_polytope(3.0), np.array([-1.0, -2.0]))
    space = knapsack_space()
    small = adaptive_select([current], space, 8, 31, epsilon=1.0)
    large = adaptive_select([current], space, 8, 31, epsilon=6.0)
    assert np.array_equal(small.poly.b, large.poly.b)
    assert large.score == pytest.approx(6.0 * small.score, rel=1e-9)


def test_adaptive_select_all_invalid_raises():
    box = Polytope(np.array([[1.0, 0], [0, 1], [-1, 0], [0, -1]]),
                   np.array([1.0, 1, 0, 0]))
    mask = np.zeros(4, dtype=bool)
    mask[0] = True
    hopeless = ParameterSpace(box, b_mask=mask, b_lower=np.full(4, -3.0),
                              b_upper=np.full(4, -2.0), max_retries=5)
    cone = ConeGenerators(np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError, match="invalid"):
        adaptive_select([cone], hopeless, 3, 0)


def test_adaptive_select_validates_count():
    cone = ConeGenerators(np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError, match="at least one"):
        adaptive_select([cone], knapsack_space(), 0, 0)


# --- cone tracking ---------------------------------------------------------


def test_tracker_skips_cones_already_implied():
    tracker = ConeTracker()
    narrow = ConeGenerators(np.array([[1.0, 0.1], [1.0, -0.1]]))
    wide = ConeGenerators(np.array([[1.0, 1.0], [1.0, -1.0]]))
    assert tracker.offer(narrow)
    assert not tracker.offer(wide)      # narrow already implies it
    assert len(tracker.cones) == 1
    assert not tracker.offer(narrow)    # idempotent


def test_tracker_supersedes_wider_cones():
    tracker = ConeTracker()
    wide = ConeGenerators(np.array([[1.0, 1.0], [1.0, -1.0]]))
    narrow = ConeGenerators(np.array([[1.0, 0.1], [1.0, -0.1]]))
    assert tracker.offer(wide)
    assert tracker.offer(narrow)
    assert len(tracker.cones) == 1      # the wide cone was superseded
    kept = tracker.cones[0]
    assert all(cone_membership(g, wide)[0] for g in kept.G)


def test_tracker_evicts_oldest_beyond_budget():
    tracker = ConeTracker(budget=4)
    cones = [ConeGenerators(np.array([[1.0, t], [1.0, -t]]))
             for t in (0.9, 0.7, 0.5)]  # nested wedges, each replacing last
    for c in cones:
        tracker.offer(c)
    assert len(tracker.cones) == 1      # each superseded its predecessor
    # genuinely incomparable cones around different axes accumulate
    tracker = ConeTracker(budget=4)
    tracker.offer(ConeGenerators(np.array([[1.0, 0.2], [1.0, -0.2]])))
    tracker.offer(ConeGenerators(np.array([[0.2, 1.0], [-0.2, 1.0]])))
    tracker.offer(ConeGenerators(np.array([[-1.0, 0.2], [-1.0, -0.2]])))
    assert tracker.generator_count <= 4
    assert len(tracker.cones) == 2      # the oldest wedge was evicted


def test_tracker_keeps_scoring_within_cap():
    rng = np.random.default_rng(2)
    tracker = ConeTracker(budget=8)
    for _ in range(12):
        g = rng.normal(size=(3, 3))
        tracker.offer(ConeGenerators(g))
        assert tracker.generator_count <= 8
    candidate = ConeGenerators(rng.normal(size=(3, 3)))
    score = candidate_score(tracker.cones, candidate, enumeration_cap=8)
    assert score >= 0.0
