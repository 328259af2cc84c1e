"""Synthetic instance generation and prediction metrics.

Two studied forward-problem families are generated here:

* **Customer purchasing**: a buyer with a hidden utility vector picks
  product quantities ``max u'x  s.t.  prices'x <= budget, 0 <= x <= 1``.
  Each experiment draws a fresh price vector; the budget is 60% of the
  first experiment's total prices and is shared by every experiment.
  The library works in minimization form, so the assembled instance has
  hidden cost ``-u``; a matching per-coordinate sign ceiling is attached
  so estimated costs stay strictly negative.
* **Production planning**: a multi-period site of 38 processes and
  28 materials (static data in :mod:`invlinopt.production_data`).  Per
  period, process runs ``y`` drive signed material flows ``x`` through
  per-scenario conversion factors, purchases ``w`` top up raw materials,
  and inventories must absorb demand within fixed bounds.  The flattened
  decision vector is ``[x | y | w]`` with network equalities encoded as
  paired inequality rows.

Randomness is deterministic and portable: every quantity comes from
``numpy`` PCG64 generators seeded by a documented split of
``SeedSequence(seed)``::

    children = SeedSequence(seed).spawn(3 + num_experiments)
    children[0]      hidden cost draws
    children[1]      observation noise, consumed experiment by experiment
    children[2]      test-set inputs
    children[3 + i]  input parameters of experiment i

Within a stream the draw order is fixed and documented on each
generator.  Observation noise is i.i.d. ``N(0, noise_std**2)`` per
coordinate of the flattened decision vector.
"""

from dataclasses import dataclass, field

import numpy as np

from . import production_data as _pdata
from .iop import ExperimentData, IopInstance
from .lp import Polytope, solve_lp
from .simplex import KernelError

#: sign ceiling attached to customer instances: estimated (minimization)
#: costs must stay at or below this, i.e. utilities at least 1e-6.
CUSTOMER_COST_CEILING = -1e-6

_SCENARIO_RETRIES = 50


def _positive_int(name, value, minimum):
    if int(value) != value or value < minimum:
        raise ValueError("%s must be an integer >= %d" % (name, minimum))
    return int(value)


@dataclass(frozen=True)
class CustomerConfig:
    """Shape of a generated customer-purchasing instance."""

    n_products: int
    noise_std: float = 0.0
    samples_per_experiment: int = 1
    num_experiments: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_products",
                           _positive_int("n_products", self.n_products, 2))
        object.__setattr__(self, "samples_per_experiment",
                           _positive_int("samples_per_experiment",
                                         self.samples_per_experiment, 1))
        object.__setattr__(self, "num_experiments",
                           _positive_int("num_experiments",
                                         self.num_experiments, 1))
        if not self.noise_std >= 0.0:
            raise ValueError("noise_std must be nonnegative")


@dataclass(frozen=True)
class ProductionConfig:
    """Shape of a generated production-planning instance."""

    num_periods: int = 1
    noise_std: float = 0.0
    samples_per_experiment: int = 1
    num_experiments: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "num_periods",
                           _positive_int("num_periods", self.num_periods, 1))
        object.__setattr__(self, "samples_per_experiment",
                           _positive_int("samples_per_experiment",
                                         self.samples_per_experiment, 1))
        object.__setattr__(self, "num_experiments",
                           _positive_int("num_experiments",
                                         self.num_experiments, 1))
        if not self.noise_std >= 0.0:
            raise ValueError("noise_std must be nonnegative")


@dataclass(frozen=True)
class TestPoint:
    """One held-out forward problem with its true optimal solution."""

    inputs: dict
    polytope: Polytope
    solution: np.ndarray


@dataclass(frozen=True)
class TestSet:
    """Held-out (input parameters, true optimal solution) pairs.

    ``shared`` carries the parameters common to every point (the budget
    for customer sets; the period count for production sets) so points
    can be rebuilt from their stored inputs alone.
    """

    family: str
    shared: dict = field(default_factory=dict)
    points: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def _streams(seed, num_experiments):
    root = np.random.SeedSequence(seed)
    children = root.spawn(3 + num_experiments)
    return (np.random.default_rng(children[0]),
            np.random.default_rng(children[1]),
            np.random.default_rng(children[2]),
            [np.random.default_rng(c) for c in children[3:]])


# ---------------------------------------------------------------------------
# customer purchasing


def customer_polytope(prices, budget):
    """Feasible purchases: prices'x <= budget inside the unit box.

    Row order: the budget row, then the n ceilings ``x_p <= 1``, then the
    n floors ``-x_p <= 0``.
    """
    prices = np.asarray(prices, dtype=float).reshape(-1)
    n = prices.shape[0]
    A = np.vstack([prices, np.eye(n), -np.eye(n)])
    b = np.concatenate([[float(budget)], np.ones(n), np.zeros(n)])
    return Polytope(A, b)


def gen_customer(config, *, test_size=100):
    """Generate a customer instance, its hidden utilities, and a test set.

    Draw order: utilities ``U(1, 1000)`` per product (then normalized to
    unit 1-norm); per experiment, prices ``U(50, 150)`` per product; per
    experiment, a ``(samples, n)`` block of observation noise; test-set
    prices as ``test_size`` further ``U(50, 150)`` blocks.  The returned
    instance carries no reference cost; its hidden minimization cost is
    the negated utility vector.
    """
    if not isinstance(config, CustomerConfig):
        raise TypeError("config must be a CustomerConfig")
    test_size = _positive_int("test_size", test_size, 0)
    n = config.n_products
    rng_hidden, rng_noise, rng_test, rng_exps = _streams(
        config.seed, config.num_experiments)

    utilities = rng_hidden.uniform(1.0, 1000.0, n)
    utilities /= np.linalg.norm(utilities, 1)
    hidden_cost = -utilities

    budget = None
    experiments = []
    for rng_exp in rng_exps:
        prices = rng_exp.uniform(50.0, 150.0, n)
        if budget is None:
            budget = 0.6 * float(prices.sum())
        poly = customer_polytope(prices, budget)
        truth = solve_lp(poly, hidden_cost).x
        noise = rng_noise.normal(
            0.0, config.noise_std, (config.samples_per_experiment, n))
        experiments.append(ExperimentData(poly, truth[None, :] + noise))

    instance = IopInstance(experiments, cost_upper=CUSTOMER_COST_CEILING)

    points = []
    for _ in range(test_size):
        prices = rng_test.uniform(50.0, 150.0, n)
        poly = customer_polytope(prices, budget)
        truth = solve_lp(poly, hidden_cost).x
        points.append(TestPoint({"prices": prices}, poly, truth))
    test_set = TestSet("customer",
                       {"budget": budget, "n_products": n}, points)
    return instance, utilities, test_set


# ---------------------------------------------------------------------------
# production planning


@dataclass(frozen=True)
class ProductionLayout:
    """Index map of the flattened production decision vector.

    Variables are ``[x | y | w]``: signed material flows (one per nonzero
    conversion factor and period), process run levels, and purchases.
    Each block is period-major, so the per-period run/purchase sub-block
    has width ``num_processes + num_materials`` (38 + 28 = 66).
    """

    num_periods: int
    pairs: tuple          # (process, material) with a nonzero factor
    factors: np.ndarray   # nominal conversion factor per pair

    @property
    def num_processes(self):
        return _pdata.PROCESS_COUNT

    @property
    def num_materials(self):
        return _pdata.MATERIAL_COUNT

    @property
    def n_flows(self):
        return len(self.pairs)

    @property
    def n_x(self):
        return self.n_flows * self.num_periods

    @property
    def n_y(self):
        return self.num_processes * self.num_periods

    @property
    def n_w(self):
        return self.num_materials * self.num_periods

    @property
    def n(self):
        return self.n_x + self.n_y + self.n_w

    def flow_index(self, k, h):
        return h * self.n_flows + k

    def run_index(self, p, h):
        return self.n_x + h * self.num_processes + p

    def purchase_index(self, m, h):
        return self.n_x + self.n_y + h * self.num_materials + m

    def flat_cost(self, flow_cost, purchase_cost):
        """Assemble the minimization cost over the flattened vector.

        ``flow_cost`` has shape (n_flows, H) and prices each signed flow;
        ``purchase_cost`` has shape (num_materials, H).  Run levels carry
        no direct cost.
        """
        flow_cost = np.asarray(flow_cost, dtype=float)
        purchase_cost = np.asarray(purchase_cost, dtype=float)
        H = self.num_periods
        if flow_cost.shape != (self.n_flows, H) \
                or purchase_cost.shape != (self.num_materials, H):
            raise ValueError("cost block shapes do not match the layout")
        cost = np.zeros(self.n)
        for h in range(H):
            for k in range(self.n_flows):
                cost[self.flow_index(k, h)] = flow_cost[k, h]
            for m in range(self.num_materials):
                cost[self.purchase_index(m, h)] = purchase_cost[m, h]
        return cost


def production_layout(num_periods):
    """Layout for the embedded network with the given period count."""
    num_periods = _positive_int("num_periods", num_periods, 1)
    mu = _pdata.conversion_matrix()
    pairs = tuple((p, m) for p in range(mu.shape[0])
                  for m in range(mu.shape[1]) if mu[p, m] != 0.0)
    factors = np.array([mu[p, m] for p, m in pairs])
    return ProductionLayout(num_periods, pairs, factors)


@dataclass(frozen=True)
class ProductionCost:
    """Hidden cost of a generated production instance.

    ``flow_cost[k, h]`` prices flow pair ``k`` in period ``h``;
    ``purchase_cost[m, h]`` prices purchases of material ``m``.
    """

    flow_cost: np.ndarray
    purchase_cost: np.ndarray


def production_polytope(layout, mu_scale=None, demand=None):
    """Flattened feasible set of one production scenario.

    ``mu_scale`` multiplies the nominal conversion factor of each flow
    pair (default all ones); ``demand`` is the per-(material, period)
    demand, by default the nominal demand with the supply-route rule
    applied.  Row order: per period the network equality pairs (two rows
    per flow), then flow bounds, then purchase bounds, then cumulative
    inventory bounds (upper row before lower row throughout).
    """
    H = layout.num_periods
    K = layout.n_flows
    M = layout.num_materials
    mu = layout.factors.copy()
    if mu_scale is not None:
        mu_scale = np.asarray(mu_scale, dtype=float).reshape(-1)
        if mu_scale.shape != (K,):
            raise ValueError("mu_scale must give one factor per flow pair")
        mu = mu * mu_scale
    if demand is None:
        demand = np.tile(_pdata.effective_demand()[:, None], (1, H))
    else:
        demand = np.asarray(demand, dtype=float)
        if demand.shape != (M, H):
            raise ValueError("demand must be (num_materials, num_periods)")
    q0 = _pdata.initial_inventory()
    wmax = _pdata.purchase_limits()
    n = layout.n

    n_rows = H * (4 * K + 4 * M)
    A = np.zeros((n_rows, n))
    b = np.zeros(n_rows)
    equality_pairs = []
    r = 0
    # flows are pinned to run levels: x = mu * y, as paired inequalities
    for h in range(H):
        for k, (p, _) in enumerate(layout.pairs):
            xi = layout.flow_index(k, h)
            yi = layout.run_index(p, h)
            A[r, xi] = 1.0
            A[r, yi] = -mu[k]
            A[r + 1] = -A[r]
            equality_pairs.append((r, r + 1))
            r += 2
    # flow magnitude bounds, signed by the conversion direction
    for h in range(H):
        for k in range(K):
            xi = layout.flow_index(k, h)
            upper = _pdata.FLOW_LIMIT if mu[k] > 0 else 0.0
            lower = 0.0 if mu[k] > 0 else -_pdata.FLOW_LIMIT
            A[r, xi] = 1.0
            b[r] = upper
            A[r + 1, xi] = -1.0
            b[r + 1] = -lower
            r += 2
    # purchase bounds
    for h in range(H):
        for m in range(M):
            wi = layout.purchase_index(m, h)
            A[r, wi] = 1.0
            b[r] = wmax[m]
            A[r + 1, wi] = -1.0
            r += 2
    # inventory: 0 <= q0 + cumulative(production + purchases - demand) <= max
    flows_of = [[] for _ in range(M)]
    for k, (_, m) in enumerate(layout.pairs):
        flows_of[m].append(k)
    for h in range(H):
        for m in range(M):
            row = np.zeros(n)
            for hp in range(h + 1):
                for k in flows_of[m]:
                    row[layout.flow_index(k, hp)] = 1.0
                row[layout.purchase_index(m, hp)] = 1.0
            cum_demand = float(demand[m, :h + 1].sum())
            A[r] = row
            b[r] = _pdata.INVENTORY_MAX - q0[m] + cum_demand
            A[r + 1] = -row
            b[r + 1] = q0[m] - cum_demand
            r += 2
    return Polytope(A, b, equality_pairs=equality_pairs)


def _draw_scenario(layout, rng, flat_cost, label):
    """Sample (mu_scale, demand) until the scenario LP has an optimum.

    Draw order per attempt: one U(0.75, 1.0) factor per flow pair, then a
    U(0.9, 1.1) multiplier per (material, period) on the effective
    nominal demand.
    """
    base = _pdata.effective_demand()
    H = layout.num_periods
    for _ in range(_SCENARIO_RETRIES):
        mu_scale = rng.uniform(0.75, 1.0, layout.n_flows)
        demand = base[:, None] * rng.uniform(
            0.9, 1.1, (layout.num_materials, H))
        poly = production_polytope(layout, mu_scale, demand)
        try:
            solution = solve_lp(poly, flat_cost)
        except KernelError:
            continue
        return {"mu_scale": mu_scale, "demand": demand}, poly, solution.x
    raise ValueError("no feasible scenario within %d draws for %s"
                     % (_SCENARIO_RETRIES, label))


def gen_production(config, *, test_size=100):
    """Generate a production instance, its hidden costs, and a test set.

    Draw order: flow costs ``U(1, 100)`` (pair-major, then period), then
    purchase costs ``U(1, 100)``; per experiment a scenario draw (see
    :func:`production_polytope` for the model, ``_draw_scenario`` for the
    order); per experiment a ``(samples, n)`` noise block over the full
    flattened vector; test-set scenarios from their own stream.  The
    returned instance carries no reference cost.
    """
    if not isinstance(config, ProductionConfig):
        raise TypeError("config must be a ProductionConfig")
    test_size = _positive_int("test_size", test_size, 0)
    layout = production_layout(config.num_periods)
    rng_hidden, rng_noise, rng_test, rng_exps = _streams(
        config.seed, config.num_experiments)

    flow_cost = rng_hidden.uniform(
        1.0, 100.0, (layout.n_flows, config.num_periods))
    purchase_cost = rng_hidden.uniform(
        1.0, 100.0, (layout.num_materials, config.num_periods))
    hidden = ProductionCost(flow_cost, purchase_cost)
    flat = layout.flat_cost(flow_cost, purchase_cost)

    experiments = []
    for i, rng_exp in enumerate(rng_exps):
        _, poly, truth = _draw_scenario(layout, rng_exp, flat,
                                        "experiment %d" % i)
        noise = rng_noise.normal(
            0.0, config.noise_std,
            (config.samples_per_experiment, layout.n))
        experiments.append(ExperimentData(poly, truth[None, :] + noise))

    instance = IopInstance(experiments)

    points = []
    for v in range(test_size):
        inputs, poly, truth = _draw_scenario(layout, rng_test, flat,
                                             "test point %d" % v)
        points.append(TestPoint(inputs, poly, truth))
    test_set = TestSet("production",
                       {"num_periods": config.num_periods}, points)
    return instance, hidden, test_set


# ---------------------------------------------------------------------------
# prediction metrics


def prediction_error(estimate, test_set, *, tol=1e-6):
    """Fraction of test points whose predicted optimum is wrong.

    Each test forward problem is solved under ``estimate``; a prediction
    is incorrect when it differs from the recorded true optimum by more
    than ``tol`` in the infinity norm.
    """
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    estimate = np.asarray(estimate, dtype=float).reshape(-1)
    wrong = 0
    for point in test_set:
        predicted = solve_lp(point.polytope, estimate).x
        if np.max(np.abs(predicted - point.solution)) > tol:
            wrong += 1
    return wrong / len(test_set)


def dv_metric(estimate, test_set):
    """Sum over test points of the infinity-norm prediction deviation.

    Raw value; callers tracking an experiment stream normalize by the
    value after the first experiment when plotting.
    """
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    estimate = np.asarray(estimate, dtype=float).reshape(-1)
    total = 0.0
    for point in test_set:
        predicted = solve_lp(point.polytope, estimate).x
        total += float(np.max(np.abs(predicted - point.solution)))
    return total
