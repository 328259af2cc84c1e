"""Static network data for the multi-period production-planning study.

The dataset describes a site of 38 processes transforming 28 materials.
Each process row lists its nonzero conversion factors: one unit of the
process's reference material (the entry with value +1; a process may also
produce secondary outputs with other positive entries) goes along with
``factor`` units of every listed material — negative factors are
consumptions, positive factors productions.  Materials 1-9 are raw
materials that can be purchased externally; materials with a listed
demand are products; everything else is an intermediate or byproduct.

One data-consistency rule applies at model-assembly time: a demanded
material with no supply route at all (never produced by any process and
not purchasable) would make every instance infeasible through its
inventory balance, so its demand is treated as zero when models are
assembled.  The demand table below retains the entry as listed so the
data round-trips; exactly one material (23) triggers the rule.
"""

import numpy as np

PROCESS_COUNT = 38
MATERIAL_COUNT = 28

INVENTORY_MIN = 0.0
INVENTORY_MAX = 200.0
FLOW_LIMIT = 300.0          # per-period bound on each |x_pm| flow
PURCHASE_LIMIT = 300.0      # per-period bound on purchases of materials 1-9
PURCHASABLE = tuple(range(1, 10))   # 1-based material ids

# Conversion factors: row p (1-based process id p = 1..38) holds the
# ((material, factor), ...) pairs of process p; materials are 1-based.
_CONVERSION_ROWS = (
    ((1, -0.58), (6, -0.63), (11, 1.0)),
    ((6, -0.64), (12, 1.0)),
    ((1, -0.055), (2, -1.25), (11, 1.0)),
    ((2, -0.4), (3, -0.69), (14, 1.0)),
    ((13, 1.0), (14, -2.3), (17, 1.7)),
    ((2, -0.74), (15, 1.0)),
    ((13, 1.0), (15, -1.1)),
    ((3, -1.0), (16, 1.0)),
    ((16, -1.26), (17, 1.0)),
    ((13, -1.57), (27, 1.0)),
    ((3, -1.01), (17, 1.0)),
    ((3, -0.76), (4, -0.28), (8, 1.0)),
    ((8, -1.14), (18, 1.0)),
    ((2, -0.78), (13, 1.0)),
    ((12, 1.0), (19, -1.34)),
    ((4, -0.6), (19, 1.0)),
    ((4, -0.67), (12, 1.0)),
    ((12, -1.1), (20, 1.0)),
    ((19, -0.98), (20, 1.0)),
    ((4, -0.35), (20, -0.71), (21, 1.0)),
    ((6, -0.32), (20, -0.72), (21, 1.0)),
    ((4, -0.88), (5, 1.0), (24, 0.03)),
    ((1, -0.56), (5, -0.92), (11, 1.0)),
    ((4, -0.39), (28, 1.0)),
    ((5, 1.0), (28, 1.0)),
    ((4, -0.3), (26, 1.0)),
    ((20, -0.65), (22, 1.0), (27, -0.46)),
    ((7, -0.56), (10, -0.56), (20, 1.0)),
    ((12, -1.2), (22, 1.0)),
    ((4, -1.17), (25, 1.0)),
    ((5, -0.75), (24, 1.0)),
    ((4, -0.53), (24, 1.0)),
    ((12, -0.6), (20, -0.82), (21, 1.0)),
    ((10, -0.42), (25, 1.0)),
    ((9, -0.5), (10, 1.0)),
    ((7, -0.53), (24, 1.0), (25, -0.57)),
    ((24, 1.0), (28, -1.44)),
    ((2, 0.38), (3, 0.22), (4, 1.0), (9, -3.08), (26, 1.81)),
)

# Per-period nominal demand and initial inventory, by 1-based material id.
# Materials absent from these maps have zero demand / zero initial stock.
_DEMAND = {10: 40.0, 11: 150.0, 12: 30.0, 13: 75.0, 14: 60.0, 15: 30.0,
           16: 30.0, 17: 50.0, 18: 150.0, 19: 70.0, 20: 30.0, 21: 75.0,
           22: 100.0, 23: 75.0, 24: 250.0, 25: 50.0}
_INITIAL_INVENTORY = {10: 10.0, 11: 5.0, 12: 0.0, 13: 5.0, 14: 5.0, 15: 7.0,
                      16: 10.0, 17: 2.0, 18: 3.0, 19: 5.0, 20: 10.0, 21: 7.0,
                      22: 5.0, 23: 5.0, 24: 3.0, 25: 3.0}


def conversion_matrix():
    """Dense (38, 28) array of nominal conversion factors."""
    mat = np.zeros((PROCESS_COUNT, MATERIAL_COUNT))
    for p, row in enumerate(_CONVERSION_ROWS):
        for m, factor in row:
            mat[p, m - 1] = factor
    return mat


def nominal_demand():
    """Per-period demand by material, (28,), exactly as listed."""
    d = np.zeros(MATERIAL_COUNT)
    for m, v in _DEMAND.items():
        d[m - 1] = v
    return d


def initial_inventory():
    """Initial stock by material, (28,)."""
    q = np.zeros(MATERIAL_COUNT)
    for m, v in _INITIAL_INVENTORY.items():
        q[m - 1] = v
    return q


def purchase_limits():
    """Per-period purchase bound by material, (28,)."""
    w = np.zeros(MATERIAL_COUNT)
    for m in PURCHASABLE:
        w[m - 1] = PURCHASE_LIMIT
    return w


def supplyable_materials():
    """Boolean (28,): material is produced by some process or purchasable."""
    produced = (conversion_matrix() > 0).any(axis=0)
    purchasable = purchase_limits() > 0
    return produced | purchasable


def effective_demand():
    """Nominal demand with the supply-route rule applied (28,).

    Demand on a material no process produces and no purchase can supply is
    unsatisfiable in every scenario; model assembly zeroes it.
    """
    return np.where(supplyable_materials(), nominal_demand(), 0.0)
