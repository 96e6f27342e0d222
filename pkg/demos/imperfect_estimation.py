"""Running the controller on mis-estimated F and G.

The controller sees F and G scaled by (1 +- 0.1) and (1 +- 0.05) and uses
the budget 0.2/1.1, so that overestimated durations cannot push the true
spend past 0.2 in expectation. Frames are still drawn from the true model.
"""
from adinvest import (EstimationConfig, compute_optimal, derive_bounds, error_bounds,
                      reference_system, scaled_budget, sweep)

spec = reference_system()
b_ctrl = scaled_budget(spec.b_av, 0.1)
star = compute_optimal(spec, b_ctrl).profit
eb = error_bounds(derive_bounds(spec.with_budget(b_ctrl)), 200, 0.05, 0.1, len(spec.sites))
print(f"profit* at budget {b_ctrl:.5f}: {star:.6f}; guaranteed fraction {eb.revenue_factor:.5f}")

for mode in ("plus", "minus"):
    cfg = EstimationConfig(rho_g=0.05, rho_f=0.1, mode=mode)
    res = sweep(spec, [20, 200], replications=3, horizon=2e5, base_seed=7,
                estimation=cfg, scaled=True)
    for a in res.aggregate():
        print(f"{mode:5s} V={a.V:<4g} profit {a.profit_mean:.5f} ({a.profit_mean / star:.3f} of profit*)"
              f"  spend mean {a.expenditure_mean:.5f} max {a.expenditure_max:.5f}")
