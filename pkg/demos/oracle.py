"""Best stationary randomized policy for the bundled configuration.

Compares the restricted Lagrangian search with the coarse two-action grid,
and shows how the optimum changes when the budget shrinks by 1.1.
"""
from adinvest import compute_optimal, full_grid_optimal, reference_system

spec = reference_system()
for b in (0.2, 0.2 / 1.1):
    res = compute_optimal(spec, b)
    grid, _ = full_grid_optimal(spec, b)
    print(f"b_av={b:.5f}: profit*={res.profit:.9f}  grid={grid:.9f}  "
          f"dual bound={res.dual_bound:.9f}  spend={res.expenditure:.6f}")
    for site, w in zip(spec.sites, res.policy.weights):
        mix = ", ".join(f"{x:.4f} x (p={a.p:g},T={a.t_freeze:g},m={a.m:g})"
                        for a, x in zip(site.actions, w) if x > 0)
        print(f"    site {site.id}: {mix}")
