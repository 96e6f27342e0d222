"""Revenue and backlog as V grows.

Larger V moves the time-average revenue toward the stationary optimum
while the average deficit queue grows roughly linearly. Horizon and
replications are reduced here; the acceptance suite uses 1e6 and 10.
"""
import numpy as np

from adinvest import compute_optimal, derive_bounds, reference_system, sweep

spec = reference_system()
v_values = [5, 10, 20, 50, 100, 200]
res = sweep(spec, v_values, replications=3, horizon=2e5, base_seed=42)
star = compute_optimal(spec).profit
bounds = derive_bounds(spec)

print(f"profit* = {star:.6f}")
print("    V   profit    +-se      gap%   spend     avg_q   max_q/bound")
for a in res.aggregate():
    ratio = a.max_q_max / bounds.queue_bound(a.V)
    print(f"{a.V:5g}  {a.profit_mean:.5f}  {a.profit_se:.1e}  {100 * (star - a.profit_mean) / star:6.2f}"
          f"  {a.expenditure_mean:.5f}  {a.avg_q_mean:7.2f}  {ratio:.3f}")

agg = res.aggregate()
slope, icpt = np.polyfit([a.V for a in agg], [a.avg_q_mean for a in agg], 1)
print(f"\navg_q ~ {slope:.3f} V + {icpt:.2f}")
