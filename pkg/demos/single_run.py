"""One controller run on the bundled two-site configuration.

Shows the per-site decisions at the first few decision points, then the
time-average revenue, spend and backlog at the end of the horizon.
"""
from adinvest import reference_system, run

spec = reference_system(v=20)
trace, metrics = run(spec, horizon=2e5, seed=42)

print("first decision points")
for rec in trace.records[:8]:
    picks = ", ".join(f"site {d.site_id} -> p={d.action.p:g} T={d.action.t_freeze:g} "
                      f"m={d.action.m:g} (psi {d.psi:.3f})" for d in rec.decisions)
    print(f"  t={rec.t_d:8.2f}  Q={rec.q_before:7.3f}  {picks}")

single = sum(len(r.updating) == 1 for r in trace.records) / len(trace.records)
print(f"\n{len(trace.records)} decision points, {single:.1%} with one updating site")
print(f"profit_av      {metrics.profit_av:.5f}")
print(f"expenditure_av {metrics.expenditure_av:.5f}  (budget {spec.b_av})")
print(f"avg Q {metrics.avg_q:.3f}, max Q {metrics.max_q:.3f}")
