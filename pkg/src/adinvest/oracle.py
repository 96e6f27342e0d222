"""Offline benchmark: best stationary randomized policy and bound checks.

A stationary policy picks, independently at every frame of site ``n``,
action ``h`` with probability ``alpha[n][h]``. Its long-run revenue rate is a
ratio of expectations,

    sum_h alpha_h G_h / sum_h alpha_h (F_h + T_h),

and likewise for expenditure. In time-fraction coordinates each site's
achievable (expenditure, revenue) set is the convex hull of the per-action
points ``(p/L, G/L)``, so a single budget constraint is tight with at most
one site mixing between two actions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .controller import site_tables
from .errors import DegenerateFrameError
from .model import Bounds, SystemSpec

__all__ = [
    "StationaryPolicy",
    "OracleResult",
    "evaluate_policy",
    "compute_optimal",
    "full_grid_optimal",
    "Check",
    "BoundsReport",
    "verify_bounds",
]

FEAS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StationaryPolicy:
    """Per-site action probabilities aligned with each site's action list."""

    weights: tuple[np.ndarray, ...]

    def __post_init__(self):
        w = tuple(np.asarray(x, dtype=float) for x in self.weights)
        for x in w:
            if np.any(x < 0) or not math.isclose(x.sum(), 1.0, abs_tol=1e-9):
                raise ValueError("policy weights must be nonnegative and sum to 1 per site")
        object.__setattr__(self, "weights", w)

    @classmethod
    def pure(cls, spec: SystemSpec, indices: Sequence[int]) -> "StationaryPolicy":
        ws = []
        for site, i in zip(spec.sites, indices):
            w = np.zeros(len(site.actions))
            w[i] = 1.0
            ws.append(w)
        return cls(tuple(ws))

    def to_dict(self, spec: SystemSpec) -> dict:
        out = []
        for site, w in zip(spec.sites, self.weights):
            out.append({
                "id": site.id,
                "weights": [{"p": a.p, "t_freeze": a.t_freeze, "m": a.m, "alpha": float(x)}
                            for a, x in zip(site.actions, w) if x > 0],
            })
        return {"sites": out}


def _rate_points(spec: SystemSpec, model=None):
    """Per site: (expenditure rate, revenue rate, expected frame) per action."""
    pts = []
    for site in spec.sites:
        p, denom, g = site_tables(site, model)
        pts.append((p / denom, g / denom, denom))
    return pts


def evaluate_policy(policy: StationaryPolicy, spec: SystemSpec, model=None) -> tuple[float, float]:
    """Expected (revenue rate, expenditure rate) of a stationary policy."""
    profit = spend = 0.0
    for site, w in zip(spec.sites, policy.weights):
        p, denom, g = site_tables(site, model)
        length = float(w @ denom)
        if not length > 0:
            raise DegenerateFrameError(f"site {site.id}: policy has zero expected frame")
        profit += float(w @ g) / length
        spend += float(w @ p) / length
    return profit, spend


@dataclass
class OracleResult:
    """Best budget-feasible stationary policy found.

    ``dual_bound`` is ``min over lambda of [lambda*b + sum_n max_h (r - lambda*e)]``
    on the search grid, an upper bound on every stationary policy's revenue.
    """

    profit: float
    expenditure: float
    policy: StationaryPolicy
    b_av: float
    dual_bound: float
    lagrange_best: float
    candidates: int = 0
    mixing_site: int | None = None

    def to_dict(self, spec: SystemSpec) -> dict:
        d = self.policy.to_dict(spec)
        d.update(profit_star=self.profit, expenditure=self.expenditure, b_av=self.b_av,
                 dual_bound=self.dual_bound, lagrange_best=self.lagrange_best,
                 candidates=self.candidates)
        return d


def _lagrange_pure(pts, lam):
    """Per-site argmax of r - lam*e for each multiplier in ``lam`` (first index on ties)."""
    picks, duals = [], np.zeros(len(lam))
    for e, r, _ in pts:
        vals = r[None, :] - lam[:, None] * e[None, :]
        idx = np.argmax(vals, axis=1)
        picks.append(idx)
        duals += vals[np.arange(len(lam)), idx]
    return picks, duals


def _alpha_from_fraction(theta, i1, i2, denom, n_actions):
    """Action probabilities giving time fraction ``theta`` to ``i1``."""
    w = np.zeros(n_actions)
    w[i1] += theta / denom[i1]
    w[i2] += (1.0 - theta) / denom[i2]
    return w / w.sum()


def compute_optimal(spec: SystemSpec, b_av: float | None = None, model=None,
                    grid: int = 2000) -> OracleResult:
    """Best stationary policy under budget ``b_av`` (defaults to ``spec.b_av``).

    Searches (i) pure per-site maximizers of ``(G - lam*p/V)/(F+T)`` on a grid
    of ``lam`` in ``[0, V*nu]``, refined once around the best feasible point,
    and (ii) every configuration where one site mixes two actions with the
    mixing weight set to bind the budget and the other sites play pure
    actions. All-pure configurations are included as well.
    """
    b = spec.b_av if b_av is None else float(b_av)
    v = spec.v
    pts = _rate_points(spec, model)
    sizes = [len(e) for e, _, _ in pts]
    nu = 0.0
    for e, r, _ in pts:
        pos = e > 0
        if pos.any():
            nu = max(nu, float(np.max(r[pos] / e[pos])))
    n_cand = 0

    # (i) Lagrangian sweep; lam/V is the price of money in revenue units.
    lam = np.linspace(0.0, max(v * nu, 1e-12), grid)
    best_val, best_pick = -math.inf, None
    dual_bound = math.inf
    for _ in range(2):
        picks, duals = _lagrange_pure(pts, lam / v)
        dual_bound = min(dual_bound, float(np.min(duals + (lam / v) * b)))
        spend = sum(e[idx] for (e, _, _), idx in zip(pts, picks))
        rev = sum(r[idx] for (_, r, _), idx in zip(pts, picks))
        n_cand += len(lam)
        feas = spend <= b + FEAS_TOL
        j = -1
        if feas.any():
            j = int(np.flatnonzero(feas)[np.argmax(rev[feas])])
            if rev[j] > best_val:
                best_val = float(rev[j])
                best_pick = [int(idx[j]) for idx in picks]
        lo = lam[max(j - 1, 0)] if j >= 0 else lam[0]
        hi = lam[min(j + 1, len(lam) - 1)] if j >= 0 else lam[-1]
        lam = np.linspace(lo, hi, grid)
    lagrange_best = best_val
    best = (best_val, StationaryPolicy.pure(spec, best_pick) if best_pick else None, None)

    # (ii) all pure combinations plus one two-point mixing site.
    grids = [np.arange(k) for k in sizes]
    for combo in itertools.product(*grids):
        n_cand += 1
        spend = sum(pts[s][0][i] for s, i in enumerate(combo))
        if spend <= b + FEAS_TOL:
            val = sum(pts[s][1][i] for s, i in enumerate(combo))
            if val > best[0]:
                best = (float(val), StationaryPolicy.pure(spec, combo), None)

    for s, (e, r, denom) in enumerate(pts):
        others = [grids[o] for o in range(len(pts)) if o != s]
        o_ids = [o for o in range(len(pts)) if o != s]
        for oc in itertools.product(*others):
            e_o = sum(pts[o][0][i] for o, i in zip(o_ids, oc))
            r_o = sum(pts[o][1][i] for o, i in zip(o_ids, oc))
            room = b - e_o
            for i1, i2 in itertools.combinations(range(len(e)), 2):
                n_cand += 1
                if e[i1] == e[i2]:
                    continue
                theta = (room - e[i2]) / (e[i1] - e[i2])
                if not 0.0 <= theta <= 1.0:
                    continue
                val = r_o + theta * r[i1] + (1.0 - theta) * r[i2]
                if val > best[0]:
                    ws = []
                    for o in range(len(pts)):
                        if o == s:
                            ws.append(_alpha_from_fraction(theta, i1, i2, denom, len(e)))
                        else:
                            w = np.zeros(sizes[o])
                            w[oc[o_ids.index(o)]] = 1.0
                            ws.append(w)
                    best = (float(val), StationaryPolicy(tuple(ws)), spec.sites[s].id)

    val, policy, mixing = best
    profit, spend = evaluate_policy(policy, spec, model)
    return OracleResult(profit=profit, expenditure=spend, policy=policy, b_av=b,
                        dual_bound=dual_bound, lagrange_best=lagrange_best,
                        candidates=n_cand, mixing_site=mixing)


def _pareto(e: np.ndarray, r: np.ndarray):
    """Points not dominated in (lower expenditure, higher revenue)."""
    order = np.lexsort((-r, e))
    e, r = e[order], r[order]
    keep = r > np.maximum.accumulate(np.concatenate(([-np.inf], r[:-1])))
    return e[keep], r[keep]


def full_grid_optimal(spec: SystemSpec, b_av: float | None = None, model=None,
                      step: float = 0.01) -> tuple[float, float]:
    """Coarse brute-force search over per-site two-action probability mixtures.

    Every site independently takes any pure action or any mixture of two
    actions with probability on a ``step`` grid. Returns the best feasible
    (revenue rate, expenditure rate).
    """
    b = spec.b_av if b_av is None else float(b_av)
    alphas = np.arange(1, round(1.0 / step)) * step
    acc_e, acc_r = np.zeros(1), np.zeros(1)
    for site in spec.sites:
        p, denom, g = site_tables(site, model)
        es, rs = [p / denom], [g / denom]
        for i1, i2 in itertools.combinations(range(len(p)), 2):
            length = alphas * denom[i1] + (1 - alphas) * denom[i2]
            es.append((alphas * p[i1] + (1 - alphas) * p[i2]) / length)
            rs.append((alphas * g[i1] + (1 - alphas) * g[i2]) / length)
        e_s, r_s = _pareto(np.concatenate(es), np.concatenate(rs))
        acc_e, acc_r = _pareto((acc_e[:, None] + e_s[None, :]).ravel(),
                               (acc_r[:, None] + r_s[None, :]).ravel())
    feas = acc_e <= b + FEAS_TOL
    j = int(np.argmax(np.where(feas, acc_r, -np.inf)))
    return float(acc_r[j]), float(acc_e[j])


# -- bound verification ------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    ok: bool
    asserted: bool = True

    @property
    def margin(self) -> float:
        return self.limit - self.value


@dataclass
class BoundsReport:
    v: float
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks if c.asserted)

    @property
    def violations(self) -> list[Check]:
        return [c for c in self.checks if c.asserted and not c.ok]


def verify_bounds(profit_star: float, metrics: Sequence, bounds: Bounds, v: float,
                  error_bounds=None, n_sigma: float = 3.0, budget_slack: float = 0.005,
                  b_av: float | None = None) -> BoundsReport:
    """Compare replicated run metrics at one ``v`` with the theoretical guarantees.

    ``metrics`` are replications (anything with ``profit_av``,
    ``expenditure_av``, ``max_q``). In exact mode the revenue must lie in
    ``[profit* - gap, profit*]`` up to ``n_sigma`` standard errors. With
    ``error_bounds`` the lower bound is the imperfect-knowledge one and
    ``profit_star`` must be the optimum for the budget fed to the controller.
    Expenditure is compared with ``b_av`` (default ``bounds.b_av``) plus
    ``budget_slack``.
    """
    prof = np.array([m.profit_av for m in metrics], dtype=float)
    mean = float(prof.mean())
    se = float(prof.std(ddof=1) / math.sqrt(len(prof))) if len(prof) > 1 else 0.0
    tol = n_sigma * se
    rep = BoundsReport(v)
    if error_bounds is None:
        lower = profit_star - bounds.revenue_gap(v)
        qmax = bounds.queue_bound(v)
    else:
        lower = error_bounds.lower_bound(profit_star)
        qmax = error_bounds.queue_bound
    rep.checks.append(Check("profit_lower", -mean, -(lower - tol), mean >= lower - tol))
    if error_bounds is None:
        rep.checks.append(Check("profit_upper", mean, profit_star + tol,
                                mean <= profit_star + tol))
    worst_q = max(m.max_q for m in metrics)
    rep.checks.append(Check("queue_bound", worst_q, qmax, worst_q <= qmax))
    worst_spend = max(m.expenditure_av for m in metrics)
    cap = (bounds.b_av if b_av is None else b_av) + budget_slack
    rep.checks.append(Check("budget", worst_spend, cap, worst_spend <= cap))
    gap = profit_star - mean
    rep.checks.append(Check("gap_within_5pct", gap, 0.05 * profit_star,
                            gap <= 0.05 * profit_star, asserted=False))
    return rep
