"""Asynchronous ad-investment controller.

Each site is re-decided only when its own frame ends. The decision maximizes
the drift-plus-penalty ratio

    psi = (v * G - q * p) / (F + t_freeze)

over the site's finite action list, with ``q`` the current deficit queue.
The queue is updated once per interval between consecutive decision points,
using the consumption rates of the actions in effect at every site.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import DegenerateFrameError
from .model import ActionTriple, Bounds, SiteSpec, SystemSpec

__all__ = [
    "ModelTables",
    "DeficitQueue",
    "Decision",
    "site_tables",
    "psi_value",
    "psi_vector",
    "select_action",
    "consumption_rate",
    "revenue_rate",
    "update_queue",
    "DriftReport",
    "verify_drift_bound",
]

PSI_TOL = 1e-9


class ModelTables(Protocol):
    """Anything that can hand out per-action (F, G) arrays for a site."""

    def tables(self, site: SiteSpec) -> tuple[np.ndarray, np.ndarray]: ...


def site_tables(site: SiteSpec, model: ModelTables | None = None):
    """Return ``(p, frame_mean, g)`` arrays for the site under ``model``.

    ``frame_mean`` is F + t_freeze. ``model=None`` means the true F/G.
    """
    if model is None:
        f, g = site.f_array, site.g_array
    else:
        f, g = model.tables(site)
    denom = f + site.freeze_array
    if np.any(denom <= 0):
        i = int(np.flatnonzero(denom <= 0)[0])
        raise DegenerateFrameError(f"site {site.id}: action {site.actions[i]} has zero expected frame")
    return site.p_array, denom, g


@dataclass(frozen=True)
class DeficitQueue:
    q: float = 0.0
    last_update: float = 0.0

    @property
    def lyapunov(self) -> float:
        return 0.5 * self.q * self.q


@dataclass(frozen=True)
class Decision:
    site_id: int
    index: int
    action: ActionTriple
    psi: float
    q_observed: float


def psi_vector(v: float, q: float, p: np.ndarray, denom: np.ndarray, g: np.ndarray) -> np.ndarray:
    return (v * g - q * p) / denom


def psi_value(v: float, q: float, site: SiteSpec, a: ActionTriple,
              model: ModelTables | None = None) -> float:
    """Drift-plus-penalty ratio of a single action."""
    i = site.index(a)
    p, denom, g = site_tables(site, model)
    return float((v * g[i] - q * p[i]) / denom[i])


def select_action(v: float, q: float, site: SiteSpec,
                  model: ModelTables | None = None) -> Decision:
    """Exhaustive maximization of psi; ties go to the earliest declared action."""
    psi = psi_vector(v, q, *site_tables(site, model))
    i = int(np.argmax(psi))
    return Decision(site.id, i, site.actions[i], float(psi[i]), float(q))


def consumption_rate(site: SiteSpec, a: ActionTriple, model: ModelTables | None = None) -> float:
    """Investment divided by the expected frame length."""
    i = site.index(a)
    p, denom, _ = site_tables(site, model)
    return float(p[i] / denom[i])


def revenue_rate(site: SiteSpec, a: ActionTriple, model: ModelTables | None = None) -> float:
    """Expected revenue divided by the expected frame length."""
    i = site.index(a)
    _, denom, g = site_tables(site, model)
    return float(g[i] / denom[i])


def update_queue(dq: DeficitQueue, delta: float, active_rates: Sequence[float],
                 b_av: float) -> DeficitQueue:
    """Advance the deficit queue over one interval of length ``delta``.

    ``active_rates`` must hold the in-effect consumption rate of every site,
    not only the ones that were just re-decided.
    """
    if not delta > 0:
        raise ValueError(f"interval length must be positive, got {delta}")
    q = max(dq.q - delta * b_av, 0.0) + delta * float(sum(active_rates))
    return DeficitQueue(q, dq.last_update + delta)


@dataclass
class DriftReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_drift_bound(record, spec: SystemSpec, bounds: Bounds,
                       model: ModelTables | None = None, c0: float | None = None) -> DriftReport:
    """Check one recorded decision-point transition against the drift analysis.

    ``record`` needs ``q_before``, ``q_after``, ``A``, ``mu``, ``updating``
    (site positions re-decided at this point) and ``in_effect`` (action index
    per site after the decisions). Checks that the one-step drift of
    ``Q**2/2`` is at most ``c0 - Q*(mu - A)``, that updating sites hold the
    exact psi maximum, and that every other site is within its per-site
    constant of the maximum.
    """
    rep = DriftReport()
    c0 = bounds.c0 if c0 is None else c0
    q, q2 = record.q_before, record.q_after
    drift = 0.5 * q2 * q2 - 0.5 * q * q
    rhs = c0 - q * (record.mu - record.A)
    if drift > rhs + PSI_TOL * max(1.0, abs(rhs)):
        rep.violations.append(f"t={record.t_d}: drift {drift:.6g} > {rhs:.6g}")

    updating = set(record.updating)
    for pos, site in enumerate(spec.sites):
        psi = psi_vector(spec.v, q, *site_tables(site, model))
        best = float(psi.max())
        held = float(psi[record.in_effect[pos]])
        if pos in updating:
            if held != best:
                rep.violations.append(f"t={record.t_d}: site {site.id} psi {held} != max {best}")
        elif held < best - bounds.c1_sites[pos] - PSI_TOL:
            rep.violations.append(
                f"t={record.t_d}: site {site.id} psi {held} below max {best} - c1n")
    return rep
