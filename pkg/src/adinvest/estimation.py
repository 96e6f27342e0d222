"""Controller operation with imperfect knowledge of F and G.

The controller sees multiplicatively perturbed estimates ``f_hat`` and
``g_hat`` while frames are still sampled from the true model. The quality
index ``(rho_g, rho_f)`` bounds the relative error of each estimate.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError, QualityUndefinedError
from .model import Bounds, SiteSpec, SystemSpec

__all__ = [
    "QualityIndex",
    "EstimatedModel",
    "EstimationConfig",
    "ErrorBounds",
    "perturb_model",
    "verify_quality",
    "scaled_budget",
    "error_bounds",
]

_EPS = 1e-12


@dataclass(frozen=True)
class QualityIndex:
    rho_g: float
    rho_f: float

    def __post_init__(self):
        for name in ("rho_g", "rho_f"):
            val = getattr(self, name)
            if not 0 <= val < 1:
                raise ValueError(f"{name} must lie in [0, 1), got {val}")


@dataclass(frozen=True, eq=False)
class EstimatedModel:
    """Per-site estimated F/G arrays keyed by site id."""

    f: Mapping[int, np.ndarray]
    g: Mapping[int, np.ndarray]

    def tables(self, site: SiteSpec) -> tuple[np.ndarray, np.ndarray]:
        return self.f[site.id], self.g[site.id]

    @classmethod
    def exact(cls, spec: SystemSpec) -> "EstimatedModel":
        return cls({s.id: s.f_array.copy() for s in spec.sites},
                   {s.id: s.g_array.copy() for s in spec.sites})


@dataclass(frozen=True)
class EstimationConfig:
    """JSON block ``{rho_g, rho_f, mode, factors?}``.

    ``factors`` (only for ``mode="per_action"``) maps a site id to one
    ``[f_factor, g_factor]`` pair per action.
    """

    rho_g: float
    rho_f: float
    mode: str = "plus"
    factors: Mapping[int, Sequence[Sequence[float]]] | None = None

    def __post_init__(self):
        QualityIndex(self.rho_g, self.rho_f)
        if self.mode not in ("plus", "minus", "per_action"):
            raise ConfigError(f"unknown estimation mode {self.mode!r}")
        if self.mode == "per_action" and not self.factors:
            raise ConfigError("mode 'per_action' needs 'factors'")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EstimationConfig":
        try:
            factors = d.get("factors")
            if factors is not None:
                factors = {int(k): [tuple(map(float, pair)) for pair in v] for k, v in factors.items()}
            return cls(float(d["rho_g"]), float(d["rho_f"]), d.get("mode", "plus"), factors)
        except KeyError as exc:
            raise ConfigError(f"estimation block missing key {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "EstimationConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = {"rho_g": self.rho_g, "rho_f": self.rho_f, "mode": self.mode}
        if self.factors is not None:
            d["factors"] = {str(k): [list(p) for p in v] for k, v in self.factors.items()}
        return d

    def build(self, spec: SystemSpec) -> EstimatedModel:
        return perturb_model(spec, self.rho_g, self.rho_f, self.mode, self.factors)


def perturb_model(spec: SystemSpec, rho_g: float, rho_f: float, mode: str = "plus",
                  factors: Mapping[int, Sequence[Sequence[float]]] | None = None) -> EstimatedModel:
    """Apply static per-action multiplicative errors to the true F/G.

    ``plus`` uses ``(1+rho_f)F`` and ``(1+rho_g)G`` everywhere, ``minus`` the
    opposite signs, ``per_action`` explicit factors. Zero-investment actions
    are left untouched.
    """
    QualityIndex(rho_g, rho_f)
    f_out, g_out = {}, {}
    for site in spec.sites:
        n = len(site.actions)
        if mode == "plus":
            ff, gf = np.full(n, 1.0 + rho_f), np.full(n, 1.0 + rho_g)
        elif mode == "minus":
            ff, gf = np.full(n, 1.0 - rho_f), np.full(n, 1.0 - rho_g)
        elif mode == "per_action":
            if factors is None or site.id not in factors:
                raise ValueError(f"no factors given for site {site.id}")
            arr = np.asarray(factors[site.id], dtype=float)
            if arr.shape != (n, 2):
                raise ValueError(f"site {site.id}: expected {n} (f, g) factor pairs")
            ff, gf = arr[:, 0], arr[:, 1]
        else:
            raise ValueError(f"unknown mode {mode!r}")
        if np.any(np.abs(ff - 1.0) > rho_f + _EPS) or np.any(np.abs(gf - 1.0) > rho_g + _EPS):
            raise ValueError(f"site {site.id}: factor outside [1-rho, 1+rho]")
        zero = site.p_array == 0
        ff = np.where(zero, 1.0, ff)
        gf = np.where(zero, 1.0, gf)
        f_out[site.id] = site.f_array * ff
        g_out[site.id] = site.g_array * gf
    return EstimatedModel(f_out, g_out)


def _rel_err(true: np.ndarray, est: np.ndarray, what: str, site_id) -> float:
    pos = true > 0
    if np.any(est[~pos] != true[~pos]):
        raise QualityUndefinedError(f"site {site_id}: {what} estimate nonzero where true value is zero")
    if not pos.any():
        return 0.0
    return float(np.max(np.abs(est[pos] - true[pos]) / true[pos]))


def verify_quality(spec: SystemSpec, estimated: EstimatedModel) -> QualityIndex:
    """Tightest ``(rho_g, rho_f)`` the estimate satisfies over all actions."""
    rg = rf = 0.0
    for site in spec.sites:
        f_hat, g_hat = estimated.tables(site)
        if len(f_hat) != len(site.actions) or len(g_hat) != len(site.actions):
            raise ValueError(f"site {site.id}: estimate does not match the action set")
        rg = max(rg, _rel_err(site.g_array, np.asarray(g_hat), "G", site.id))
        rf = max(rf, _rel_err(site.f_array, np.asarray(f_hat), "F", site.id))
    if rg >= 1 or rf >= 1:
        raise QualityUndefinedError(f"relative error reaches 1 (rho_g={rg:.4g}, rho_f={rf:.4g})")
    return QualityIndex(rg, rf)


def scaled_budget(b_av: float, rho_f: float) -> float:
    """Budget to feed the controller so the true budget holds under F errors."""
    if not 0 <= rho_f < 1:
        raise ValueError(f"rho_f must lie in [0, 1), got {rho_f}")
    return b_av / (1.0 + rho_f)


@dataclass(frozen=True)
class ErrorBounds:
    c_max_hat: float
    c2: float
    c3: float
    queue_bound: float
    revenue_factor: float
    penalty: float
    gap_v: float

    def lower_bound(self, profit_star: float) -> float:
        """Guaranteed revenue given the optimum of the budget fed to the controller."""
        return self.revenue_factor * profit_star - self.gap_v - self.penalty


def error_bounds(bounds: Bounds, v: float, rho_g: float, rho_f: float, n_sites: int,
                 g_max: float | None = None) -> ErrorBounds:
    """Constants of the imperfect-knowledge guarantee.

    ``bounds.b_av`` should be the budget the controller actually uses.
    """
    QualityIndex(rho_g, rho_f)
    g_max = bounds.g_max if g_max is None else g_max
    rate_hat = sum(p / ((1.0 - rho_f) * t) for p, t in zip(bounds.p_max_sites, bounds.t_min_sites))
    t_hat = (1.0 + rho_f) * bounds.t_max
    c_max_hat = t_hat * max(rate_hat, bounds.b_av)
    c2 = 0.5 * t_hat**2 * (rate_hat**2 + bounds.b_av**2)
    c3 = 2.0 * n_sites * bounds.t_max * c_max_hat * bounds.p_max / ((1.0 - rho_f) * bounds.t_min)
    factor = (1.0 - rho_f) / ((1.0 + rho_f) * (1.0 + rho_g))
    penalty = n_sites * rho_g * g_max / ((1.0 + rho_g) * bounds.t_min)
    gap_v = (c2 + bounds.t_min * c3) * (1.0 - rho_f) / (v * bounds.t_min * (1.0 + rho_g))
    return ErrorBounds(
        c_max_hat=c_max_hat,
        c2=c2,
        c3=c3,
        queue_bound=v * (1.0 + rho_g) * bounds.nu + 2.0 * c_max_hat,
        revenue_factor=factor,
        penalty=penalty,
        gap_v=gap_v,
    )
