"""System model: sites, actions, expected duration/revenue maps and bound constants.

A site runs a sequence of frames. Each frame starts with an investment ``p``
under configuration ``m`` that is depleted over a random advertising interval
(mean ``F(p, m)``), followed by a deterministic freeze of length ``t_freeze``.
The revenue earned during the advertising interval has mean ``G(p, m)``.

Action sets are finite. ``F`` and ``G`` come either from the closed forms

    F(p, m) = kappa * p / m
    G(p, m) = gamma * sqrt(p / m) * m**q

or from an explicit per-(p, m) table, and are resolved to per-action values
when the site is built.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Hashable, Iterable, Mapping

import numpy as np

from .errors import ConfigError, DegenerateFrameError, InvalidActionError

__all__ = [
    "ActionTriple",
    "Noise",
    "SiteSpec",
    "SystemSpec",
    "Bounds",
    "ValidationReport",
    "closed_form_site",
    "table_site",
    "cross_actions",
    "eval_F",
    "eval_G",
    "derive_bounds",
    "validate_spec",
    "spec_from_dict",
    "spec_to_dict",
    "load_spec",
    "dump_spec",
    "reference_system",
]


@dataclass(frozen=True)
class ActionTriple:
    """One (investment, freeze duration, configuration) choice."""

    p: float
    t_freeze: float
    m: Hashable

    def __post_init__(self):
        if not self.p >= 0:
            raise ValueError(f"investment must be >= 0, got {self.p}")
        if not self.t_freeze >= 0:
            raise ValueError(f"freeze duration must be >= 0, got {self.t_freeze}")


@dataclass(frozen=True)
class Noise:
    """Relative half-widths of the uniform noise around mean duration/revenue."""

    duration_halfwidth: float = 0.0
    revenue_halfwidth: float = 0.0


def cross_actions(feasible: Iterable[tuple[float, float]], configs: Iterable[Hashable]):
    """Cross product of (p, t_freeze) pairs and configurations, pairs outermost."""
    configs = list(configs)
    return tuple(ActionTriple(float(p), float(t), m) for p, t in feasible for m in configs)


@dataclass(frozen=True)
class SiteSpec:
    """A renewal site with a finite action list and cached F/G per action.

    ``f_values[i]`` and ``g_values[i]`` are the expected advertising duration
    and expected revenue of ``actions[i]``. ``form`` keeps the source of the
    F/G maps (closed-form parameters or a table) for serialization.
    """

    id: int
    actions: tuple[ActionTriple, ...]
    f_values: tuple[float, ...]
    g_values: tuple[float, ...]
    noise: Noise = Noise()
    form: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (len(self.actions) == len(self.f_values) == len(self.g_values)):
            raise ValueError("actions, f_values and g_values must have equal length")

    @cached_property
    def _fg(self) -> dict:
        return {(a.p, a.m): (f, g) for a, f, g in zip(self.actions, self.f_values, self.g_values)}

    @cached_property
    def p_array(self) -> np.ndarray:
        return np.array([a.p for a in self.actions], dtype=float)

    @cached_property
    def freeze_array(self) -> np.ndarray:
        return np.array([a.t_freeze for a in self.actions], dtype=float)

    @cached_property
    def f_array(self) -> np.ndarray:
        return np.array(self.f_values, dtype=float)

    @cached_property
    def g_array(self) -> np.ndarray:
        return np.array(self.g_values, dtype=float)

    def index(self, action: ActionTriple) -> int:
        """Position of ``action`` in the declared action list."""
        try:
            return self.actions.index(action)
        except ValueError:
            raise InvalidActionError(f"site {self.id}: {action} is not a feasible action") from None

    def min_frame(self) -> np.ndarray:
        """Shortest realizable frame length per action."""
        return (1.0 - self.noise.duration_halfwidth) * self.f_array + self.freeze_array

    def max_frame(self) -> np.ndarray:
        """Longest realizable frame length per action."""
        return (1.0 + self.noise.duration_halfwidth) * self.f_array + self.freeze_array


def _closed_f(kappa, p, m):
    return 0.0 if p == 0 else kappa * p / m


def _closed_g(gamma, q, p, m):
    return 0.0 if p == 0 else gamma * math.sqrt(p / m) * m**q


def closed_form_site(id, kappa, gamma, q, actions, noise=Noise()) -> SiteSpec:
    """Site whose F/G follow the closed forms ``kappa*p/m`` and ``gamma*sqrt(p/m)*m**q``."""
    actions = tuple(actions)
    for a in actions:
        if a.p > 0 and not (isinstance(a.m, (int, float)) and a.m > 0):
            raise ConfigError(f"site {id}: closed-form site needs numeric m > 0, got {a.m!r}")
    f = tuple(_closed_f(kappa, a.p, a.m) for a in actions)
    g = tuple(_closed_g(gamma, q, a.p, a.m) for a in actions)
    form = {"kappa": kappa, "gamma": gamma, "q": q}
    return SiteSpec(id=id, actions=actions, f_values=f, g_values=g, noise=noise, form=form)


def table_site(id, table: Mapping[tuple[float, Hashable], tuple[float, float]], actions,
               noise=Noise()) -> SiteSpec:
    """Site whose F/G are looked up in ``table[(p, m)] = (F, G)``."""
    actions = tuple(actions)
    f, g = [], []
    for a in actions:
        try:
            fv, gv = table[(a.p, a.m)]
        except KeyError:
            raise ConfigError(f"site {id}: no table entry for p={a.p}, m={a.m!r}") from None
        f.append(float(fv))
        g.append(float(gv))
    form = {"table": [{"p": p, "m": m, "F": fv, "G": gv} for (p, m), (fv, gv) in table.items()]}
    return SiteSpec(id=id, actions=actions, f_values=tuple(f), g_values=tuple(g),
                    noise=noise, form=form)


@dataclass(frozen=True)
class SystemSpec:
    """Sites plus the average budget ``b_av`` and the tradeoff parameter ``v``."""

    sites: tuple[SiteSpec, ...]
    b_av: float
    v: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))

    def with_v(self, v: float) -> "SystemSpec":
        return replace(self, v=float(v))

    def with_budget(self, b_av: float) -> "SystemSpec":
        return replace(self, b_av=float(b_av))

    def site(self, site_id: int) -> SiteSpec:
        for s in self.sites:
            if s.id == site_id:
                return s
        raise KeyError(site_id)


def _lookup(site: SiteSpec, p, m) -> tuple[float, float]:
    try:
        return site._fg[(p, m)]
    except KeyError:
        raise InvalidActionError(f"site {site.id}: (p={p}, m={m!r}) is not in the action set") from None


def eval_F(site: SiteSpec, p, m) -> float:
    """Expected advertising-interval duration for investment ``p`` under ``m``."""
    return _lookup(site, p, m)[0]


def eval_G(site: SiteSpec, p, m) -> float:
    """Expected revenue of one advertising interval."""
    return _lookup(site, p, m)[1]


@dataclass(frozen=True)
class Bounds:
    """Constants derived from the finite action sets.

    Per-site quantities are tuples aligned with ``SystemSpec.sites``.
    ``c1`` sums the per-site constants ``c1_sites``; ``c1_lemma`` is the
    smaller constant without the ``c_max`` factor, kept for comparison.
    """

    t_min: float
    t_max: float
    p_max: float
    g_max: float
    nu: float
    c_max: float
    c0: float
    c1: float
    c1_lemma: float
    b_av: float
    t_min_sites: tuple[float, ...]
    t_max_sites: tuple[float, ...]
    p_max_sites: tuple[float, ...]
    c1_sites: tuple[float, ...]

    @property
    def rate_max(self) -> float:
        """Largest aggregate consumption rate, sum of p_max_n / t_min_n."""
        return sum(p / t for p, t in zip(self.p_max_sites, self.t_min_sites))

    def queue_bound(self, v: float) -> float:
        """Deterministic ceiling on the deficit queue under exact knowledge."""
        return v * self.nu + 2.0 * self.c_max

    def revenue_gap(self, v: float) -> float:
        """Worst-case revenue shortfall ``c1/v + c0/(v*t_min)``."""
        return self.c1 / v + self.c0 / (v * self.t_min)


def derive_bounds(spec: SystemSpec) -> Bounds:
    """Scan every action of every site and compute the bound constants."""
    t_min_s, t_max_s, p_max_s = [], [], []
    g_max, nu = 0.0, 0.0
    for site in spec.sites:
        lo, hi = site.min_frame(), site.max_frame()
        bad = np.flatnonzero(~(lo > 0))
        if bad.size:
            raise DegenerateFrameError(
                f"site {site.id}: action {site.actions[bad[0]]} has zero-length realizable frame")
        if not np.all(np.isfinite(hi)):
            raise DegenerateFrameError(f"site {site.id}: unbounded frame length")
        t_min_s.append(float(lo.min()))
        t_max_s.append(float(hi.max()))
        p = site.p_array
        p_max_s.append(float(p.max()))
        g_max = max(g_max, float(site.g_array.max()))
        pos = p > 0
        if pos.any():
            nu = max(nu, float(np.max(site.g_array[pos] / p[pos])))

    t_min, t_max = min(t_min_s), max(t_max_s)
    b = spec.b_av
    rate_max = sum(p / t for p, t in zip(p_max_s, t_min_s))
    c_max = t_max * max(rate_max, b)
    c0 = 0.5 * t_max**2 * (rate_max**2 + b**2)
    c1_sites = tuple(2.0 * t_max * c_max * p / t for p, t in zip(p_max_s, t_min_s))
    return Bounds(
        t_min=t_min,
        t_max=t_max,
        p_max=max(p_max_s),
        g_max=g_max,
        nu=nu,
        c_max=c_max,
        c0=c0,
        c1=sum(c1_sites),
        c1_lemma=2.0 * t_max * rate_max,
        b_av=b,
        t_min_sites=tuple(t_min_s),
        t_max_sites=tuple(t_max_s),
        p_max_sites=tuple(p_max_s),
        c1_sites=c1_sites,
    )


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]
    bounds: Bounds | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_spec(spec: SystemSpec) -> ValidationReport:
    """Check the standing model assumptions; never raises on a bad spec."""
    out = []
    if not spec.sites:
        out.append("at least one site is required")
    if not spec.b_av > 0:
        out.append(f"b_av must be positive (got {spec.b_av})")
    if not spec.v >= 1:
        out.append(f"v must be >= 1 (got {spec.v})")
    ids = [s.id for s in spec.sites]
    if len(set(ids)) != len(ids):
        out.append("site ids must be unique")

    for site in spec.sites:
        tag = f"site {site.id}"
        if not site.actions:
            out.append(f"{tag}: empty action set")
            continue
        if len(set(site.actions)) != len(site.actions):
            out.append(f"{tag}: duplicate actions")
        if not any(a.p == 0 for a in site.actions):
            out.append(f"{tag}: missing zero-investment option")
        f, g = site.f_array, site.g_array
        zero = site.p_array == 0
        if np.any(g[zero] != 0):
            out.append(f"{tag}: G(0,·) ≠ 0")
        if np.any(f[zero] != 0):
            out.append(f"{tag}: F(0,·) ≠ 0")
        if np.any(~(g >= 0)):
            out.append(f"{tag}: negative expected revenue")
        if np.any(~(f >= 0)):
            out.append(f"{tag}: negative expected duration")
        dh, rh = site.noise.duration_halfwidth, site.noise.revenue_halfwidth
        if not (0 <= dh < 1 and 0 <= rh < 1):
            out.append(f"{tag}: noise half-widths must lie in [0, 1)")
            continue
        if np.any(~(site.min_frame() > 0)):
            out.append(f"{tag}: zero-length realizable frame")
        if np.any(~np.isfinite(site.max_frame())):
            out.append(f"{tag}: unbounded frame length")

    bounds = None
    if spec.sites and not out:
        bounds = derive_bounds(spec)
    return ValidationReport(tuple(out), bounds)


# -- JSON ---------------------------------------------------------------------

def _site_from_dict(d: Mapping[str, Any], pos: int) -> SiteSpec:
    try:
        sid = int(d.get("id", pos))
        noise_d = d.get("noise", {}) or {}
        noise = Noise(float(noise_d.get("duration_halfwidth", 0.0)),
                      float(noise_d.get("revenue_halfwidth", 0.0)))
        if "actions" in d:
            actions = tuple(ActionTriple(float(a["p"]), float(a["t_freeze"]), a["m"])
                            for a in d["actions"])
        elif "feasible" in d:
            actions = cross_actions(d["feasible"], d["configs"])
        else:
            raise ConfigError(f"site {sid}: needs 'actions' or 'feasible' + 'configs'")
        if "table" in d:
            table = {(float(e["p"]), e["m"]): (float(e["F"]), float(e["G"])) for e in d["table"]}
            return table_site(sid, table, actions, noise)
        return closed_form_site(sid, float(d["kappa"]), float(d["gamma"]), float(d["q"]),
                                actions, noise)
    except KeyError as exc:
        raise ConfigError(f"site at position {pos}: missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"site at position {pos}: {exc}") from None


def spec_from_dict(d: Mapping[str, Any]) -> SystemSpec:
    """Build a spec from the JSON document structure."""
    if "sites" not in d or "b_av" not in d:
        raise ConfigError("config needs 'sites' and 'b_av'")
    sites = tuple(_site_from_dict(s, i) for i, s in enumerate(d["sites"]))
    return SystemSpec(sites=sites, b_av=float(d["b_av"]), v=float(d.get("v", 1.0)))


def spec_to_dict(spec: SystemSpec) -> dict:
    """Normalized JSON structure: explicit action lists, resolved forms."""
    sites = []
    for s in spec.sites:
        d = {"id": s.id}
        d.update({k: v for k, v in s.form.items() if k != "table"})
        d["actions"] = [{"p": a.p, "t_freeze": a.t_freeze, "m": a.m} for a in s.actions]
        if "table" in s.form:
            d["table"] = [dict(e) for e in s.form["table"]]
        d["noise"] = {"duration_halfwidth": s.noise.duration_halfwidth,
                      "revenue_halfwidth": s.noise.revenue_halfwidth}
        sites.append(d)
    return {"b_av": spec.b_av, "v": spec.v, "sites": sites}


def load_spec(source: str | Path | Mapping) -> SystemSpec:
    """Load a spec from a JSON file path or an already-parsed mapping."""
    if isinstance(source, Mapping):
        return spec_from_dict(source)
    with open(source) as fh:
        return spec_from_dict(json.load(fh))


def dump_spec(spec: SystemSpec, path: str | Path | None = None) -> str:
    text = json.dumps(spec_to_dict(spec), indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def reference_config_path() -> Path:
    return Path(str(resources.files("adinvest") / "data" / "reference_config.json"))


def reference_system(v: float = 20.0) -> SystemSpec:
    """The two-site benchmark: kappa=(1,2), gamma=(1,2), q=0.2, b_av=0.2, ±20% noise."""
    return load_spec(reference_config_path()).with_v(v)
