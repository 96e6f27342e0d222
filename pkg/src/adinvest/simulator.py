"""Discrete-event simulation of the asynchronous controller.

Every site starts a frame at ``t = 0`` with an empty deficit queue. The next
decision point is always the earliest pending frame end; the sites whose
frames end there are re-decided against the queue value at that instant.
Revenue and investment are credited when a frame completes, and metrics
use completed frames only.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .controller import Decision, psi_vector, site_tables
from .errors import InsufficientHorizonError, SpecValidationError
from .estimation import EstimationConfig, scaled_budget
from .model import ActionTriple, SiteSpec, SystemSpec, validate_spec

__all__ = [
    "SiteState",
    "DecisionRecord",
    "FrameRecord",
    "Trace",
    "Metrics",
    "SummaryRow",
    "SweepResult",
    "site_rng",
    "sample_frame",
    "run",
    "compute_metrics",
    "sweep",
    "TRACE_COLUMNS",
    "SUMMARY_COLUMNS",
    "AGGREGATE_COLUMNS",
]

TRACE_COLUMNS = ("t_d", "delta", "site", "p", "t_freeze", "m", "q_before", "q_after",
                 "A", "mu", "actual_T_ad", "actual_R")
SUMMARY_COLUMNS = ("V", "replication", "profit_av", "expenditure_av", "avg_q", "max_q",
                   "frames_total")
AGGREGATE_COLUMNS = ("V", "replications", "profit_mean", "profit_se", "expenditure_mean",
                     "expenditure_max", "avg_q_mean", "max_q_max", "profit_star",
                     "profit_star_scaled")


class _UniformStream:
    """Buffered U[0, 1) draws from one seeded generator."""

    def __init__(self, gen: np.random.Generator, block: int = 4096):
        self._gen = gen
        self._block = block
        self._buf: list[float] = []
        self._i = 0

    def random(self) -> float:
        if self._i == len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return u


def site_rng(seed, site_id: int) -> np.random.Generator:
    """Independent generator for one site; unaffected by other sites' ids."""
    entropy = list(seed) if isinstance(seed, (tuple, list)) else seed
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(int(site_id),)))


def sample_frame(site: SiteSpec, action: ActionTriple, rng) -> tuple[float, float]:
    """Draw (advertising duration, revenue) for one frame from the true model.

    Both are uniform on ``[(1-h)*mean, (1+h)*mean]`` with the site's noise
    half-widths, drawn independently of each other.
    """
    i = site.index(action)
    return _draw(site.f_values[i], site.g_values[i], site.noise.duration_halfwidth,
                 site.noise.revenue_halfwidth, rng)


def _draw(f, g, dh, rh, rng):
    u1 = rng.random()
    u2 = rng.random()
    return f * (1.0 - dh + 2.0 * dh * u1), g * (1.0 - rh + 2.0 * rh * u2)


@dataclass
class SiteState:
    """Frame bookkeeping for one site."""

    index: int = -1
    frame_start: float = 0.0
    t_ad: float = 0.0
    ad_end: float = 0.0
    frame_end: float = 0.0
    k: int = 0
    revenue: float = 0.0
    expenditure: float = 0.0
    frame_time: float = 0.0
    pending_revenue: float = 0.0


@dataclass(frozen=True)
class DecisionRecord:
    """One decision point and the interval that follows it.

    ``updating`` holds site positions re-decided here, ``in_effect`` the
    action index every site runs during ``[t_d, t_d + delta)``, and
    ``samples`` the drawn (duration, revenue) of each new frame.
    """

    t_d: float
    delta: float
    updating: tuple[int, ...]
    decisions: tuple[Decision, ...]
    samples: tuple[tuple[float, float], ...]
    in_effect: tuple[int, ...]
    q_before: float
    q_after: float
    A: float
    mu: float


@dataclass(frozen=True)
class FrameRecord:
    site: int
    start: float
    index: int
    p: float
    t_freeze: float
    t_ad: float
    revenue: float

    @property
    def length(self) -> float:
        return self.t_ad + self.t_freeze


@dataclass
class Trace:
    site_ids: tuple[int, ...]
    actions: tuple[tuple[ActionTriple, ...], ...]
    horizon: float
    v: float
    b_av: float
    records: list[DecisionRecord] = field(default_factory=list)
    frames: list[FrameRecord] = field(default_factory=list)

    @property
    def end_time(self) -> float:
        """Last decision point covered by the recorded intervals."""
        if not self.records:
            return 0.0
        last = self.records[-1]
        return last.t_d + last.delta

    def rows(self):
        for r in self.records:
            for pos, dec, (t_ad, rev) in zip(r.updating, r.decisions, r.samples):
                a = dec.action
                yield (r.t_d, r.delta, self.site_ids[pos], a.p, a.t_freeze, a.m,
                       r.q_before, r.q_after, r.A, r.mu, t_ad, rev)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in self.rows():
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


@dataclass(frozen=True)
class Metrics:
    profit_av: float
    expenditure_av: float
    avg_q: float
    max_q: float
    horizon: float
    frames_total: int
    v: float
    profit_sites: tuple[float, ...] = ()
    expenditure_sites: tuple[float, ...] = ()
    frames_sites: tuple[int, ...] = ()


def run(spec: SystemSpec, horizon: float, seed=42, *, model=None,
        budget: float | None = None) -> tuple[Trace, Metrics]:
    """Simulate the controller on ``spec`` over ``[0, horizon]``.

    ``model`` supplies the (possibly estimated) F/G used for decisions and
    for the queue; frames are always drawn from the true model. ``budget``
    replaces ``spec.b_av`` in the queue's service term only.
    """
    report = validate_spec(spec)
    if not report.ok:
        raise SpecValidationError(report.violations)
    bounds = report.bounds
    if not horizon >= bounds.t_max:
        raise InsufficientHorizonError(
            f"horizon {horizon} shorter than the longest frame {bounds.t_max}")

    sites = spec.sites
    n = len(sites)
    v = spec.v
    b_ctrl = spec.b_av if budget is None else float(budget)
    tabs = [site_tables(s, model) for s in sites]
    rates = [(p / d).tolist() for p, d, _ in tabs]
    true_f = [s.f_values for s in sites]
    true_g = [s.g_values for s in sites]
    freeze = [[a.t_freeze for a in s.actions] for s in sites]
    invest = [[a.p for a in s.actions] for s in sites]
    noise = [(s.noise.duration_halfwidth, s.noise.revenue_halfwidth) for s in sites]
    rngs = [_UniformStream(site_rng(seed, s.id)) for s in sites]

    trace = Trace(tuple(s.id for s in sites), tuple(s.actions for s in sites),
                  float(horizon), v, spec.b_av)
    states = [SiteState() for _ in sites]
    t, q = 0.0, 0.0
    updating = list(range(n))
    while True:
        decisions, samples = [], []
        for pos in updating:
            psi = psi_vector(v, q, *tabs[pos])
            i = int(np.argmax(psi))
            dh, rh = noise[pos]
            t_ad, rev = _draw(true_f[pos][i], true_g[pos][i], dh, rh, rngs[pos])
            st = states[pos]
            st.index, st.frame_start = i, t
            st.t_ad = t_ad
            st.ad_end = t + t_ad
            st.frame_end = st.ad_end + freeze[pos][i]
            st.pending_revenue = rev
            decisions.append(Decision(sites[pos].id, i, sites[pos].actions[i], float(psi[i]), q))
            samples.append((t_ad, rev))

        t_next = min(st.frame_end for st in states)
        if t_next > horizon:
            break
        delta = t_next - t
        a_sum = 0.0
        for pos in range(n):
            a_sum += rates[pos][states[pos].index]
        A = delta * a_sum
        mu = delta * b_ctrl
        q_next = max(q - mu, 0.0) + A
        trace.records.append(DecisionRecord(
            t, delta, tuple(updating), tuple(decisions), tuple(samples),
            tuple(st.index for st in states), q, q_next, A, mu))

        t, q = t_next, q_next
        updating = [pos for pos in range(n) if states[pos].frame_end == t]
        for pos in updating:
            st = states[pos]
            i = st.index
            length = st.frame_end - st.frame_start
            st.k += 1
            st.revenue += st.pending_revenue
            st.expenditure += invest[pos][i]
            st.frame_time += length
            trace.frames.append(FrameRecord(sites[pos].id, st.frame_start, i, invest[pos][i],
                                            freeze[pos][i], st.t_ad,
                                            st.pending_revenue))

    return trace, compute_metrics(trace)


def compute_metrics(trace: Trace) -> Metrics:
    """Ratio-of-sums metrics over completed frames, summed across sites."""
    n = len(trace.site_ids)
    pos_of = {sid: i for i, sid in enumerate(trace.site_ids)}
    rev = np.zeros(n)
    inv = np.zeros(n)
    length = np.zeros(n)
    count = np.zeros(n, dtype=int)
    for fr in trace.frames:
        i = pos_of[fr.site]
        rev[i] += fr.revenue
        inv[i] += fr.p
        length[i] += fr.length
        count[i] += 1

    profit_s, spend_s = [], []
    for i in range(n):
        if count[i] == 0:
            warnings.warn(f"site {trace.site_ids[i]} has no completed frames; excluded")
            profit_s.append(0.0)
            spend_s.append(0.0)
            continue
        profit_s.append(float(rev[i] / length[i]))
        spend_s.append(float(inv[i] / length[i]))

    if trace.records:
        q = np.array([r.q_before for r in trace.records])
        d = np.array([r.delta for r in trace.records])
        avg_q = float(np.dot(q, d) / d.sum())
        max_q = max(float(q.max()), trace.records[-1].q_after)
    else:
        avg_q = max_q = 0.0
    return Metrics(
        profit_av=float(sum(profit_s)),
        expenditure_av=float(sum(spend_s)),
        avg_q=avg_q,
        max_q=max_q,
        horizon=trace.horizon,
        frames_total=int(count.sum()),
        v=trace.v,
        profit_sites=tuple(profit_s),
        expenditure_sites=tuple(spend_s),
        frames_sites=tuple(int(c) for c in count),
    )


# -- sweeps ---------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    V: float
    replication: int
    profit_av: float
    expenditure_av: float
    avg_q: float
    max_q: float
    frames_total: int


@dataclass(frozen=True)
class AggregateRow:
    V: float
    replications: int
    profit_mean: float
    profit_se: float
    expenditure_mean: float
    expenditure_max: float
    avg_q_mean: float
    max_q_max: float
    profit_star: float = math.nan
    profit_star_scaled: float = math.nan


def _write_csv(rows, columns, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        d = asdict(r)
        w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in columns])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


@dataclass
class SweepResult:
    rows: list[SummaryRow]
    estimation: EstimationConfig | None = None
    scaled: bool = False

    def by_v(self) -> dict[float, list[SummaryRow]]:
        out: dict[float, list[SummaryRow]] = {}
        for r in self.rows:
            out.setdefault(r.V, []).append(r)
        return out

    def aggregate(self, profit_star: float = math.nan,
                  profit_star_scaled: float = math.nan) -> list[AggregateRow]:
        agg = []
        for v, rows in self.by_v().items():
            prof = np.array([r.profit_av for r in rows])
            spend = np.array([r.expenditure_av for r in rows])
            se = float(prof.std(ddof=1) / math.sqrt(len(prof))) if len(prof) > 1 else 0.0
            agg.append(AggregateRow(
                V=v, replications=len(rows), profit_mean=float(prof.mean()), profit_se=se,
                expenditure_mean=float(spend.mean()), expenditure_max=float(spend.max()),
                avg_q_mean=float(np.mean([r.avg_q for r in rows])),
                max_q_max=float(max(r.max_q for r in rows)),
                profit_star=profit_star, profit_star_scaled=profit_star_scaled))
        return agg

    def to_csv(self, path=None) -> str:
        return _write_csv(self.rows, SUMMARY_COLUMNS, path)

    def aggregate_to_csv(self, path=None, **kw) -> str:
        return _write_csv(self.aggregate(**kw), AGGREGATE_COLUMNS, path)


def _job(args) -> SummaryRow:
    spec, v, rep, horizon, seed, est, scaled = args
    spec_v = spec.with_v(v)
    model = est.build(spec_v) if est is not None else None
    budget = scaled_budget(spec.b_av, est.rho_f) if (est is not None and scaled) else None
    _, m = run(spec_v, horizon, seed, model=model, budget=budget)
    return SummaryRow(float(v), rep, m.profit_av, m.expenditure_av, m.avg_q, m.max_q,
                      m.frames_total)


def sweep(spec: SystemSpec, v_values: Sequence[float], replications: int = 10,
          horizon: float = 1e6, base_seed: int = 42, estimation: EstimationConfig | None = None,
          scaled: bool = False, workers: int = 1) -> SweepResult:
    """Run every (V, replication) pair with its own seed ``(base_seed, V index, rep)``.

    Runs are independent; ``workers > 1`` dispatches them to a process pool.
    Rows come back in (V, replication) order regardless of scheduling.
    """
    if not len(v_values):
        raise ValueError("v_values must be nonempty")
    jobs = [(spec, float(v), rep, horizon, (base_seed, vi, rep), estimation, scaled)
            for vi, v in enumerate(v_values) for rep in range(replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_job, jobs))
    else:
        rows = [_job(j) for j in jobs]
    return SweepResult(rows, estimation, scaled)
