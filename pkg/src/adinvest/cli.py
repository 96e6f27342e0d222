"""Command-line entry point.

Subcommands: ``validate``, ``simulate``, ``sweep``, ``oracle``, ``report``.
Exit codes: 0 ok, 1 validation failure, 2 runtime error, 3 bound violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import AdInvestError, ConfigError, SpecValidationError
from .estimation import EstimationConfig, error_bounds, scaled_budget
from .model import (SystemSpec, derive_bounds, dump_spec, load_spec, reference_config_path,
                    validate_spec)
from .oracle import compute_optimal, verify_bounds
from .simulator import SummaryRow, SweepResult, run, sweep

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_BOUND = 0, 1, 2, 3
REFERENCE_V = (5.0, 10.0, 20.0, 50.0, 100.0, 200.0)


@dataclass
class ExperimentConfig:
    config: Path
    v_values: tuple[float, ...] = REFERENCE_V
    horizon: float = 1e6
    replications: int = 10
    seed: int = 42
    estimation: EstimationConfig | None = None
    scaled_budget: bool = False
    out: Path = Path("out")
    workers: int = 1
    spec: SystemSpec | None = field(default=None, repr=False)

    def load(self) -> SystemSpec:
        spec = load_spec(self.config)
        report = validate_spec(spec)
        if not report.ok:
            raise SpecValidationError(report.violations)
        if not self.v_values:
            raise ConfigError("v_values must be nonempty")
        if not self.horizon >= report.bounds.t_max:
            raise ConfigError(f"horizon {self.horizon} < longest frame {report.bounds.t_max}")
        self.spec = spec
        return spec

    def controller_budget(self, spec: SystemSpec) -> float:
        if self.estimation is not None and self.scaled_budget:
            return scaled_budget(spec.b_av, self.estimation.rho_f)
        return spec.b_av


def _parse_bool(text: str) -> bool:
    t = str(text).lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text}")


def _parse_v(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _experiment(args) -> ExperimentConfig:
    est = EstimationConfig.load(args.estimation) if getattr(args, "estimation", None) else None
    return ExperimentConfig(
        config=Path(args.config),
        v_values=args.v,
        horizon=args.horizon,
        replications=getattr(args, "replications", 1),
        seed=args.seed,
        estimation=est,
        scaled_budget=getattr(args, "scaled_budget", False),
        out=Path(args.out),
        workers=getattr(args, "workers", 1),
    )


def _outdir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def _bounds_dict(spec: SystemSpec) -> dict:
    b = derive_bounds(spec)
    d = asdict(b)
    d["queue_bound"] = b.queue_bound(spec.v)
    return d


def cmd_validate(args) -> int:
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        print(f"{args.config}:{exc.lineno}:{exc.colno}: JSON parse error: {exc.msg}",
              file=sys.stderr)
        return EXIT_INVALID
    try:
        spec = load_spec(doc)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = validate_spec(spec)
    if not report.ok:
        for v in report.violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_INVALID
    b = report.bounds
    print(f"valid: {len(spec.sites)} sites, b_av={spec.b_av}, v={spec.v}")
    for name in ("t_min", "t_max", "p_max", "g_max", "nu", "c_max", "c0", "c1", "c1_lemma"):
        print(f"  {name} = {getattr(b, name):.6g}")
    if args.dump_normalized:
        text = dump_spec(spec)
        if args.dump_normalized == "-":
            print(text)
        else:
            Path(args.dump_normalized).write_text(text + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    exp = _experiment(args)
    spec = exp.load()
    v = exp.v_values[0]
    spec_v = spec.with_v(v)
    model = exp.estimation.build(spec_v) if exp.estimation else None
    trace, metrics = run(spec_v, exp.horizon, exp.seed, model=model,
                         budget=exp.controller_budget(spec))
    out = _outdir(exp.out)
    trace.to_csv(out / "trace.csv")
    (out / "metrics.json").write_text(json.dumps(asdict(metrics), indent=2) + "\n")
    print(f"V={v}: profit_av={metrics.profit_av:.6f} expenditure_av={metrics.expenditure_av:.6f} "
          f"avg_q={metrics.avg_q:.4f} frames={metrics.frames_total}")
    return EXIT_OK


def _oracle_values(spec: SystemSpec, exp: ExperimentConfig):
    """profit* at the true budget and at the budget the controller uses."""
    spec_v = spec.with_v(max(exp.v_values))
    full = compute_optimal(spec_v)
    b_ctrl = exp.controller_budget(spec)
    scaled = full if b_ctrl == spec.b_av else compute_optimal(spec_v, b_ctrl)
    return full, scaled


def cmd_sweep(args) -> int:
    exp = _experiment(args)
    spec = exp.load()
    res = sweep(spec, exp.v_values, exp.replications, exp.horizon, exp.seed,
                exp.estimation, exp.scaled_budget, exp.workers)
    full, scaled = _oracle_values(spec, exp)
    out = _outdir(exp.out)
    res.to_csv(out / "summary.csv")
    res.aggregate_to_csv(out / "aggregate.csv", profit_star=full.profit,
                         profit_star_scaled=scaled.profit)
    for a in res.aggregate():
        print(f"V={a.V:g}: profit={a.profit_mean:.6f}±{a.profit_se:.1e} "
              f"spend={a.expenditure_mean:.6f} avg_q={a.avg_q_mean:.3f}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    exp = _experiment(args)
    spec = exp.load()
    full, scaled = _oracle_values(spec, exp)
    out = _outdir(exp.out)
    doc = full.to_dict(spec)
    if scaled is not full:
        doc["scaled"] = scaled.to_dict(spec)
    (out / "policy.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"profit*={full.profit:.9f} (dual bound {full.dual_bound:.9f})")
    if scaled is not full:
        print(f"profit*(b={scaled.b_av:.6g})={scaled.profit:.9f}")
    return EXIT_OK


def _read_summary(path: Path) -> SweepResult:
    rows = []
    with open(path) as fh:
        for d in csv.DictReader(fh):
            rows.append(SummaryRow(float(d["V"]), int(d["replication"]), float(d["profit_av"]),
                                   float(d["expenditure_av"]), float(d["avg_q"]),
                                   float(d["max_q"]), int(d["frames_total"])))
    return SweepResult(rows)


def cmd_report(args) -> int:
    exp = _experiment(args)
    spec = exp.load()
    if args.summary:
        res = _read_summary(Path(args.summary))
    else:
        res = sweep(spec, exp.v_values, exp.replications, exp.horizon, exp.seed,
                    exp.estimation, exp.scaled_budget, exp.workers)
    full, scaled = _oracle_values(spec, exp)
    b_ctrl = exp.controller_budget(spec)
    bounds = derive_bounds(spec.with_budget(b_ctrl))
    out = _outdir(exp.out)
    # unscaled estimation runs are only guaranteed (1 + rho_f) * b_av
    cap = spec.b_av
    if exp.estimation is not None and not exp.scaled_budget:
        cap = (1.0 + exp.estimation.rho_f) * spec.b_av
    entries, ok = [], True
    for v, rows in res.by_v().items():
        eb = None
        if exp.estimation is not None:
            eb = error_bounds(bounds, v, exp.estimation.rho_g, exp.estimation.rho_f,
                              len(spec.sites))
        rep = verify_bounds(scaled.profit, rows, bounds, v, error_bounds=eb,
                            budget_slack=0.0 if eb else 0.005, b_av=cap)
        ok &= rep.ok
        entries.append({"V": v, "ok": rep.ok,
                        "checks": [dict(asdict(c), margin=c.margin) for c in rep.checks]})
        flags = ", ".join(f"{c.name}={'ok' if c.ok else 'FAIL'}" for c in rep.checks)
        print(f"V={v:g}: {flags}")
    doc = {"profit_star": full.profit, "profit_star_controller_budget": scaled.profit,
           "controller_budget": b_ctrl, "budget_cap": cap, "bounds": _bounds_dict(spec),
           "estimation": exp.estimation.to_dict() if exp.estimation else None,
           "per_v": entries, "ok": ok}
    (out / "report.json").write_text(json.dumps(doc, indent=2, default=float) + "\n")
    res.aggregate_to_csv(out / "aggregate.csv", profit_star=full.profit,
                         profit_star_scaled=scaled.profit)
    return EXIT_OK if ok else EXIT_BOUND


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adinvest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, runs=True):
        p.add_argument("--config", default=str(reference_config_path()),
                       help="system JSON (default: bundled two-site benchmark)")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--horizon", type=float, default=1e6)
        p.add_argument("--v", type=_parse_v, default=REFERENCE_V, help="comma-separated V values")
        p.add_argument("--estimation", default=None, help="estimation JSON block")
        p.add_argument("--scaled-budget", type=_parse_bool, nargs="?", const=True,
                       default=False, dest="scaled_budget")
        p.add_argument("--out", default="out")
        if runs:
            p.add_argument("--replications", type=int, default=10)
            p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("validate", help="check a config and print derived bounds")
    p.add_argument("--config", default=str(reference_config_path()))
    p.add_argument("--dump-normalized", nargs="?", const="-", default=None, metavar="PATH")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="single run, writes trace.csv and metrics.json")
    common(p, runs=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="V sweep, writes summary.csv and aggregate.csv")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="optimal stationary policy, writes policy.json")
    common(p, runs=False)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="sweep + oracle + bound checks, writes report.json")
    common(p)
    p.add_argument("--summary", default=None, help="reuse an existing summary.csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpecValidationError, ConfigError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (AdInvestError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
