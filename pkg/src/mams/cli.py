"""Command-line front end: analyze, simulate, sweep and validate system specs.

Exit codes: 0 success, 1 usage or parse error, 2 domain error
(instability, reducibility, bad parameters), 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .bounds import MamsSystem, build_system, drift_self_check
from .bounds import bounds as queue_bounds
from .two_level import analyze_two_level, e_q_bounds, empty_prob_bounds
from .chain import analyze, validate
from .errors import (
    ConfigError,
    DomainError,
    EstimationError,
    MamsError,
    NumericalError,
    OracleBudgetError,
    SelfCheckError,
    SpecError,
    StructuralError,
)
from .relative import drift_residuals, solve_relative
from .simulator import SimConfig, SimReport, derive_run_seed, simulate
from .specfile import SystemSpec, load_spec, loads_spec, sweep_points

DEFAULT_SEED = 1
DEFAULT_EVENTS = 1_000_000
DEFAULT_WARMUP = 0.05
DEFAULT_BATCHES = 20

CSV_HEADER = [
    "param",
    "lambda",
    "mu",
    "rho",
    "lower",
    "upper_fast",
    "upper_slow",
    "upper",
    "heavy_traffic_const",
    "sim_mean",
    "sim_ci",
    "error",
]

_PRESETS = {"fig4": "fig4.spec", "fig5": "fig5_a.spec", "fig6": "fig6.spec"}


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    return f"{x:.12g}"


@dataclass
class SweepRow:
    param: float | None
    lam: float | None = None
    mu: float | None = None
    rho: float | None = None
    lower: float | None = None
    upper_fast: float | None = None
    upper_slow: float | None = None
    upper: float | None = None
    heavy_traffic_const: float | None = None
    sim_mean: float | None = None
    sim_ci: float | None = None
    error: str = ""

    def as_csv_fields(self) -> list[str]:
        return [
            _fmt(self.param),
            _fmt(self.lam),
            _fmt(self.mu),
            _fmt(self.rho),
            _fmt(self.lower),
            _fmt(self.upper_fast),
            _fmt(self.upper_slow),
            _fmt(self.upper),
            _fmt(self.heavy_traffic_const),
            _fmt(self.sim_mean),
            _fmt(self.sim_ci),
            self.error,
        ]


@dataclass
class PointResult:
    """Bounds for one system, two-level ones when available."""

    lam: float
    mu: float
    rho: float
    lower: float
    upper_fast: float
    upper_slow: float | None
    upper: float
    heavy_traffic_const: float
    system: MamsSystem


def evaluate_point(spec: SystemSpec) -> PointResult:
    """Build the system and compute the tightest available bounds."""
    arrival_chain, completion_chain = spec.chains()
    system = build_system(arrival_chain, completion_chain)
    qb = queue_bounds(system)
    if spec.is_two_level:
        analysis = analyze_two_level(spec.two_level)
        tb = e_q_bounds(spec.two_level, analysis)
        return PointResult(
            lam=system.lam,
            mu=system.mu,
            rho=system.rho,
            lower=tb.lower,
            upper_fast=tb.upper_fast,
            upper_slow=tb.upper_slow,
            upper=tb.upper,
            heavy_traffic_const=qb.heavy_traffic_constant,
            system=system,
        )
    return PointResult(
        lam=system.lam,
        mu=system.mu,
        rho=system.rho,
        lower=qb.lower,
        upper_fast=qb.upper,
        upper_slow=None,
        upper=qb.upper,
        heavy_traffic_const=qb.heavy_traffic_constant,
        system=system,
    )


def make_sim_config(spec: SystemSpec, args, seed: int | None = None) -> SimConfig:
    """Resolve simulation settings: defaults, then spec block, then flags."""
    sim = dict(spec.sim_overrides)
    if args.seed is not None:
        sim["seed"] = args.seed
    if args.events is not None:
        sim["num_events"] = args.events
    if args.warmup is not None:
        sim["warmup_fraction"] = args.warmup
    if args.batches is not None:
        sim["num_batches"] = args.batches
    if seed is not None:
        sim["seed"] = seed
    return SimConfig(
        seed=int(sim.get("seed", DEFAULT_SEED)),
        num_events=int(sim.get("num_events", DEFAULT_EVENTS)),
        warmup_fraction=float(sim.get("warmup_fraction", DEFAULT_WARMUP)),
        num_batches=int(sim.get("num_batches", DEFAULT_BATCHES)),
        initial_state=tuple(sim.get("initial_state", (0, 0, 0))),
    )


def run_sweep(spec: SystemSpec, args) -> list[SweepRow]:
    """Evaluate and simulate every sweep point; failures become row errors."""
    base_seed = args.seed
    if base_seed is None:
        base_seed = int(spec.sim_overrides.get("seed", DEFAULT_SEED))
    rows: list[SweepRow] = []
    for index, (value, point) in enumerate(sweep_points(spec)):
        row = SweepRow(param=value)
        try:
            result = evaluate_point(point)
            row.lam, row.mu, row.rho = result.lam, result.mu, result.rho
            row.lower, row.upper = result.lower, result.upper
            row.upper_fast, row.upper_slow = result.upper_fast, result.upper_slow
            row.heavy_traffic_const = result.heavy_traffic_const
            config = make_sim_config(point, args, seed=derive_run_seed(base_seed, index))
            report = simulate(result.system, config)
            row.sim_mean = report.e_q.mean
            row.sim_ci = report.e_q.ci_half_width
        except MamsError as exc:
            row.error = str(exc)
        rows.append(row)
    return rows


def _write_csv(rows: list[SweepRow], out_path: str | None) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_csv_fields())
    text = buffer.getvalue()
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args) -> SystemSpec:
    if args.preset:
        text = resources.files("mams").joinpath("presets", _PRESETS[args.preset]).read_text()
        return loads_spec(text, source=f"preset {args.preset}")
    if not args.spec:
        raise SpecError("a spec file or --preset is required")
    return load_spec(args.spec)


def _print_analysis(spec: SystemSpec, structured: bool) -> None:
    result = evaluate_point(spec)
    system = result.system
    arr, comp = system.arrival, system.completion
    qb = queue_bounds(system)
    if structured:
        report = {
            "lambda": system.lam,
            "mu": system.mu,
            "rho": system.rho,
            "relative_arrivals": dict(zip(arr.chain.states, arr.relative.delta.tolist())),
            "relative_completions": dict(zip(comp.chain.states, comp.relative.delta.tolist())),
            "e_delta_arrival_weighted": qb.e_delta_arrival_weighted,
            "e_delta_comp_weighted": qb.e_delta_comp_weighted,
            "explicit_term": qb.explicit_term,
            "lower": result.lower,
            "upper": result.upper,
            "upper_fast": result.upper_fast,
            "upper_slow": result.upper_slow,
            "heavy_traffic_constant": result.heavy_traffic_const,
        }
        print(json.dumps(report, indent=2))
        return
    print(f"lambda = {_fmt(system.lam)}")
    print(f"mu     = {_fmt(system.mu)}")
    print(f"rho    = {_fmt(system.rho)}")
    deltas = ", ".join(f"{s}={_fmt(v)}" for s, v in zip(arr.chain.states, arr.relative.delta))
    print(f"relative arrivals:    {deltas}")
    deltas = ", ".join(f"{s}={_fmt(v)}" for s, v in zip(comp.chain.states, comp.relative.delta))
    print(f"relative completions: {deltas}")
    print(f"E[delta_A at arrival-weighted state]    = {_fmt(qb.e_delta_arrival_weighted)}")
    print(f"E[delta_C at completion-weighted state] = {_fmt(qb.e_delta_comp_weighted)}")
    print(f"explicit term            = {_fmt(qb.explicit_term)}")
    print(f"mean queue length bounds = [{_fmt(result.lower)}, {_fmt(result.upper)}]")
    if result.upper_slow is not None:
        print(f"  two-level uppers: fast = {_fmt(result.upper_fast)}, slow = {_fmt(result.upper_slow)}")
    elif spec.is_two_level:
        print(f"  two-level upper: fast = {_fmt(result.upper_fast)} (slow bound needs lambda_h > mu)")
    print(f"heavy-traffic constant   = {_fmt(result.heavy_traffic_const)}")
    if spec.is_two_level:
        analysis = analyze_two_level(spec.two_level)
        pb = empty_prob_bounds(spec.two_level, analysis)
        slow = _fmt(pb.upper_slow) if pb.upper_slow is not None else "n/a"
        print(f"P(high state | empty queue) <= fast {_fmt(pb.upper_fast)}, slow {slow}")


def _print_report(result: PointResult, report: SimReport) -> None:
    def line(name: str, est) -> None:
        print(f"{name:<14} = {_fmt(est.mean)} +- {_fmt(est.ci_half_width)} (95% CI, {est.batches_used} batches)")

    line("E[Q]", report.e_q)
    line("P(Q=0)", report.p_empty)
    line("unused rate", report.unused_rate)
    line("E_U term", report.e_u_term)
    line("drift avg", report.drift_avg)
    print(
        f"events: arrivals={report.total_arrivals} completions={report.total_completions} "
        f"unused={report.unused_completions} final_q={report.final_q}"
    )
    print(f"simulated time = {_fmt(report.total_time)} (measured {_fmt(report.measured_time)})")
    if not report.stable:
        print("WARNING: rho >= 1; stationary estimates do not converge")
    verdict = "inside" if result.lower <= report.e_q.mean <= result.upper else "outside"
    print(
        f"bound check: sim mean {_fmt(report.e_q.mean)} is {verdict} "
        f"[{_fmt(result.lower)}, {_fmt(result.upper)}]"
    )


def cmd_analyze(args) -> int:
    spec = _load(args)
    _print_analysis(spec, args.json)
    return 0


def cmd_simulate(args) -> int:
    spec = _load(args)
    result = evaluate_point(spec)
    config = make_sim_config(spec, args)
    report = simulate(result.system, config)
    _print_report(result, report)
    if args.out:
        row = SweepRow(
            param=None,
            lam=result.lam,
            mu=result.mu,
            rho=result.rho,
            lower=result.lower,
            upper_fast=result.upper_fast,
            upper_slow=result.upper_slow,
            upper=result.upper,
            heavy_traffic_const=result.heavy_traffic_const,
            sim_mean=report.e_q.mean,
            sim_ci=report.e_q.ci_half_width,
        )
        _write_csv([row], args.out)
    return 0


def cmd_sweep(args) -> int:
    spec = _load(args)
    rows = run_sweep(spec, args)
    _write_csv(rows, args.out)
    return 0


def cmd_validate(args) -> int:
    spec = _load(args)
    failures = 0

    def check(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        status = "ok" if ok else "FAIL"
        if not ok:
            failures += 1
        suffix = f" ({detail})" if detail else ""
        print(f"{status:>4}  {name}{suffix}")

    arrival_chain, completion_chain = spec.chains()
    for label, chain in (("arrival", arrival_chain), ("completion", completion_chain)):
        report = validate(chain)
        check(f"{label} chain structure", report.ok, "; ".join(report.violations))
        if not report.ok:
            continue
        analysis = analyze(chain)
        q = chain.generator()
        residual = float(np.max(np.abs(analysis.pi @ q)))
        scale = max(chain.max_rate(), 1.0)
        check(f"{label} balance residual", residual <= 1e-12 * scale, f"{residual:.3e}")
        rel = solve_relative(chain, analysis)
        check(
            f"{label} relative-value mean zero",
            abs(rel.stationary_mean_residual) <= 1e-12 * max(1.0, abs(rel.max_value), abs(rel.min_value)),
            f"{rel.stationary_mean_residual:.3e}",
        )
        dres = float(np.max(np.abs(drift_residuals(chain, analysis, rel))))
        check(f"{label} one-transition identity", dres <= 1e-10 * scale, f"{dres:.3e}")

    if failures:
        return 2

    result = evaluate_point(spec)
    check("stability (rho < 1)", result.rho < 1.0, f"rho = {_fmt(result.rho)}")
    check("bound ordering", result.lower <= result.upper)
    system = result.system
    na, nc = system.arrival.chain.n, system.completion.chain.n
    for state in ((0, 0, 0), (1, na - 1, nc - 1), (7, 0, nc - 1)):
        try:
            drift_self_check(system, state)
            check(f"drift closed form at state {state}", True)
        except SelfCheckError as exc:
            check(f"drift closed form at state {state}", False, str(exc))
    if spec.is_two_level:
        analysis = analyze_two_level(spec.two_level)
        da = system.arrival.relative.delta
        diff = max(abs(da[0] - analysis.delta_h), abs(da[1] - analysis.delta_l))
        qb = queue_bounds(system)
        diff = max(diff, abs(qb.e_delta_arrival_weighted - analysis.e_delta_arrival))
        diff = max(diff, abs(qb.heavy_traffic_constant - analysis.heavy_traffic_constant))
        check("two-level closed forms match generic pipeline", diff <= 1e-10, f"max diff {diff:.3e}")
    return 2 if failures else 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mams", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, extra in (
        ("analyze", cmd_analyze, "analytic report for a system spec"),
        ("simulate", cmd_simulate, "simulate a system spec and check bounds"),
        ("sweep", cmd_sweep, "run the sweep block of a spec, emitting CSV"),
        ("validate", cmd_validate, "run the invariant suite on a spec"),
    ):
        p = sub.add_parser(name, help=extra)
        p.add_argument("spec", nargs="?", help="path to a spec file")
        p.add_argument("--preset", choices=sorted(_PRESETS), help="use a bundled spec")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--events", type=int, default=None)
        p.add_argument("--warmup", type=float, default=None)
        p.add_argument("--batches", type=int, default=None)
        p.add_argument("--out", default=None, help="CSV output path")
        if name == "analyze":
            p.add_argument("--json", action="store_true", help="emit a JSON report")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (StructuralError, DomainError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, OracleBudgetError, SelfCheckError, EstimationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
