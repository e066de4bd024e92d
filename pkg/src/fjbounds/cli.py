"""Command-line interface: ``fjbounds {bound,simulate,fit,compare,preset}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bounds import DecayRateError, UnstableSystemError, compute_bound
from .calibrate import CalibrationError, fit_mmpp, read_trace
from .chain import ChainError, ModulatingChain, StationaryError, stationary_distribution
from .provisions import compare_provisions, identity_provision, random_provision, reactive_provision
from .scenario import Scenario, ScenarioError, figure_preset, load_scenario
from .simulator import SimulationError, simulate
from .spectral import PerronConvergenceError
from .workload import Discipline, DomainError, WorkloadError, WorkloadSpec, stability_check

log = logging.getLogger("fjbounds")

EXIT_INPUT = 2
EXIT_UNSTABLE = 3
EXIT_NUMERIC = 4

DEFAULT_GRID = ",".join(str(w) for w in range(1, 21))


class CliError(Exception):
    def __init__(self, kind, message, code=EXIT_INPUT, **extra):
        super().__init__(message)
        self.kind = kind
        self.code = code
        self.extra = extra


def _grid(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError("usage", f"--grid must be a comma-separated list of numbers, got {text!r}") from None
    if not vals or any(v < 0 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
        raise CliError("usage", "--grid must be nonnegative and strictly increasing")
    return vals


def _write_outputs(out_dir, files: dict[str, str]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load(path) -> Scenario:
    if path is None:
        raise CliError("usage", "--scenario is required")
    try:
        return load_scenario(path)
    except FileNotFoundError:
        raise CliError("io", f"scenario file not found: {path}") from None
    except ChainError as exc:
        raise CliError("chain", str(exc), violations=[v.kind for v in exc.violations]) from None
    except (ScenarioError, WorkloadError, ValueError) as exc:
        raise CliError("scenario", str(exc)) from None


def _bound_or_refuse(chain, spec):
    try:
        return compute_bound(chain, spec)
    except UnstableSystemError as exc:
        r = exc.report
        raise CliError("unstable", str(exc), EXIT_UNSTABLE, server_drifts=r.server_drifts.tolist(),
                       blocking_drift=r.blocking_drift) from None


def _warn_boundary(report):
    if any(report.boundary_flags):
        print(json.dumps({"warning": "decay rate attained at the MGF pole", "boundary_flags": report.boundary_flags}),
              file=sys.stderr)


def cmd_bound(args) -> int:
    sc = _load(args.scenario)
    grid = _grid(args.grid)
    report = _bound_or_refuse(sc.chain, sc.workload)
    _warn_boundary(report)
    doc = report.to_dict()
    doc["grid"] = grid
    doc["bound"] = report.tail_bound(np.asarray(grid)).tolist()
    _write_outputs(args.out, {"bound.json": _json(doc), "bound.csv": report.grid_csv(grid)})
    return 0


def cmd_simulate(args) -> int:
    sc = _load(args.scenario)
    grid = _grid(args.grid) if args.grid else None
    try:
        config = sc.simulation_config(jobs=args.jobs, warmup=args.warmup, replications=args.replications,
                                      seed=args.seed, grid=grid, workers=args.workers)
    except SimulationError as exc:
        raise CliError("usage", str(exc)) from None
    outcome = simulate(sc.chain, sc.workload, config)
    summary = outcome.summary()
    if args.with_bound:
        if outcome.stable:
            report = compute_bound(sc.chain, sc.workload)
            _warn_boundary(report)
            outcome = outcome.with_bound(report.tail_bound(outcome.grid))
            summary["bound"] = report.to_dict()
        else:
            print(json.dumps({"warning": "system is unstable; bound column omitted"}), file=sys.stderr)
    summary["pooled_ccdf"] = outcome.pooled_ccdf.tolist()
    _write_outputs(args.out, {"simulation.json": _json(summary), "ccdf.csv": outcome.ccdf_csv()})
    return 0


def _fitted_scenario(fit, num_servers: int, utilization: float, discipline: Discipline) -> Scenario:
    chain = ModulatingChain(fit.transition).check()
    lam = fit.per_second_intensities
    mean_ia = float(stationary_distribution(chain) @ (1.0 / lam))
    mu = np.full((num_servers, fit.num_states), 1.0 / (utilization * mean_ia))
    spec = WorkloadSpec(lam, mu, discipline)
    if not stability_check(chain, spec).stable_for(discipline):
        log.warning("fitted scenario with utilization %.3g is unstable for %s", utilization, discipline.value)
    return Scenario(chain, spec, {}, "fitted")


def cmd_fit(args) -> int:
    try:
        trace = read_trace(args.trace, args.slot_seconds, args.discard)
    except FileNotFoundError:
        raise CliError("io", f"trace file not found: {args.trace}") from None
    except (CalibrationError, OSError) as exc:
        raise CliError("trace", str(exc)) from None
    try:
        fit = fit_mmpp(trace, args.max_states, seed=args.seed)
    except CalibrationError as exc:
        raise CliError("trace", str(exc)) from None
    scenario = _fitted_scenario(fit, args.servers, args.utilization, Discipline.parse(args.discipline))
    doc = scenario.to_dict()
    doc["fit"] = fit.to_dict()
    _write_outputs(args.out, {"scenario.json": _json(doc)})
    return 0


PROVISIONS = ("reactive", "random", "identity")


def cmd_compare(args) -> int:
    sc = _load(args.scenario)
    names = [p.strip() for p in args.provisions.split(",") if p.strip()]
    unknown = [p for p in names if p not in PROVISIONS]
    if unknown or not names:
        raise CliError("usage", f"unknown provisions {unknown}; choose from {list(PROVISIONS)}")
    build = {
        "reactive": lambda s: reactive_provision(s),
        "random": lambda s: random_provision(s, args.seed),
        "identity": identity_provision,
    }
    specs = [(n, build[n](sc.workload)) for n in names]
    if len(specs) == 1:
        specs.insert(0, ("baseline", sc.workload))
    for name, spec in specs:
        rep = stability_check(sc.chain, spec)
        if not rep.stable_for(spec.discipline):
            raise CliError("unstable", f"provision {name!r} is unstable: {rep.describe()}", EXIT_UNSTABLE,
                           provision=name, server_drifts=rep.server_drifts.tolist(),
                           blocking_drift=rep.blocking_drift)
    grid = _grid(args.grid) if args.grid else None
    config = sc.simulation_config(jobs=args.jobs, warmup=args.warmup, replications=args.replications,
                                  seed=args.seed, grid=grid, workers=args.workers)
    report = compare_provisions(sc.chain, specs, config)
    _write_outputs(args.out, {"comparison.json": _json(report.to_dict()), "comparison.csv": report.table_csv()})
    return 0


def cmd_preset(args) -> int:
    try:
        sc = figure_preset(args.name, args.seed)
    except ScenarioError as exc:
        raise CliError("usage", str(exc)) from None
    _write_outputs(args.out, {f"{args.name}.json": _json(sc.to_dict())})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fjbounds", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def sim_flags(sp):
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--warmup", type=int)
        sp.add_argument("--replications", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--grid", help="comma-separated waiting-time values w")

    b = sub.add_parser("bound", help="tail and mean bounds for a scenario")
    b.add_argument("--scenario", required=True)
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--grid", default=DEFAULT_GRID)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bound)

    s = sub.add_parser("simulate", help="simulate waiting times and empirical CCDFs")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--with-bound", action="store_true", help="add the analytic bound column")
    sim_flags(s)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit an MMPP to a slot-count trace")
    f.add_argument("trace", nargs="?")
    f.add_argument("--trace", dest="trace_flag")
    f.add_argument("--out", required=True)
    f.add_argument("--slot-seconds", type=float, default=300.0)
    f.add_argument("--discard", type=int, default=0, help="leading slots to drop")
    f.add_argument("--max-states", type=int, default=4)
    f.add_argument("--servers", type=int, default=5)
    f.add_argument("--utilization", type=float, default=0.7)
    f.add_argument("--discipline", default="work-conserving")
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("compare", help="compare service-rate provisions")
    c.add_argument("--scenario", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--provisions", default="reactive,random")
    c.add_argument("--seed", type=int, default=0)
    sim_flags(c)
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("preset", help="write a seeded figure-style scenario")
    r.add_argument("name", help="fig3-left, fig3-middle, fig3-right, fig4-left, fig4-middle, fig4-right, trace")
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_preset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "fit":
        args.trace = args.trace_flag or args.trace
        if args.trace is None:
            print(_json({"error": "usage", "message": "a trace file is required"}), end="", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args)
    except CliError as exc:
        record = {"error": exc.kind, "message": str(exc), **exc.extra}
        print(_json(record), end="", file=sys.stderr)
        return exc.code
    except (DecayRateError, PerronConvergenceError, StationaryError, DomainError, SimulationError) as exc:
        print(_json({"error": "numerical", "message": str(exc)}), end="", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
