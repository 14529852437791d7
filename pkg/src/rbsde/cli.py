"""Batch front end: ``rbsde run | validate | scenarios``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .analysis import check_comparison, check_skorokhod, norms
from .config import ConfigParseError, load_config
from .drivers import PROBES
from .exceptions import (
    ConfigurationError,
    DriverEvaluationError,
    InvalidSpecError,
    NoRootError,
    PreconditionError,
    ShapeError,
)
from .io import dumps_report, solution_csv, table_csv, validate_report
from .scenarios import SCENARIOS, divergence_probe, make_instance
from .solvers import solve_penalized, solve_plain, solve_reflected, solve_snell
from .sweep import penalization_sweep

__all__ = ["main", "run", "EXIT_OK", "EXIT_PARSE", "EXIT_PRECONDITION", "EXIT_SOLVER",
           "EXIT_CHECK"]

EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4, 5

# violations listed per probe before truncation
_MAX_LISTED = 20


def _exit_status(exc):
    if isinstance(exc, ConfigParseError):
        return EXIT_PARSE
    if isinstance(exc, (PreconditionError, InvalidSpecError, ShapeError, ConfigurationError)):
        return EXIT_PRECONDITION
    if isinstance(exc, (NoRootError, DriverEvaluationError, FloatingPointError)):
        return EXIT_SOLVER
    return None


def _solve(instance, method, penalty, root_tol):
    if method == "plain":
        return solve_plain(instance, root_tol=root_tol)
    if method == "penalized":
        return solve_penalized(instance, penalty, root_tol=root_tol)
    if method == "reflected":
        return solve_reflected(instance, root_tol=root_tol)
    return solve_snell(instance, root_tol=root_tol)


def _sampling(num):
    return {"n_paths": num["n_paths"], "seed": num["seed"], "enumeration_cap": num["enumeration_cap"]}


def _action_solve(cfg, files):
    num = cfg.numerics
    inst = make_instance(cfg.scenario)
    sol = _solve(inst, cfg.method, cfg.penalty, num["root_tol"])
    files["solution.csv"] = solution_csv(sol)
    checks = {}
    failed = False
    if sol.barrier is not None:
        sk = check_skorokhod(sol, tol=num["root_tol"])
        # penalized solutions only approach the barrier as n grows
        enforced = cfg.method in ("reflected", "snell")
        checks["skorokhod"] = {**sk.to_dict(), "enforced": enforced}
        failed = enforced and not sk.passed
    return {"solution": sol.metadata()}, checks, failed


def _action_sweep(cfg, files):
    num = cfg.numerics
    inst = make_instance(cfg.scenario)
    res = penalization_sweep(inst, cfg.schedule, p=cfg.order, root_tol=num["root_tol"],
                             n_jobs=cfg.workers, **_sampling(num))
    rep = res.report
    files["convergence.csv"] = table_csv(r.to_dict() for r in rep.rows)
    checks = {"monotone_in_penalty": {"violations": rep.monotone_violations, "tol": rep.tol,
                                      "passed": rep.monotone_violations == 0}}
    result = {"convergence": rep.to_dict(), "reference": res.reference.metadata()}
    return result, checks, rep.monotone_violations > 0


def _action_compare(cfg, files):
    num = cfg.numerics
    a = _solve(make_instance(cfg.scenario), cfg.method, cfg.penalty, num["root_tol"])
    b = _solve(make_instance(cfg.compare_with), cfg.method, cfg.penalty, num["root_tol"])
    rep = check_comparison(a, b, tol=num["compare_tol"])
    checks = {"comparison": {**rep.to_dict(), "tol": num["compare_tol"], "passed": rep.passed}}
    return {"lower": a.metadata(), "upper": b.metadata()}, checks, not rep.passed


def _action_probe(cfg, files):
    num = cfg.numerics
    inst = make_instance(cfg.scenario)
    driver = inst.driver
    box = {"t": [0.0, inst.lattice.horizon], **cfg.probe["box"]}
    wanted = cfg.probe.get("hypotheses") or sorted(set(PROBES) & driver.flags)
    seed = 0 if num["seed"] is None else num["seed"]
    checks, reports, failed = {}, {}, False
    for name in wanted:
        declared = name in driver.flags
        if name == "Z" and driver.cond_z is None or name == "A" and driver.cond_a is None:
            reports[name] = {"hypothesis": name, "skipped": "no constants declared"}
            continue
        rep = PROBES[name](driver, sample_count=cfg.probe["samples"], box=box, seed=seed,
                           tol=num["probe_tol"])
        d = rep.to_dict()
        d["violations"] = d["violations"][:_MAX_LISTED]
        reports[name] = d
        checks[name] = {"declared": declared, "passed": rep.passed}
        failed |= declared and not rep.passed
    files["probes.csv"] = table_csv(
        {"hypothesis": k, "declared": checks[k]["declared"], "n_samples": v["n_samples"],
         "n_violations": v["n_violations"], "worst_excess": v["worst_excess"]}
        for k, v in reports.items() if k in checks
    )
    return {"driver": driver.name, "flags": sorted(driver.flags), "probes": reports}, checks, failed


def _action_divergence(cfg, files):
    num = cfg.numerics
    d = cfg.divergence
    table = divergence_probe(d["kind"], d["N_schedule"], order=cfg.order, horizon=d["horizon"],
                             enumeration_cap=d["enumeration_cap"], n_paths=num["n_paths"],
                             seed=num["seed"])
    files["divergence.csv"] = table_csv(r.to_dict() for r in table.rows)
    return {"divergence": table.to_dict()}, {}, False


def _action_norms(cfg, files):
    num = cfg.numerics
    sol = _solve(make_instance(cfg.scenario), cfg.method, cfg.penalty, num["root_tol"])
    rep = norms(sol, p=cfg.order, **_sampling(num))
    return {"solution": sol.metadata(), "norms": rep.to_dict()}, {}, False


_ACTIONS = {
    "solve": _action_solve,
    "penalize-sweep": _action_sweep,
    "compare": _action_compare,
    "probe-hypotheses": _action_probe,
    "divergence-probe": _action_divergence,
    "norms": _action_norms,
}


def _envelope(action, status, config, result, checks=None, error=None):
    rep = {"tool": "rbsde", "version": __version__, "action": action, "status": status,
           "config": config, "result": result}
    if checks is not None:
        rep["checks"] = checks
    if error is not None:
        rep["error"] = error
    return rep


def _write(out_dir, files):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8", newline="")


def _error_report(action, config, exc, status):
    return _envelope(action, "error", config, None,
                     error={"type": type(exc).__name__, "message": str(exc), "exit_status": status})


def run(config, out_dir=None):
    """Execute a parsed RunConfig; return ``(exit_status, report)``.

    Reports land in ``out_dir`` (falling back to the config's output
    directory). Errors with a known status produce ``error.json`` instead
    of being raised.
    """
    out_dir = out_dir or config.output_dir
    resolved = config.to_dict()
    files = {}
    try:
        with np.errstate(over="ignore", under="ignore"):
            result, checks, failed = _ACTIONS[config.action](config, files)
    except Exception as exc:  # noqa: BLE001 - mapped to exit statuses below
        status = _exit_status(exc)
        if status is None:
            raise
        report = _error_report(config.action, resolved, exc, status)
        _write(out_dir, {"error.json": dumps_report(report)})
        return status, report
    status = EXIT_CHECK if failed else EXIT_OK
    report = _envelope(config.action, "check-failed" if failed else "ok", resolved, result, checks)
    if failed:
        report["error"] = {"type": "CheckFailure", "exit_status": EXIT_CHECK,
                           "message": "failed checks: "
                           + ", ".join(k for k, v in checks.items() if not v.get("passed", True))}
    validate_report(json.loads(dumps_report(report)))
    if "json" in config.formats:
        files["report.json"] = dumps_report(report)
    if "csv" not in config.formats:
        files = {k: v for k, v in files.items() if not k.endswith(".csv")}
    if failed:
        files["error.json"] = dumps_report(report)
    _write(out_dir, files)
    return status, report


def _cmd_run(args):
    try:
        cfg = load_config(args.config)
    except ConfigParseError as exc:
        report = _error_report("run", None, exc, EXIT_PARSE)
        print(dumps_report(report), end="", file=sys.stderr)
        if args.out:
            _write(args.out, {"error.json": dumps_report(report)})
        return EXIT_PARSE
    status, report = run(cfg, args.out)
    if status != EXIT_OK:
        print(dumps_report(report), end="", file=sys.stderr)
    else:
        summary = {"status": "ok", "action": cfg.action, "out": str(args.out or cfg.output_dir)}
        print(json.dumps(summary, sort_keys=True))
    return status


def _cmd_validate(args):
    try:
        cfg = load_config(args.config)
    except ConfigParseError as exc:
        report = _error_report("validate", None, exc, EXIT_PARSE)
        print(dumps_report(report), end="", file=sys.stderr)
        return EXIT_PARSE
    print(dumps_report({"valid": True, "config": cfg.to_dict()}), end="")
    return EXIT_OK


def _cmd_scenarios(args):
    for kind in sorted(SCENARIOS):
        entry = SCENARIOS[kind]
        defaults = ", ".join(
            f"{k}={'null' if v is None else v}" for k, v in entry["defaults"].items()
        )
        print(f"{kind}: {entry['description']}\n    defaults: {defaults}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="rbsde", description="Lattice RBSDE solver and checks.")
    parser.add_argument("--version", action="version", version=f"rbsde {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a JSON run configuration")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides output.dir)")
    p_run.set_defaults(func=_cmd_run)
    p_val = sub.add_parser("validate", help="parse and validate a configuration")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)
    p_sc = sub.add_parser("scenarios", help="list built-in scenarios")
    p_sc.set_defaults(func=_cmd_scenarios)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
