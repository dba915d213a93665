"""Command line entry point.

    apwl1 run --config exp.ini [--trials N] [--seed S] [--out DIR] [--jobs J]
    apwl1 sweep --config exp.ini --param delta --deviations -0.1,0,0.5,1.0
    apwl1 verify [--cases 1000] [--seeds 50]

Every command prints a JSON summary on stdout. On failure the exit code
is nonzero and a JSON error report goes to stderr: 2 for bad usage or
configuration, 1 for runtime or verification failures.
"""
import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import harness, verify
from ._kernels import BACKEND

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _report(kind, message, code, **extra):
    payload = {"status": "error", "error": kind, "message": message, "exit_code": code}
    payload.update(extra)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _load(args):
    config = harness.ExperimentConfig.load(args.config)
    if getattr(args, "trials", None) is not None:
        config = replace(config, n_trials=args.trials)
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed,
                         scenario=replace(config.scenario, seed=args.seed))
    if getattr(args, "out", None) is not None:
        config = replace(config, out=args.out)
    # re-run validation on the overridden values
    return replace(config)


def cmd_run(args):
    config = _load(args)
    t0 = time.perf_counter()
    config = harness.resolve_grid(config)
    traces = harness.run_ensemble(config, n_jobs=args.jobs, resolve=False)
    paths = harness.export_results(traces, config.out, config=config)
    k = min(config.eval_iter, config.n_iters) - 1
    return {
        "status": "ok", "command": "run", "out": [str(p) for p in paths],
        "eval_iter": k + 1, "seed": config.seed, "n_trials": config.n_trials,
        "mse_db": {t.tag: float(t.db[k]) for t in traces},
        "n_valid": {t.tag: t.n_valid for t in traces},
        "seconds": round(time.perf_counter() - t0, 3),
    }


def cmd_sweep(args):
    config = _load(args)
    try:
        devs = [float(d) for d in args.deviations.split(",") if d.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --deviations: {exc}") from exc
    if not devs:
        raise UsageError("--deviations is empty")
    tags = args.tags.split(",") if args.tags else None
    rows = harness.sensitivity_sweep(config, args.param, devs, eval_iter=args.eval_iter,
                                     tags=tags, n_jobs=args.jobs)
    path = harness.write_sweep_table(rows, Path(config.out) / f"sweep_{args.param}.csv")
    return {"status": "ok", "command": "sweep", "parameter": args.param,
            "out": str(path), "rows": rows}


def cmd_verify(args):
    t0 = time.perf_counter()
    reports = [verify.run_oracle_suite(n_cases=args.cases, seed=args.seed)]
    reports += list(verify.run_convergence_suite(range(args.seeds)).values())
    ok = all(r.passed for r in reports)
    return {"status": "ok" if ok else "failed", "command": "verify", "backend": BACKEND,
            "reports": [r.to_dict() for r in reports],
            "seconds": round(time.perf_counter() - t0, 3)}


def build_parser():
    p = _Parser(prog="apwl1", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an ensemble and export MSE traces")
    r.add_argument("--config", required=True)
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sensitivity sweep of one parameter")
    s.add_argument("--config", required=True)
    s.add_argument("--param", required=True, choices=sorted(harness.SWEEP_KEYS))
    s.add_argument("--deviations", required=True,
                   help="comma-separated fractions, e.g. -0.1,0,0.5,1.0")
    s.add_argument("--tags", help="restrict to these algorithm tags (comma-separated)")
    s.add_argument("--eval-iter", type=int)
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="oracle and convergence-property suites")
    v.add_argument("--cases", type=int, default=1000)
    v.add_argument("--seeds", type=int, default=50)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return p


def _glue_negative_lists(argv):
    # argparse takes "-0.1,0,0.5" for an option; bind it to its flag instead
    out = []
    it = iter(argv)
    for a in it:
        if a == "--deviations":
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_glue_negative_lists(argv))
    except UsageError as exc:
        return _report("UsageError", str(exc), EXIT_USAGE)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except (UsageError, harness.ConfigError, FileNotFoundError) as exc:
        return _report(type(exc).__name__, str(exc), EXIT_USAGE, command=args.command)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a report
        return _report(type(exc).__name__, str(exc), EXIT_FAIL, command=args.command)
    print(json.dumps(result, indent=2, sort_keys=True, default=float))
    return EXIT_OK if result["status"] == "ok" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
