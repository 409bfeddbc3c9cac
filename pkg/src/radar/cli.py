"""Command line entry point: ``radar {run,fit,prox-check,selftest}``.

Exit codes: 0 success, 1 validation error, 2 runtime or oracle error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("radar")


def _overrides(args) -> dict:
    keys = {
        "out": args.out,
        "seed": args.seed,
        "trials": args.trials,
        "algorithms": args.algo,
        "dim": args.dim,
        "budget": args.budget,
        "epoch_mode": args.epoch_mode,
    }
    for item in args.set or ():
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        keys[k.strip()] = v.strip()
    return {k: (str(v) if v is not None else None) for k, v in keys.items()}


def cmd_run(args) -> int:
    from .harness import load_spec, run_experiment

    spec = load_spec(args.config, _overrides(args))
    paths = run_experiment(spec)
    print(f"wrote {len(paths)} files under {spec.out}")
    print(Path(paths["rate_fit"]).read_text(encoding="utf-8"), end="")
    return EXIT_OK


def cmd_fit(args) -> int:
    from .harness import summarize_trace_files, write_rate_report, write_summary_csv

    files = [Path(p) for p in args.traces]
    expanded = []
    for f in files:
        if f.is_dir():
            merged = f / "traces.csv"
            expanded.extend([merged] if merged.exists() else sorted((f / "traces").glob("*.csv")))
        else:
            expanded.append(f)
    if not expanded:
        raise FileNotFoundError("no trace files found")
    for f in expanded:
        if not f.exists():
            raise FileNotFoundError(f"trace file not found: {f}")
    rows = summarize_trace_files(expanded)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_summary_csv(out / "summary.csv", rows)
        write_rate_report(out / "rate_fit.csv", rows)
    last = {}
    for r in rows:
        last[r.algorithm] = r
    print("algorithm,iteration,mean_error_l2_sq,slope_trailing_decade")
    for alg, r in last.items():
        print(f"{alg},{r.iteration},{r.mean_error_l2_sq!r},{r.slope_trailing_decade!r}")
    return EXIT_OK


def cmd_prox_check(args) -> int:
    from .verification import prox_check

    ok = True
    for d in args.dims:
        r = prox_check(d, args.instances, args.seed or 0)
        good = r.passed()
        ok &= good
        print(
            f"d={d:<4d} instances={r.instances} max_linf={r.max_linf:.3e} "
            f"max_gap={r.max_objective_gap:.3e} max_violation={r.max_violation:.1e} {'ok' if good else 'MISMATCH'}"
        )
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_selftest(args) -> int:
    from .acceptance import run_all

    results = run_all()
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radar", description="Annealed epoch dual averaging experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key=value config file")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("--trials", type=int, metavar="N")
    common.add_argument("--algo", metavar="LIST", help="comma-separated: radar,radar_const,eda,rda,sgd")
    common.add_argument("--dim", type=int, metavar="N")
    common.add_argument("--budget", type=int, metavar="N")
    common.add_argument("--epoch-mode", choices=["theoretical", "oracle-halving"])
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="any other config key (repeatable)")

    p = sub.add_parser("run", parents=[common], help="run an experiment")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fit", help="rate report from existing traces")
    p.add_argument("traces", nargs="+", help="trace CSVs or experiment output directories")
    p.add_argument("--out", metavar="DIR", help="also write summary.csv and rate_fit.csv here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("prox-check", help="validate the closed-form prox step numerically")
    p.add_argument("--dims", type=int, nargs="+", default=[3, 10, 50])
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_prox_check)

    p = sub.add_parser("selftest", help="run the acceptance checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; those are validation errors here
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    from .harness import AlignmentError, NotEnoughDataError, ValidationError

    try:
        return args.func(args)
    except ValidationError as exc:
        print("invalid settings:", file=sys.stderr)
        for field, why in exc.problems.items():
            print(f"  {field}: {why}", file=sys.stderr)
        return EXIT_VALIDATION
    except (AlignmentError, NotEnoughDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
