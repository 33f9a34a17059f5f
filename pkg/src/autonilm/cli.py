"""Command line entry point.

Subcommands: search, benchmark, synth, validate, space. Exit codes: 0 on
success, 1 on argument or validation errors, 2 on data errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import benchmark as bench
from .data import (
    DataError,
    default_synth_spec,
    generate_synthetic,
    load_csv,
    load_redd,
    load_synth_spec,
    resample,
    save_csv,
    synth_spec_to_json,
)
from .estimators import ENV_PREFIX
from .harness import SplitSpec, objective_for
from .pipeline import diagnostics_to_json, load_pipeline, validate_pipeline
from .searchspace import (
    EXTERNAL_METHODS,
    builtin_space,
    config_to_json,
    load_space,
    space_to_json,
    subspace,
)
from .tpe import TpeConfig, run_optimization, write_run_report

NATIVE_METHODS = ("DT", "RF", "FCNN", "FHMM", "CO")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_data_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="REDD house directory or aligned CSV file")
    src.add_argument("--synth", help="synthetic spec JSON path, or 'default'")
    p.add_argument("--rate", type=float, default=0.05,
                   help="resampling rate in Hz for REDD directories (default 0.05)")


def _load_dataset(args):
    if args.synth:
        spec = default_synth_spec() if args.synth == "default" else load_synth_spec(args.synth)
        return generate_synthetic(spec), f"synth:{args.synth}"
    path = Path(args.data)
    if path.is_dir():
        return resample(load_redd(path), args.rate), str(path)
    return load_csv(path), str(path)


def _external_commands(methods):
    """Commands for external methods; missing registration is a startup error."""
    commands = {}
    for m in methods:
        if m in EXTERNAL_METHODS:
            cmd = os.environ.get(ENV_PREFIX + m)
            if not cmd:
                raise ValueError(
                    f"method {m} needs an external objective: set {ENV_PREFIX + m}")
            commands[m] = cmd
    return commands


def _cmd_search(args) -> int:
    dataset, ref = _load_dataset(args)
    if args.appliance not in dataset.appliances:
        print(f"unknown appliance {args.appliance!r}; available: "
              f"{', '.join(dataset.appliance_names)}", file=sys.stderr)
        return 2
    methods = args.methods.split(",") if args.methods else list(NATIVE_METHODS)
    base = load_space(args.space) if args.space else builtin_space()
    space = subspace(base, methods)
    external = _external_commands(methods)
    objective = objective_for(dataset, args.appliance, SplitSpec(0.8), space=space,
                              seed=args.seed, external=external, dataset_ref=ref)
    cfg = TpeConfig(gamma=args.gamma, seed=args.seed)
    best, history = run_optimization(objective, space, cfg, args.budget, workers=args.workers)
    write_run_report(args.out, history, cfg, args.budget, include_timing=args.timing)
    print(f"best: loss={best.loss:.4f} {json.dumps(config_to_json(best.config))}")
    print(f"report written to {args.out}")
    return 0


def _cmd_benchmark(args) -> int:
    dataset, _ = _load_dataset(args)
    methods = args.methods.split(",") if args.methods else list(bench.DEFAULT_METHODS)
    unsupported = [m for m in methods if m in EXTERNAL_METHODS]
    if unsupported:
        raise ValueError(f"benchmark scores native methods only; drop {unsupported}")
    report = bench.run_benchmark(dataset, methods, budget=args.budget, seed=args.seed,
                                 gamma=args.gamma, workers=args.workers)
    bench.write_report(report, args.out)
    print(bench.format_table(report))
    print(f"report written to {args.out}")
    return 0


def _cmd_synth(args) -> int:
    spec = default_synth_spec() if args.spec == "default" else load_synth_spec(args.spec)
    if args.dump_spec:
        Path(args.dump_spec).write_text(json.dumps(synth_spec_to_json(spec), indent=2) + "\n")
        print(f"spec written to {args.dump_spec}")
    dataset = generate_synthetic(spec)
    save_csv(dataset, args.out)
    print(f"{len(dataset)} samples, appliances: {', '.join(dataset.appliance_names)} -> {args.out}")
    return 0


def _cmd_validate(args) -> int:
    try:
        pipeline = load_pipeline(args.pipeline)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"unreadable pipeline {args.pipeline}: {exc}", file=sys.stderr)
        return 2
    space = load_space(args.space) if args.space else None
    revised, diagnostics = validate_pipeline(pipeline, space=space)
    print(json.dumps(diagnostics_to_json(diagnostics), indent=2))
    if any(d.severity == "error" for d in diagnostics):
        return 1
    return 0


def _cmd_space(args) -> int:
    doc = json.dumps(space_to_json(builtin_space()), indent=2)
    if args.out:
        Path(args.out).write_text(doc + "\n")
        print(f"space written to {args.out}")
    else:
        print(doc)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="autonilm",
                     description="AutoML search and benchmarking for energy disaggregation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", parents=[], help="TPE hyper-parameter search for one appliance")
    _add_data_args(p)
    p.add_argument("--appliance", required=True)
    p.add_argument("--budget", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=0.25)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--methods", help="comma-separated method subset (default native five)")
    p.add_argument("--space", help="restricted search-space JSON file")
    p.add_argument("--out", default="run_report.json")
    p.add_argument("--timing", action="store_true",
                   help="record wall_ms per trial (makes reports nondeterministic)")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("benchmark", help="compare methods on one dataset")
    _add_data_args(p)
    p.add_argument("--methods", help=f"default {','.join(bench.DEFAULT_METHODS)}")
    p.add_argument("--budget", type=int, default=bench.DEFAULT_BUDGET)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=0.25)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="benchmark.json")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--spec", default="default", help="spec JSON path or 'default'")
    p.add_argument("--out", required=True)
    p.add_argument("--dump-spec", help="also write the effective spec JSON here")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="check a pipeline description")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--space", help="validate against this space JSON instead of the built-in")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("space", help="emit the built-in search space as JSON")
    p.add_argument("--dump", action="store_true", help="print the space (default action)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_space)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
