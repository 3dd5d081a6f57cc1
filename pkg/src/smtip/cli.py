"""Command line entry point: run experiments, diagnostics, and exports.

Exit codes: 0 success, 1 validation/usage error, 2 runtime abort. No output
files are created before the config validates.
"""

from __future__ import annotations

import argparse
import csv
import glob
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, default_config, load_config, to_toml
from .experiment import (
    aggregate,
    autocorrelation_diagnostic,
    evaluate_policy,
    read_trial_csv,
    run_experiment,
    write_aggregate_csv,
)
from .gp import load_model
from .planner import GPMeanRollout

OUTPUT_ENV_VAR = "SMTIP_OUTPUT_DIR"


class CliError(Exception):
    """Usage-level failure; maps to exit code 1."""


def parse_seed_spec(raw: str) -> list[int]:
    """Accept '0..9' (inclusive range) or comma-separated integers."""
    raw = raw.strip()
    if ".." in raw:
        lo_s, hi_s = raw.split("..", 1)
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError as exc:
            raise CliError(f"bad seed range {raw!r}") from exc
        if hi < lo:
            raise CliError(f"empty seed range {raw!r}")
        return list(range(lo, hi + 1))
    try:
        seeds = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise CliError(f"bad seed list {raw!r}") from exc
    if not seeds:
        raise CliError("no seeds given")
    return seeds


def _resolve_output(explicit: str | None, cfg_dir: str) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get(OUTPUT_ENV_VAR)
    if env:
        return Path(env)
    return Path(cfg_dir)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smtip", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a multi-seed experiment from a config file")
    run_p.add_argument("--config", required=True, help="TOML config path")
    run_p.add_argument("--seeds", help="seed override: '0..9' or '0,3,7'")
    run_p.add_argument("--parallel", type=int, default=1, help="max concurrent trials")
    run_p.add_argument("--output", help="output directory (overrides config)")
    run_p.add_argument("--mode", choices=["barl", "tip", "smtip"], help="mode override")
    run_p.add_argument("--t-max", type=int, dest="t_max", help="t_max override")
    run_p.add_argument("--quiet", action="store_true")

    auto_p = sub.add_parser("autocorr", help="state autocorrelation under random forcing")
    auto_p.add_argument("--system", required=True, choices=["lorenz", "pendulum"])
    auto_p.add_argument("--intensities", required=True, help="comma list, e.g. 0,5,10")
    auto_p.add_argument("--ensemble", type=int, default=256)
    auto_p.add_argument("--horizon", type=int, default=200)
    auto_p.add_argument("--component", type=int, default=3, help="1-based state component")
    auto_p.add_argument("--seed", type=int, default=0)
    auto_p.add_argument("--output", help="output directory")
    auto_p.add_argument("--quiet", action="store_true")

    agg_p = sub.add_parser("aggregate", help="aggregate trial CSVs into a summary CSV")
    agg_p.add_argument("--input", required=True, help="glob of trial CSV files")
    agg_p.add_argument("--output", required=True, help="aggregate CSV path")
    agg_p.add_argument("--quiet", action="store_true")

    eval_p = sub.add_parser("eval", help="evaluate a saved model checkpoint's policy")
    eval_p.add_argument("--model", required=True, help="model checkpoint path")
    eval_p.add_argument("--config", required=True, help="TOML config path")
    eval_p.add_argument("--seed", type=int, default=0)
    eval_p.add_argument("--quiet", action="store_true")

    print_p = sub.add_parser("print-config", help="print resolved defaults as TOML")
    print_p.add_argument("--system", default="lorenz", choices=["lorenz", "pendulum"])
    print_p.add_argument("--config", help="resolve this file instead of raw defaults")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.mode:
        cfg = replace(cfg, mode=replace(cfg.mode, mode=args.mode))
    if args.t_max is not None:
        cfg = replace(cfg, mode=replace(cfg.mode, t_max=args.t_max))
    seeds = parse_seed_spec(args.seeds) if args.seeds else None
    if args.parallel < 1:
        raise CliError("--parallel must be >= 1")
    out = _resolve_output(args.output, cfg.experiment.output_dir)
    run_experiment(cfg, out, seeds=seeds, parallel=args.parallel, quiet=args.quiet)
    if not args.quiet:
        print(f"outputs written to {out}")
    return 0


def _cmd_autocorr(args) -> int:
    from .config import SystemConfig, build_system

    try:
        intensities = [float(v) for v in args.intensities.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"bad intensity list {args.intensities!r}") from exc
    if not intensities:
        raise CliError("no intensities given")
    spec = build_system(SystemConfig(name=args.system))
    if not 1 <= args.component <= spec.dim_state:
        raise CliError(f"component must be in 1..{spec.dim_state}")
    if args.ensemble < 2 or args.horizon < 1:
        raise CliError("need ensemble >= 2 and horizon >= 1")
    out = _resolve_output(args.output, f"runs/autocorr_{args.system}")
    series = autocorrelation_diagnostic(
        spec, intensities, args.ensemble, args.horizon, args.component - 1, args.seed
    )
    out.mkdir(parents=True, exist_ok=True)
    for amp, values in series.items():
        path = out / f"autocorr_intensity{amp:g}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "normalized_cov"])
            for lag, value in enumerate(values):
                writer.writerow([lag, repr(float(value))])
        if not args.quiet:
            print(f"wrote {path}")
    return 0


def _cmd_aggregate(args) -> int:
    paths = sorted(glob.glob(args.input))
    if not paths:
        raise CliError(f"no files match {args.input!r}")
    trials = [read_trial_csv(p) for p in paths]
    write_aggregate_csv(aggregate(trials), args.output)
    if not args.quiet:
        print(f"aggregated {len(paths)} trials into {args.output}")
    return 0


def _cmd_eval(args) -> int:
    cfg = load_config(args.config)
    from .config import build_system

    spec = build_system(cfg.system)
    model = load_model(args.model)
    if model.input_dim != spec.dim_state + spec.dim_control:
        raise CliError("model checkpoint does not match the configured system")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=args.seed, spawn_key=(0xE7A1,)))
    value = evaluate_policy(
        GPMeanRollout(model, spec),
        spec,
        cfg.planner,
        cfg.experiment.eval_starts,
        cfg.experiment.eval_horizon,
        rng,
    )
    print(repr(value))
    return 0


def _cmd_print_config(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = default_config(args.system)
    sys.stdout.write(to_toml(cfg))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    handlers = {
        "run": _cmd_run,
        "autocorr": _cmd_autocorr,
        "aggregate": _cmd_aggregate,
        "eval": _cmd_eval,
        "print-config": _cmd_print_config,
    }
    try:
        return handlers[args.command](args)
    except (CliError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime aborts map to exit 2
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
