"""Desk-scale sweep of the information-gain trace across maximal hold times.

Runs seeded Lorenz trials for each t_max, writes per-trial CSVs plus an
aggregate per setting, and prints the early-phase comparison:

    python scripts/eig_tmax_sweep.py --t-max 1,4 --seeds 0..4 --iters 25
"""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from smtip.cli import parse_seed_spec
from smtip.config import default_config
from smtip.experiment import aggregate, run_trial, write_aggregate_csv, write_trial_csv
from smtip.planner import PlannerConfig


def desk_config(t_max: int):
    cfg = default_config("lorenz")
    return replace(
        cfg,
        mode=replace(cfg.mode, mode="smtip", t_max=t_max),
        planner=PlannerConfig(
            horizon=12, population=24, elites=6, cem_iters=3, noise_beta=2.0,
            init_std=5.0, mc_rollouts_per_sequence=1,
        ),
        acquisition=replace(cfg.acquisition, n_candidates=30, m=3, traj_horizon=10),
        experiment=replace(cfg.experiment, eval_every=10_000),
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--t-max", default="1,4", dest="t_max")
    parser.add_argument("--seeds", default="0..4")
    parser.add_argument("--iters", type=int, default=25)
    parser.add_argument("--output", default="runs/eig_sweep")
    args = parser.parse_args()

    seeds = parse_seed_spec(args.seeds)
    t_values = [int(v) for v in args.t_max.split(",")]
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    early = {}
    for t_max in t_values:
        cfg = desk_config(t_max)
        trials = []
        for seed in seeds:
            records = run_trial(cfg, seed=seed, n_stop=args.iters)
            write_trial_csv(records, out / f"tmax{t_max}_seed{seed}.csv")
            trials.append(records)
        write_aggregate_csv(aggregate(trials), out / f"tmax{t_max}_aggregate.csv")
        trace = np.median(np.array([[r.eig for r in t] for t in trials]), axis=0)
        early[t_max] = float(trace.mean())
        print(f"t_max={t_max}: mean of median EIG over first {args.iters} iters = {early[t_max]:.4f}")
    if len(t_values) > 1:
        base = min(t_values)
        for t_max in t_values:
            if t_max != base:
                print(f"t_max={t_max} vs {base}: delta = {early[t_max] - early[base]:+.4f}")


if __name__ == "__main__":
    main()
