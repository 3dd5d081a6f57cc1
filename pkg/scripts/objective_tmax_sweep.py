"""Desk-scale sweep of the evaluated control objective across hold times.

Pendulum trials per t_max with periodic policy evaluation; prints the median
evaluated cost at a chosen iteration:

    python scripts/objective_tmax_sweep.py --t-max 1,2,4 --seeds 0..4 --at 20
"""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from smtip.cli import parse_seed_spec
from smtip.config import default_config
from smtip.experiment import run_trial, write_trial_csv
from smtip.planner import PlannerConfig


def desk_config(t_max: int):
    cfg = default_config("pendulum")
    return replace(
        cfg,
        mode=replace(cfg.mode, mode="smtip", t_max=t_max),
        planner=PlannerConfig(
            horizon=16, population=24, elites=6, cem_iters=3, noise_beta=1.0,
            init_std=1.0, mc_rollouts_per_sequence=1,
        ),
        acquisition=replace(cfg.acquisition, n_candidates=30, m=3, traj_horizon=8),
        experiment=replace(cfg.experiment, eval_every=4, eval_horizon=80),
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--t-max", default="1,2,4", dest="t_max")
    parser.add_argument("--seeds", default="0..4")
    parser.add_argument("--at", type=int, default=20, help="iteration whose eval cost is compared")
    parser.add_argument("--output", default="runs/objective_sweep")
    args = parser.parse_args()

    seeds = parse_seed_spec(args.seeds)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for t_max in (int(v) for v in args.t_max.split(",")):
        cfg = desk_config(t_max)
        if args.at % cfg.experiment.eval_every:
            raise SystemExit(f"--at must be a multiple of eval_every={cfg.experiment.eval_every}")
        costs = []
        for seed in seeds:
            records = run_trial(cfg, seed=seed, n_stop=args.at)
            write_trial_csv(records, out / f"tmax{t_max}_seed{seed}.csv")
            costs.append(next(r.eval_cost for r in records if r.n == args.at))
        print(f"t_max={t_max}: median eval cost at n={args.at} over {len(seeds)} seeds = "
              f"{np.median(costs):.1f} (per-seed {[round(c, 1) for c in costs]})")


if __name__ == "__main__":
    main()
