"""Trial orchestration: the sampling loop, policy evaluation, and aggregation.

A trial runs one continuous system trajectory. Each sampling iteration builds
a fresh trajectory set, scores uniform candidates, executes the chosen
extended action on the true system, and records exactly one transition (the
final one-step hop of the held interval) into the model's dataset. Seeds map
to independent stream trees so reruns are reproducible.
"""

from __future__ import annotations

import csv
import json
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .acquisition import sample_optimal_trajectories, select_action
from .config import ExperimentConfig, build_system
from .dynamics import (
    SystemSpec,
    TransitionTuple,
    clip_control,
    cost,
    rollout_held,
    sample_initial,
    step,
)
from .gp import GPDataset, GPModel, KernelParams, empty_model, fit_hyperparams, save_model
from .planner import GPMeanRollout, MPCPolicy, PlannerConfig, RolloutModel

TRIAL_CSV_HEADER = ("n", "k", "tau", "eig", "eig_first_term", "bootstrap_err", "eval_cost", "wall_ms")
AGGREGATE_CSV_HEADER = ("n", "metric", "mean", "stderr", "count")
AGGREGATE_METRICS = ("eig", "tau", "eval_cost")


@dataclass(frozen=True)
class TrialRecord:
    n: int
    k: int
    tau: int
    eig: float
    eig_first_term: float
    bootstrap_err: float
    eval_cost: float | None
    wall_ms: float

    def __post_init__(self):
        if self.k < self.n:
            raise ValueError("time index k cannot be below the sampling iteration n")


@dataclass(frozen=True)
class AggregateRecord:
    n: int
    metric: str
    mean: float
    stderr: float
    count: int


class TrialAbort(RuntimeError):
    """A trial died mid-run; carries the records gathered so far."""

    def __init__(self, seed: int, records: list, cause: BaseException):
        super().__init__(f"trial seed={seed} aborted at n={len(records) + 1}: {cause}")
        self.seed = seed
        self.records = records
        self.cause = cause


def _initial_params(input_dim: int, output_dim: int, gp_cfg) -> tuple:
    p = KernelParams.create(
        np.full(input_dim, gp_cfg.init_lengthscale),
        gp_cfg.init_signal_variance,
        gp_cfg.init_noise_variance,
    )
    return (p,) * output_dim


def evaluate_policy(
    plan_model: RolloutModel,
    spec: SystemSpec,
    planner_cfg: PlannerConfig,
    eval_starts,
    horizon: int,
    rng: np.random.Generator,
) -> float:
    """Mean total cost of the receding-horizon policy on the true system.

    One rollout of `horizon` steps from each fixed start; the policy plans on
    `plan_model` while the real dynamics advance the state.
    """
    totals = []
    for x0 in eval_starts:
        policy_rng, exec_rng = rng.spawn(2)
        policy = MPCPolicy(plan_model, planner_cfg, policy_rng)
        x = np.asarray(x0, dtype=float)
        total = 0.0
        for _ in range(horizon):
            u = clip_control(spec, policy(x))
            total += float(cost(spec, x, u))
            x = step(spec, x, u, exec_rng)
        total += float(cost(spec, x, np.zeros(spec.dim_control)))
        totals.append(total)
    return float(np.mean(totals))


def _run_trial_impl(cfg: ExperimentConfig, seed: int, n_stop: int | None):
    spec = build_system(cfg.system)
    root = np.random.SeedSequence(entropy=seed, spawn_key=(0x5317,))
    init_rng = np.random.default_rng(root.spawn(1)[0])
    x = sample_initial(spec, init_rng)
    k = 0
    input_dim = spec.dim_state + spec.dim_control
    params = _initial_params(input_dim, spec.dim_state, cfg.gp)
    transitions: list[TransitionTuple] = []
    model = empty_model(input_dim, params, spec.angle_dims)
    state_box = (
        np.asarray(cfg.acquisition.state_box_lo, dtype=float),
        np.asarray(cfg.acquisition.state_box_hi, dtype=float),
    )
    records: list[TrialRecord] = []
    limit = cfg.experiment.n_max if n_stop is None else min(n_stop, cfg.experiment.n_max)
    try:
        for n in range(1, limit + 1):
            t0 = time.perf_counter()
            traj_rng, select_rng, exec_rng, fit_rng, eval_rng = (
                np.random.default_rng(s) for s in root.spawn(5)
            )
            start_from = x if cfg.acquisition.traj_start == "current" else None
            trajset = sample_optimal_trajectories(
                model,
                spec,
                cfg.planner,
                cfg.acquisition.m,
                cfg.acquisition.traj_horizon,
                traj_rng,
                start_from=start_from,
            )
            cand = select_action(
                cfg.mode.mode,
                model,
                trajset,
                x,
                cfg.acquisition.n_candidates,
                cfg.mode.t_max,
                select_rng,
                spec.control_lo,
                spec.control_hi,
                state_box=state_box,
            )
            # barl may query off-trajectory: the chosen state is visited directly
            start_state = cand.bootstrapped_state if cfg.mode.mode == "barl" else x
            path = rollout_held(spec, start_state, cand.u, cand.tau, exec_rng)
            transitions.append(
                TransitionTuple(
                    x=path[-2], u=cand.u, x_next=path[-1], tau=cand.tau, epoch=k + cand.tau - 1
                )
            )
            bootstrap_err = float(np.linalg.norm(cand.bootstrapped_state - path[-2]))
            k += cand.tau
            dataset = GPDataset.from_transitions(transitions, spec.angle_dims)
            if len(transitions) >= 2 and len(transitions) % cfg.gp.refit_every == 0:
                fit = fit_hyperparams(
                    GPModel(dataset, params, spec.angle_dims),
                    restarts=cfg.gp.refit_restarts,
                    max_iters=cfg.gp.fit_max_iters,
                    seed=int(fit_rng.integers(0, 2**31 - 1)),
                )
                params = fit.params
            model = GPModel(dataset, params, spec.angle_dims)
            eval_cost = None
            if n % cfg.experiment.eval_every == 0:
                eval_cost = evaluate_policy(
                    GPMeanRollout(model, spec),
                    spec,
                    cfg.planner,
                    cfg.experiment.eval_starts,
                    cfg.experiment.eval_horizon,
                    eval_rng,
                )
            x = path[-1]
            records.append(
                TrialRecord(
                    n=n,
                    k=k,
                    tau=cand.tau,
                    eig=cand.eig,
                    eig_first_term=cand.report.first_term,
                    bootstrap_err=bootstrap_err,
                    eval_cost=eval_cost,
                    wall_ms=(time.perf_counter() - t0) * 1e3,
                )
            )
    except Exception as exc:  # noqa: BLE001 - partial records must survive
        raise TrialAbort(seed, records, exc) from exc
    return records, model


def run_trial(cfg: ExperimentConfig, seed: int, n_stop: int | None = None) -> list[TrialRecord]:
    """Run one seeded trial; returns one record per sampling iteration.

    `n_stop` truncates execution after that many iterations. The loop is
    sequential and random streams are derived per iteration, so a truncated
    run's records are identical to the prefix of a full run.
    """
    records, _ = _run_trial_impl(cfg, seed, n_stop)
    return records


def autocorrelation_diagnostic(
    spec: SystemSpec,
    intensities,
    ensemble: int,
    horizon: int,
    component: int,
    seed: int,
) -> dict[float, np.ndarray]:
    """Normalized ensemble covariance between X_0 and X_k for one component.

    Each intensity gets its own stream: an ensemble of initial draws evolves
    under i.i.d. uniform random controls of that amplitude, and the series
    Cov(X_0, X_k)/Var(X_0) is returned for k = 0..horizon.
    """
    if ensemble < 2:
        raise ValueError("ensemble must be >= 2")
    if not 0 <= component < spec.dim_state:
        raise ValueError("component out of range")
    out: dict[float, np.ndarray] = {}
    for idx, amp in enumerate(intensities):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(idx,)))
        states = sample_initial(spec, rng, size=ensemble)
        base_centered = states[:, component] - states[:, component].mean()
        var0 = float(np.mean(base_centered**2))
        series = np.empty(horizon + 1)
        current = states
        for lag in range(horizon + 1):
            comp = current[:, component]
            comp_centered = comp - comp.mean()
            series[lag] = float(np.mean(base_centered * comp_centered)) / var0
            if lag == horizon:
                break
            controls = rng.uniform(-amp, amp, size=(ensemble, spec.dim_control))
            current = step(spec, current, controls, rng)
        out[float(amp)] = series
    return out


def aggregate(trials: list[list[TrialRecord]]) -> list[AggregateRecord]:
    """Per-iteration mean and standard error across trials.

    Standard error is the ddof=1 sample std over trials divided by sqrt of the
    trial count (0 for a single trial). Trials must share the same iteration
    grid and evaluation pattern.
    """
    if not trials:
        raise ValueError("nothing to aggregate")
    grid = [r.n for r in trials[0]]
    eval_pattern = [r.eval_cost is not None for r in trials[0]]
    for t in trials[1:]:
        if [r.n for r in t] != grid:
            raise ValueError("trials have misaligned iteration grids")
        if [r.eval_cost is not None for r in t] != eval_pattern:
            raise ValueError("trials have misaligned evaluation patterns")
    out: list[AggregateRecord] = []
    count = len(trials)
    for i, n in enumerate(grid):
        for metric in AGGREGATE_METRICS:
            if metric == "eval_cost" and not eval_pattern[i]:
                continue
            values = np.array([_metric_value(t[i], metric) for t in trials], dtype=float)
            mean = float(values.mean())
            stderr = 0.0 if count == 1 else float(values.std(ddof=1) / np.sqrt(count))
            out.append(AggregateRecord(n=n, metric=metric, mean=mean, stderr=stderr, count=count))
    return out


def _metric_value(record: TrialRecord, metric: str) -> float:
    if metric == "eig":
        return record.eig
    if metric == "tau":
        return float(record.tau)
    if metric == "eval_cost":
        return record.eval_cost
    raise KeyError(metric)


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_trial_csv(records: list[TrialRecord], path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIAL_CSV_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.n,
                    r.k,
                    r.tau,
                    _fmt(r.eig),
                    _fmt(r.eig_first_term),
                    _fmt(r.bootstrap_err),
                    _fmt(r.eval_cost),
                    _fmt(r.wall_ms),
                ]
            )


def read_trial_csv(path) -> list[TrialRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRIAL_CSV_HEADER:
            raise ValueError(f"unexpected trial CSV header in {path}")
        for row in reader:
            records.append(
                TrialRecord(
                    n=int(row["n"]),
                    k=int(row["k"]),
                    tau=int(row["tau"]),
                    eig=float(row["eig"]),
                    eig_first_term=float(row["eig_first_term"]),
                    bootstrap_err=float(row["bootstrap_err"]),
                    eval_cost=float(row["eval_cost"]) if row["eval_cost"] else None,
                    wall_ms=float(row["wall_ms"]),
                )
            )
    return records


def write_aggregate_csv(records: list[AggregateRecord], path, failed_trials: int = 0):
    with open(path, "w", newline="") as fh:
        fh.write(f"# failed_trials={failed_trials}\n")
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_CSV_HEADER)
        for r in records:
            writer.writerow([r.n, r.metric, _fmt(r.mean), _fmt(r.stderr), r.count])


def version_string() -> str:
    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            check=False,
        )
        if described.returncode == 0 and described.stdout.strip():
            return f"{__version__}+g{described.stdout.strip()}"
    except OSError:
        pass
    return __version__


def write_manifest(cfg: ExperimentConfig, seeds, path, failed_seeds=()):
    payload = {
        "config": asdict(cfg),
        "seeds": list(seeds),
        "failed_seeds": list(failed_seeds),
        "version": version_string(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _trial_task(args):
    cfg, seed = args
    try:
        records, model = _run_trial_impl(cfg, seed, None)
        return seed, records, model, None
    except TrialAbort as abort:
        return seed, abort.records, None, str(abort)


def run_experiment(
    cfg: ExperimentConfig,
    output_dir,
    seeds=None,
    parallel: int = 1,
    save_models: bool = True,
    quiet: bool = False,
) -> Path:
    """Run all seeds, write per-trial CSVs, the aggregate, and the manifest."""
    seeds = list(cfg.experiment.seeds if seeds is None else seeds)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, seed) for seed in seeds]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_trial_task, tasks))
    else:
        results = [_trial_task(t) for t in tasks]
    completed: list[list[TrialRecord]] = []
    failed_seeds = []
    for seed, records, model, error in results:
        if error is None:
            write_trial_csv(records, out / f"trial_seed{seed}.csv")
            completed.append(records)
            if save_models and model is not None:
                save_model(model, out / f"model_seed{seed}.json")
            if not quiet:
                print(f"seed {seed}: {len(records)} iterations")
        else:
            write_trial_csv(records, out / f"failed_trial_seed{seed}.csv")
            failed_seeds.append(seed)
            if not quiet:
                print(f"seed {seed}: FAILED ({error})")
    if completed:
        write_aggregate_csv(aggregate(completed), out / "aggregate.csv", len(failed_seeds))
    write_manifest(cfg, seeds, out / "manifest.json", failed_seeds)
    if not completed:
        raise RuntimeError(f"all {len(seeds)} trials failed; partial records written to {out}")
    return out
