"""Information-gain acquisition over extended (control, hold-time) actions.

The value of querying a transition is the expected drop in predictive entropy
of the next state once the model is additionally conditioned on sampled
model-optimal trajectories. Candidates pair a control with a hold time; the
state at which the query will land is forecast by rolling the posterior mean
forward, so temporally extended candidates can be scored before committing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import SystemSpec, sample_initial
from .gp import GPModel, apply_increment, condition, sample_rollout
from .planner import GPSampleRollout, MPCPolicy, PlannerConfig

MODES = ("barl", "tip", "smtip")
ENTROPY_CONST = 0.5 * (math.log(2.0 * math.pi) + 1.0)


@dataclass(frozen=True)
class Candidate:
    """A proposed extended action with its scored information gain."""

    u: np.ndarray
    tau: int
    bootstrapped_state: np.ndarray
    eig: float
    report: "EIGReport | None" = None


@dataclass(frozen=True)
class EIGReport:
    first_term: float
    conditioned_terms: tuple
    estimate: float


@dataclass(frozen=True)
class PosteriorTrajectorySet:
    """Sampled model-optimal trajectories with their conditioned models cached.

    Iteration-local: build one per sampling iteration and discard it.
    """

    trajectories: tuple
    conditioned_models: tuple

    def __post_init__(self):
        if len(self.trajectories) < 1:
            raise ValueError("need at least one sampled trajectory")
        if len(self.trajectories) != len(self.conditioned_models):
            raise ValueError("trajectories and conditioned models must align")

    @property
    def m(self) -> int:
        return len(self.trajectories)


def gaussian_entropy(variances) -> float:
    """Differential entropy (nats) of a diagonal Gaussian with these variances."""
    variances = np.asarray(variances, dtype=float)
    if np.any(variances <= 0.0):
        raise ValueError("entropy needs strictly positive variances")
    return float(np.sum(ENTROPY_CONST + 0.5 * np.log(variances)))


def bootstrap_future(model: GPModel, x, u, tau: int) -> np.ndarray:
    """Forecast the state after holding `u` for tau-1 steps via the posterior mean."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    x_t = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    for _ in range(tau - 1):
        query = np.concatenate([x_t, u])
        mean, _ = model.posterior_increments(query[None, :])
        x_t = apply_increment(model, x_t, mean[0])
    return x_t


def sample_optimal_trajectories(
    model: GPModel,
    spec: SystemSpec,
    planner_cfg: PlannerConfig,
    m: int,
    horizon: int,
    rng: np.random.Generator,
    start_from: np.ndarray | None = None,
) -> PosteriorTrajectorySet:
    """Sample m trajectories of the planner acting under posterior-sampled dynamics.

    Each sample runs the receding-horizon policy where candidate sequences are
    scored by posterior-sample rollouts, executes it under trajectory-consistent
    posterior sampling, and caches the model conditioned on the result. Starts
    are fresh initial-state draws unless `start_from` pins them.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    trajectories = []
    conditioned = []
    for _ in range(m):
        plan_rng, exec_rng, start_rng = rng.spawn(3)
        x0 = sample_initial(spec, start_rng) if start_from is None else np.asarray(start_from, float)
        policy = MPCPolicy(GPSampleRollout(model, spec), planner_cfg, plan_rng)
        traj = tuple(sample_rollout(model, x0, policy, horizon, exec_rng))
        trajectories.append(traj)
        conditioned.append(condition(model, traj))
    return PosteriorTrajectorySet(tuple(trajectories), tuple(conditioned))


def _entropies_at(model: GPModel, queries: np.ndarray) -> np.ndarray:
    _, variances = model.posterior_increments(queries)
    if np.any(variances <= 0.0):
        raise ValueError("entropy needs strictly positive variances")
    return np.sum(ENTROPY_CONST + 0.5 * np.log(variances), axis=1)


def eig_batch(
    model: GPModel, trajset: PosteriorTrajectorySet, states: np.ndarray, controls: np.ndarray
) -> list[EIGReport]:
    """Score a batch of (state, control) queries against one trajectory set."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    queries = np.hstack([states, controls])
    first = _entropies_at(model, queries)
    conditioned = np.stack([_entropies_at(cm, queries) for cm in trajset.conditioned_models])
    estimates = first - conditioned.mean(axis=0)
    return [
        EIGReport(float(first[i]), tuple(float(c) for c in conditioned[:, i]), float(estimates[i]))
        for i in range(queries.shape[0])
    ]


def eig_point(model: GPModel, trajset: PosteriorTrajectorySet, x, u) -> EIGReport:
    """Expected information gain of querying the transition at (x, u)."""
    return eig_batch(model, trajset, np.asarray(x, float)[None, :], np.asarray(u, float)[None, :])[0]


def eig_smtip(
    model: GPModel, trajset: PosteriorTrajectorySet, x_now, u, tau: int
) -> tuple[EIGReport, np.ndarray]:
    """EIG of an extended action: bootstrap to the query state, then score it.

    With tau=1 the bootstrap is the identity and this reduces exactly to
    eig_point at the current state.
    """
    x_t = bootstrap_future(model, x_now, u, tau)
    return eig_point(model, trajset, x_t, u), x_t


def select_action(
    mode: str,
    model: GPModel,
    trajset: PosteriorTrajectorySet,
    x_now,
    n_candidates: int,
    t_max: int,
    rng: np.random.Generator,
    control_lo: np.ndarray,
    control_hi: np.ndarray,
    state_box: tuple[np.ndarray, np.ndarray] | None = None,
) -> Candidate:
    """Draw uniform candidates and return the argmax-EIG one (ties: lowest index).

    `tip` is `smtip` with the hold time forced to 1. `barl` draws query states
    uniformly from `state_box` instead of bootstrapping from x_now.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    du = control_lo.shape[0]
    us = rng.uniform(control_lo, control_hi, size=(n_candidates, du))
    if mode == "barl":
        if state_box is None:
            raise ValueError("barl mode needs a state_box")
        lo, hi = state_box
        xs = rng.uniform(lo, hi, size=(n_candidates, lo.shape[0]))
        taus = np.ones(n_candidates, dtype=int)
    else:
        t_cap = 1 if mode == "tip" else t_max
        taus = rng.integers(1, t_cap + 1, size=n_candidates)
        xs = np.stack(
            [bootstrap_future(model, x_now, us[i], int(taus[i])) for i in range(n_candidates)]
        )
    reports = eig_batch(model, trajset, xs, us)
    estimates = np.array([r.estimate for r in reports])
    best = int(np.argmax(estimates))
    return Candidate(
        u=us[best].copy(),
        tau=int(taus[best]),
        bootstrapped_state=xs[best].copy(),
        eig=float(estimates[best]),
        report=reports[best],
    )
