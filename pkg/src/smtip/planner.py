"""Zeroth-order receding-horizon planning by iterative elite re-fitting.

The optimizer samples control sequences as mean + std * colored noise, scores
them through a rollout model, refits the sampling distribution to the elites
with momentum, decays the exploration std, and re-injects a fraction of the
elites into the next population. Rollout models wrap the true system, the GP
posterior mean, or GP posterior samples behind one small interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gp as gp_mod
from .dynamics import SystemSpec, step, trajectory_cost


class PlanningError(RuntimeError):
    """Every candidate rollout came back non-finite."""


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 25
    population: int = 200
    elites: int = 20
    cem_iters: int = 5
    noise_beta: float = 2.0
    init_std: float | None = None
    decay: float = 0.9
    momentum: float = 0.1
    elite_keep_fraction: float = 0.3
    mc_rollouts_per_sequence: int = 5

    def __post_init__(self):
        if self.horizon < 1 or self.population < 1 or self.cem_iters < 1:
            raise ValueError("horizon, population and cem_iters must be >= 1")
        if not 1 <= self.elites <= self.population:
            raise ValueError("need 1 <= elites <= population")
        if self.noise_beta < 0:
            raise ValueError("noise_beta must be >= 0")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if not 0.0 <= self.elite_keep_fraction < 1.0:
            raise ValueError("elite_keep_fraction must be in [0, 1)")
        if self.mc_rollouts_per_sequence < 1:
            raise ValueError("mc_rollouts_per_sequence must be >= 1")


def colored_noise(
    beta: float, horizon: int, dim: int, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Gaussian noise with power spectral density ~ 1/f^beta per dimension.

    Frequency-domain synthesis, normalized to unit marginal variance. Returns
    (horizon, dim), or (size, horizon, dim) when `size` is given.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    batch = (size,) if size is not None else ()
    if horizon == 1:
        return rng.standard_normal(batch + (1, dim))
    freqs = np.fft.rfftfreq(horizon)
    scale = freqs.copy()
    scale[0] = scale[1]
    scale **= -beta / 2.0
    weights = scale[1:].copy()
    weights[-1] *= (1 + (horizon % 2)) / 2.0
    sigma = 2.0 * math.sqrt(float(weights @ weights)) / horizon
    nf = freqs.shape[0]
    shape = batch + (dim, nf)
    real = rng.standard_normal(shape) * scale
    imag = rng.standard_normal(shape) * scale
    if horizon % 2 == 0:
        imag[..., -1] = 0.0
        real[..., -1] *= math.sqrt(2.0)
    imag[..., 0] = 0.0
    real[..., 0] *= math.sqrt(2.0)
    series = np.fft.irfft(real + 1j * imag, n=horizon, axis=-1) / sigma
    return np.swapaxes(series, -1, -2)


class RolloutModel:
    """Scores control sequences from a start state.

    Subclasses must set `control_lo`, `control_hi`, `deterministic`, and
    implement `rollout`. `rollout_batch` has a generic implementation that
    derives one child stream per sequence so results do not depend on
    evaluation order.
    """

    control_lo: np.ndarray
    control_hi: np.ndarray
    deterministic: bool = False

    def rollout(self, x0, controls, rng) -> tuple[np.ndarray, float]:
        raise NotImplementedError

    def rollout_batch(self, x0, controls_batch, rng) -> np.ndarray:
        streams = rng.spawn(controls_batch.shape[0])
        return np.array(
            [self.rollout(x0, seq, stream)[1] for seq, stream in zip(controls_batch, streams)]
        )


class TrueSystemRollout(RolloutModel):
    """Rolls the actual system; vectorized across the population."""

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.control_lo = spec.control_lo
        self.control_hi = spec.control_hi
        self.deterministic = spec.sigma_process == 0.0

    def rollout(self, x0, controls, rng):
        controls = np.atleast_2d(np.asarray(controls, dtype=float))
        states = np.empty((controls.shape[0] + 1, self.spec.dim_state))
        states[0] = x0
        for k in range(controls.shape[0]):
            states[k + 1] = step(self.spec, states[k], controls[k], rng)
        return states, float(trajectory_cost(self.spec, states, controls))

    def rollout_batch(self, x0, controls_batch, rng):
        pop, horizon, _ = controls_batch.shape
        states = np.empty((pop, horizon + 1, self.spec.dim_state))
        states[:, 0] = x0
        for k in range(horizon):
            states[:, k + 1] = step(self.spec, states[:, k], controls_batch[:, k], rng)
        return trajectory_cost(self.spec, states, controls_batch)


class GPMeanRollout(RolloutModel):
    """Deterministic rollouts through the GP posterior mean."""

    deterministic = True

    def __init__(self, model: gp_mod.GPModel, spec: SystemSpec):
        self.model = model
        self.spec = spec
        self.control_lo = spec.control_lo
        self.control_hi = spec.control_hi

    def rollout(self, x0, controls, rng=None):
        controls = np.atleast_2d(np.asarray(controls, dtype=float))
        states = np.empty((controls.shape[0] + 1, self.spec.dim_state))
        states[0] = x0
        for k in range(controls.shape[0]):
            query = np.concatenate([states[k], controls[k]])
            mean, _ = self.model.posterior_increments(query[None, :])
            states[k + 1] = gp_mod.apply_increment(self.model, states[k], mean[0])
        return states, float(trajectory_cost(self.spec, states, controls))

    def rollout_batch(self, x0, controls_batch, rng=None):
        pop, horizon, _ = controls_batch.shape
        states = np.empty((pop, horizon + 1, self.spec.dim_state))
        states[:, 0] = x0
        for k in range(horizon):
            queries = np.hstack([states[:, k], controls_batch[:, k]])
            mean, _ = self.model.posterior_increments(queries)
            states[:, k + 1] = gp_mod.apply_increment(self.model, states[:, k], mean)
        return trajectory_cost(self.spec, states, controls_batch)


class GPSampleRollout(RolloutModel):
    """Stochastic rollouts drawn from the GP posterior, one fantasy per call."""

    deterministic = False

    def __init__(self, model: gp_mod.GPModel, spec: SystemSpec):
        self.model = model
        self.spec = spec
        self.control_lo = spec.control_lo
        self.control_hi = spec.control_hi

    def rollout(self, x0, controls, rng):
        controls = np.atleast_2d(np.asarray(controls, dtype=float))
        states = gp_mod.sample_path(self.model, x0, controls, rng)
        return states, float(trajectory_cost(self.spec, states, controls))

    def rollout_batch(self, x0, controls_batch, rng):
        states = gp_mod.sample_paths_batch(self.model, x0, controls_batch, rng)
        return trajectory_cost(self.spec, states, controls_batch)


@dataclass(frozen=True)
class PlanResult:
    best_controls: np.ndarray
    first_action: np.ndarray
    predicted_cost: float
    cost_trace: tuple
    mean: np.ndarray
    std: np.ndarray


def _shift_warm_start(warm: np.ndarray, horizon: int) -> np.ndarray:
    shifted = np.empty((horizon, warm.shape[1]))
    shifted[:-1] = warm[1:horizon]
    shifted[-1] = warm[-1]
    return shifted


def plan(
    model: RolloutModel,
    x0: np.ndarray,
    cfg: PlannerConfig,
    rng: np.random.Generator,
    warm_start: np.ndarray | None = None,
) -> PlanResult:
    """Optimize a control sequence from x0; returns the best sequence found."""
    x0 = np.asarray(x0, dtype=float)
    du = model.control_lo.shape[0]
    lo = np.broadcast_to(model.control_lo, (cfg.horizon, du))
    hi = np.broadcast_to(model.control_hi, (cfg.horizon, du))
    if warm_start is not None:
        mean = np.clip(_shift_warm_start(np.asarray(warm_start, dtype=float), cfg.horizon), lo, hi)
    else:
        mean = 0.5 * (lo + hi) * np.ones((cfg.horizon, du))
    init_std = cfg.init_std if cfg.init_std is not None else float(np.max(hi - lo)) / 2.0
    std = np.full((cfg.horizon, du), init_std, dtype=float)

    mc = 1 if model.deterministic else cfg.mc_rollouts_per_sequence
    n_keep = int(math.ceil(cfg.elite_keep_fraction * cfg.elites))
    kept: np.ndarray | None = None
    best_controls = None
    best_cost = math.inf
    trace = []
    for _ in range(cfg.cem_iters):
        n_new = cfg.population if kept is None else max(cfg.population - kept.shape[0], 1)
        noise = colored_noise(cfg.noise_beta, cfg.horizon, du, rng, size=n_new)
        cands = np.clip(mean + std * noise, lo, hi)
        if kept is not None:
            cands = np.concatenate([kept, cands], axis=0)
        if mc == 1:
            costs = np.asarray(model.rollout_batch(x0, cands, rng), dtype=float)
        else:
            repeated = np.repeat(cands, mc, axis=0)
            costs = np.asarray(model.rollout_batch(x0, repeated, rng), dtype=float)
            costs = costs.reshape(cands.shape[0], mc).mean(axis=1)
        costs = np.where(np.isnan(costs), np.inf, costs)
        if not np.any(np.isfinite(costs)):
            raise PlanningError("all candidate rollouts were non-finite")
        order = np.argsort(costs, kind="stable")
        elite_idx = order[: cfg.elites]
        elite_seqs = cands[elite_idx]
        elite_costs = costs[elite_idx]
        if elite_costs[0] < best_cost:
            best_cost = float(elite_costs[0])
            best_controls = elite_seqs[0].copy()
        mean = cfg.momentum * mean + (1.0 - cfg.momentum) * elite_seqs.mean(axis=0)
        std = cfg.momentum * std + (1.0 - cfg.momentum) * elite_seqs.std(axis=0)
        std = std * cfg.decay
        kept = elite_seqs[:n_keep].copy() if n_keep else None
        trace.append(best_cost)
    return PlanResult(
        best_controls=best_controls,
        first_action=best_controls[0].copy(),
        predicted_cost=best_cost,
        cost_trace=tuple(trace),
        mean=mean,
        std=std,
    )


class MPCPolicy:
    """Stateful receding-horizon policy: re-plans at each call, warm-started."""

    def __init__(self, model: RolloutModel, cfg: PlannerConfig, rng: np.random.Generator):
        self.model = model
        self.cfg = cfg
        self._rng = rng
        self._warm: np.ndarray | None = None
        self.last_result: PlanResult | None = None

    def __call__(self, x) -> np.ndarray:
        result = plan(self.model, x, self.cfg, self._rng, warm_start=self._warm)
        self._warm = result.best_controls
        self.last_result = result
        return result.first_action

    def reset(self):
        self._warm = None
        self.last_result = None


def mpc_policy(model: RolloutModel, cfg: PlannerConfig, rng: np.random.Generator) -> MPCPolicy:
    return MPCPolicy(model, cfg, rng)
