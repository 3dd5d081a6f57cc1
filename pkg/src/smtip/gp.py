"""Exact Gaussian-process regression of one-step state transitions.

Each output dimension gets an independent scalar GP on state increments
(x_next - x) over concatenated (state, control) inputs, with a squared
exponential ARD kernel and Gaussian observation noise. Models are immutable:
conditioning on extra data returns a new model whose Cholesky factor extends
the parent's, so posterior variances shrink monotonically under conditioning
with fixed hyperparameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .dynamics import TransitionTuple, wrap_angle

JITTER_LADDER = (1e-10, 1e-8, 1e-6)
LOG_PARAM_BOUNDS = (-10.0, 8.0)
CHECKPOINT_FORMAT_VERSION = 1


class GPNumericsError(RuntimeError):
    """Gram matrix stayed non positive definite after the full jitter ladder."""


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential ARD hyperparameters, stored as logs."""

    log_lengthscales: np.ndarray
    log_signal_variance: float
    log_noise_variance: float

    def __post_init__(self):
        object.__setattr__(
            self, "log_lengthscales", np.asarray(self.log_lengthscales, dtype=float)
        )

    @staticmethod
    def create(lengthscales, signal_variance: float, noise_variance: float) -> "KernelParams":
        ls = np.asarray(lengthscales, dtype=float)
        if np.any(ls <= 0) or signal_variance <= 0 or noise_variance <= 0:
            raise ValueError("kernel hyperparameters must be strictly positive")
        return KernelParams(np.log(ls), math.log(signal_variance), math.log(noise_variance))

    @property
    def lengthscales(self) -> np.ndarray:
        return np.exp(self.log_lengthscales)

    @property
    def signal_variance(self) -> float:
        return math.exp(self.log_signal_variance)

    @property
    def noise_variance(self) -> float:
        return math.exp(self.log_noise_variance)

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.log_lengthscales, [self.log_signal_variance, self.log_noise_variance]]
        )

    @staticmethod
    def from_vector(vec: np.ndarray) -> "KernelParams":
        vec = np.asarray(vec, dtype=float)
        return KernelParams(vec[:-2].copy(), float(vec[-2]), float(vec[-1]))


def kernel_matrix(params: KernelParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross-covariance matrix k(a_i, b_j), shape (len(a), len(b))."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    inv_ls = 1.0 / params.lengthscales
    asc = a * inv_ls
    bsc = b * inv_ls
    d2 = (
        np.sum(asc * asc, axis=1)[:, None]
        + np.sum(bsc * bsc, axis=1)[None, :]
        - 2.0 * asc @ bsc.T
    )
    np.maximum(d2, 0.0, out=d2)
    return params.signal_variance * np.exp(-0.5 * d2)


def kernel_eval(params: KernelParams, a, b) -> float:
    """Scalar kernel value between two input vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("kernel_eval expects two equal-length vectors")
    z = (a - b) / params.lengthscales
    return params.signal_variance * math.exp(-0.5 * float(z @ z))


@dataclass(frozen=True)
class GPDataset:
    """Paired (state, control) inputs and state-increment targets."""

    inputs: np.ndarray
    targets: np.ndarray
    provenance: tuple = ()

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if inputs.shape[0] != targets.shape[0]:
            raise ValueError("inputs and targets must have the same length")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @staticmethod
    def empty(input_dim: int, output_dim: int) -> "GPDataset":
        return GPDataset(np.zeros((0, input_dim)), np.zeros((0, output_dim)))

    @staticmethod
    def from_transitions(transitions, wrap_dims: tuple = ()) -> "GPDataset":
        transitions = tuple(transitions)
        if not transitions:
            raise ValueError("cannot build a dataset from zero transitions; use GPDataset.empty")
        inputs = np.stack([np.concatenate([t.x, t.u]) for t in transitions])
        targets = np.stack([t.x_next - t.x for t in transitions])
        for dim in wrap_dims:
            targets[:, dim] = wrap_angle(targets[:, dim])
        return GPDataset(inputs, targets, transitions)

    def extended(self, transitions, wrap_dims: tuple = ()) -> "GPDataset":
        transitions = tuple(transitions)
        if not transitions:
            return self
        extra = GPDataset.from_transitions(transitions, wrap_dims)
        if extra.inputs.shape[1] != self.inputs.shape[1]:
            raise ValueError("transition width does not match dataset")
        return GPDataset(
            np.vstack([self.inputs, extra.inputs]),
            np.vstack([self.targets, extra.targets]),
            self.provenance + transitions,
        )


@dataclass(frozen=True)
class GaussianBelief:
    """Diagonal Gaussian over the next state (or increments)."""

    mean: np.ndarray
    variance: np.ndarray


def _chol_with_jitter(gram: np.ndarray, note: str) -> tuple[np.ndarray, float]:
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(gram + jitter * np.eye(gram.shape[0])), jitter
        except np.linalg.LinAlgError:
            continue
    raise GPNumericsError(f"gram matrix not positive definite ({note})")


def _extend_cholesky(
    chol: np.ndarray,
    inputs_old: np.ndarray,
    inputs_new: np.ndarray,
    params: KernelParams,
    base_jitter: float,
) -> np.ndarray:
    """Append rows for `inputs_new` to a training-gram Cholesky factor.

    The existing block is copied verbatim, which keeps posterior variances of
    the extended model bounded by the parent's at every query.
    """
    n = chol.shape[0]
    t = inputs_new.shape[0]
    out = np.zeros((n + t, n + t))
    out[:n, :n] = chol
    all_inputs = np.vstack([inputs_old, inputs_new]) if n else inputs_new
    diag = params.signal_variance + params.noise_variance + base_jitter
    for i in range(t):
        m = n + i
        if m:
            k_vec = kernel_matrix(params, inputs_new[i : i + 1], all_inputs[:m])[0]
            row = solve_triangular(out[:m, :m], k_vec, lower=True, check_finite=False)
            out[m, :m] = row
            rest = diag - float(row @ row)
        else:
            rest = diag
        if rest <= 0.0:
            for jitter in JITTER_LADDER:
                if jitter > base_jitter and rest + jitter > 0.0:
                    rest += jitter
                    break
            else:
                raise GPNumericsError("conditioning produced a non-PD gram extension")
        out[m, m] = math.sqrt(rest)
    return out


class GPModel:
    """Immutable per-output-dimension GP posterior with cached factorizations.

    `wrap_dims` marks circular output components: their increment targets are
    stored wrapped and predicted next states are re-wrapped into (-pi, pi].
    """

    def __init__(self, dataset: GPDataset, params, wrap_dims: tuple = (), _factorization=None):
        params = tuple(params)
        if not params:
            raise ValueError("need at least one output dimension")
        self.dataset = dataset
        self.params = params
        self.wrap_dims = tuple(wrap_dims)
        self.input_dim = dataset.inputs.shape[1]
        self.output_dim = len(params)
        if dataset.targets.shape[1] != self.output_dim:
            raise ValueError("target width does not match number of output GPs")
        if _factorization is not None:
            self._chols, self._jitters = _factorization
        else:
            self._chols, self._jitters = self._factorize()
        self._alphas = self._solve_alphas()

    def _factorize(self):
        n = len(self.dataset)
        chols, jitters = [], []
        for p in self.params:
            if n == 0:
                chols.append(np.zeros((0, 0)))
                jitters.append(JITTER_LADDER[0])
                continue
            gram = kernel_matrix(p, self.dataset.inputs, self.dataset.inputs)
            gram[np.diag_indices(n)] += p.noise_variance
            chol, jitter = _chol_with_jitter(gram, f"n={n}")
            chols.append(chol)
            jitters.append(jitter)
        return chols, jitters

    def _solve_alphas(self):
        alphas = []
        for j, chol in enumerate(self._chols):
            if chol.shape[0] == 0:
                alphas.append(np.zeros(0))
            else:
                alphas.append(
                    cho_solve((chol, True), self.dataset.targets[:, j], check_finite=False)
                )
        return alphas

    def __len__(self) -> int:
        return len(self.dataset)

    def posterior_increments(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance of the increment at a batch of queries.

        Variance is the predictive variance of an observed increment, i.e. it
        includes the observation noise. Shapes: (q, input_dim) -> (q, d) twice.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        q = queries.shape[0]
        means = np.zeros((q, self.output_dim))
        variances = np.empty((q, self.output_dim))
        for j, p in enumerate(self.params):
            prior_var = p.signal_variance + p.noise_variance
            if len(self.dataset) == 0:
                variances[:, j] = prior_var
                continue
            k_star = kernel_matrix(p, queries, self.dataset.inputs)
            means[:, j] = k_star @ self._alphas[j]
            v = solve_triangular(self._chols[j], k_star.T, lower=True, check_finite=False)
            variances[:, j] = prior_var - np.sum(v * v, axis=0)
        return means, variances

    def condition(self, transitions) -> "GPModel":
        """New model conditioned on extra transitions; hyperparameters unchanged."""
        transitions = tuple(transitions)
        if not transitions:
            return self
        new_dataset = self.dataset.extended(transitions, self.wrap_dims)
        extra = new_dataset.inputs[len(self.dataset) :]
        chols = [
            _extend_cholesky(self._chols[j], self.dataset.inputs, extra, p, self._jitters[j])
            for j, p in enumerate(self.params)
        ]
        return GPModel(
            new_dataset, self.params, self.wrap_dims, _factorization=(chols, list(self._jitters))
        )


def empty_model(input_dim: int, params, wrap_dims: tuple = ()) -> GPModel:
    return GPModel(GPDataset.empty(input_dim, len(tuple(params))), params, wrap_dims)


def apply_increment(model: GPModel, x, increment) -> np.ndarray:
    """Next state from a predicted increment; circular components re-wrapped."""
    out = np.asarray(x, dtype=float) + increment
    if model.wrap_dims:
        out = np.array(out, copy=True)
        for dim in model.wrap_dims:
            out[..., dim] = wrap_angle(out[..., dim])
    return out


def posterior(model: GPModel, x, u) -> GaussianBelief:
    """Predictive belief over the next state at one (state, control) query."""
    x = np.asarray(x, dtype=float)
    query = np.concatenate([x, np.asarray(u, dtype=float)])
    if query.shape[0] != model.input_dim:
        raise ValueError("query width does not match model input dimension")
    mean, var = model.posterior_increments(query[None, :])
    return GaussianBelief(apply_increment(model, x, mean[0]), var[0])


def condition(model: GPModel, transitions) -> GPModel:
    return model.condition(transitions)


class _IncrementalGP:
    """Mutable fantasy copy of a model, grown one transition at a time.

    Used for trajectory-consistent posterior sampling; the source model is
    never touched.
    """

    def __init__(self, model: GPModel, capacity: int):
        n = len(model.dataset)
        self.params = model.params
        self.input_dim = model.input_dim
        self.output_dim = model.output_dim
        self._jitters = list(model._jitters)
        cap = n + capacity
        self._inputs = np.zeros((cap, model.input_dim))
        self._inputs[:n] = model.dataset.inputs
        self._targets = np.zeros((cap, model.output_dim))
        self._targets[:n] = model.dataset.targets
        self._chols = []
        for chol in model._chols:
            buf = np.zeros((cap, cap))
            buf[:n, :n] = chol
            self._chols.append(buf)
        self.m = n
        self._alphas = [a.copy() for a in model._alphas]

    def posterior_increment(self, query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mean = np.zeros(self.output_dim)
        var = np.empty(self.output_dim)
        m = self.m
        for j, p in enumerate(self.params):
            prior_var = p.signal_variance + p.noise_variance
            if m == 0:
                var[j] = prior_var
                continue
            k_star = kernel_matrix(p, query[None, :], self._inputs[:m])[0]
            mean[j] = k_star @ self._alphas[j]
            v = solve_triangular(self._chols[j][:m, :m], k_star, lower=True, check_finite=False)
            var[j] = prior_var - float(v @ v)
        return mean, var

    def add(self, query: np.ndarray, target: np.ndarray):
        m = self.m
        if m + 1 > self._inputs.shape[0]:
            raise ValueError("incremental GP capacity exceeded")
        self._inputs[m] = query
        self._targets[m] = target
        for j, p in enumerate(self.params):
            chol = self._chols[j]
            diag = p.signal_variance + p.noise_variance + self._jitters[j]
            if m:
                k_vec = kernel_matrix(p, query[None, :], self._inputs[:m])[0]
                row = solve_triangular(chol[:m, :m], k_vec, lower=True, check_finite=False)
                chol[m, :m] = row
                rest = diag - float(row @ row)
            else:
                rest = diag
            if rest <= 0.0:
                rest = diag + JITTER_LADDER[-1]
                rest -= float(chol[m, :m] @ chol[m, :m])
                if rest <= 0.0:
                    raise GPNumericsError("fantasy update produced non-PD gram")
            chol[m, m] = math.sqrt(rest)
        self.m = m + 1
        self._alphas = [
            cho_solve(
                (self._chols[j][: self.m, : self.m], True),
                self._targets[: self.m, j],
                check_finite=False,
            )
            for j in range(self.output_dim)
        ]


def sample_path(
    model: GPModel, x0: np.ndarray, controls: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw one trajectory under the posterior, conditioning on each drawn step.

    `controls` has shape (T, du); returns (T+1, d) states. The model is not
    modified.
    """
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    horizon = controls.shape[0]
    d = model.output_dim
    inc = _IncrementalGP(model, horizon)
    states = np.empty((horizon + 1, d))
    states[0] = np.asarray(x0, dtype=float)
    for k in range(horizon):
        query = np.concatenate([states[k], controls[k]])
        mean, var = inc.posterior_increment(query)
        delta = mean + np.sqrt(np.maximum(var, 0.0)) * rng.standard_normal(d)
        states[k + 1] = apply_increment(model, states[k], delta)
        inc.add(query, delta)
    return states


def sample_paths_batch(
    model: GPModel, x0, controls_batch: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw one posterior-sampled trajectory per control sequence, in lockstep.

    Equivalent to calling sample_path per sequence (each path conditions on
    its own draws), but every member shares the base factorization and only
    carries a small Schur complement for its fantasy block. `x0` is one state
    or a (P, d) batch; returns (P, T+1, d) states.
    """
    controls_batch = np.asarray(controls_batch, dtype=float)
    pop, horizon, _ = controls_batch.shape
    d = model.output_dim
    n = len(model.dataset)
    base_inputs = model.dataset.inputs
    states = np.empty((pop, horizon + 1, d))
    states[:, 0] = np.asarray(x0, dtype=float)
    fantasy_inputs = np.empty((pop, horizon, model.input_dim))
    # per output dim: base-solve columns, Schur Cholesky rows, and h = Ls^-1 g
    v_cols = [np.empty((n, pop, horizon)) for _ in range(d)]
    schur = [np.zeros((pop, horizon, horizon)) for _ in range(d)]
    h_vecs = [np.empty((pop, horizon)) for _ in range(d)]
    inv_ls = [1.0 / p.lengthscales for p in model.params]
    means = np.empty((pop, d))
    variances = np.empty((pop, d))
    base_means = np.empty((pop, d))
    corrections = np.empty((pop, d))
    w_rows = [None] * d
    for t in range(horizon):
        queries = np.hstack([states[:, t], controls_batch[:, t]])
        for j, p in enumerate(model.params):
            if n:
                k_base = kernel_matrix(p, queries, base_inputs)
                v_b = solve_triangular(model._chols[j], k_base.T, lower=True, check_finite=False)
                base_mean = k_base @ model._alphas[j]
                explained = np.einsum("np,np->p", v_b, v_b)
            else:
                v_b = np.zeros((0, pop))
                base_mean = np.zeros(pop)
                explained = np.zeros(pop)
            if t:
                diff = (queries[:, None, :] - fantasy_inputs[:, :t]) * inv_ls[j]
                k_fant = p.signal_variance * np.exp(-0.5 * np.einsum("ptd,ptd->pt", diff, diff))
                proj = np.einsum("np,npt->pt", v_b, v_cols[j][:, :, :t])
                resid = k_fant - proj
                w = np.empty((pop, t))
                ls_block = schur[j]
                for i in range(t):
                    acc = resid[:, i]
                    if i:
                        acc = acc - np.einsum("pk,pk->p", ls_block[:, i, :i], w[:, :i])
                    w[:, i] = acc / ls_block[:, i, i]
                explained = explained + np.einsum("pt,pt->p", w, w)
                correction = np.einsum("pt,pt->p", w, h_vecs[j][:, :t])
            else:
                w = np.empty((pop, 0))
                correction = np.zeros(pop)
            w_rows[j] = w
            v_cols[j][:, :, t] = v_b
            base_means[:, j] = base_mean
            corrections[:, j] = correction
            means[:, j] = base_mean - correction
            variances[:, j] = p.signal_variance + p.noise_variance - explained
        deltas = means + np.sqrt(np.maximum(variances, 0.0)) * rng.standard_normal((pop, d))
        states[:, t + 1] = apply_increment(model, states[:, t], deltas)
        fantasy_inputs[:, t] = queries
        for j, p in enumerate(model.params):
            diag_sq = variances[:, j] + model._jitters[j]
            schur[j][:, t, :t] = w_rows[j]
            schur[j][:, t, t] = np.sqrt(np.maximum(diag_sq, 1e-300))
            g_new = base_means[:, j] - deltas[:, j]
            h_vecs[j][:, t] = (g_new - corrections[:, j]) / schur[j][:, t, t]
    return states


def sample_rollout(
    model: GPModel, x0: np.ndarray, policy, horizon: int, rng: np.random.Generator
) -> list[TransitionTuple]:
    """Roll a policy under posterior-sampled dynamics (trajectory-consistent).

    `policy` maps a state to a control. Returns the transitions; the model is
    left unmodified.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    inc = _IncrementalGP(model, horizon)
    x = np.asarray(x0, dtype=float)
    d = model.output_dim
    out = []
    for k in range(horizon):
        u = np.asarray(policy(x), dtype=float)
        query = np.concatenate([x, u])
        mean, var = inc.posterior_increment(query)
        delta = mean + np.sqrt(np.maximum(var, 0.0)) * rng.standard_normal(d)
        x_next = apply_increment(model, x, delta)
        inc.add(query, delta)
        out.append(TransitionTuple(x=x, u=u, x_next=x_next, tau=1, epoch=k))
        x = x_next
    return out


def _lml_single(
    inputs: np.ndarray, targets: np.ndarray, params: KernelParams, with_grad: bool
):
    n = inputs.shape[0]
    gram_f = kernel_matrix(params, inputs, inputs)
    gram = gram_f + params.noise_variance * np.eye(n)
    chol, jitter = _chol_with_jitter(gram, "lml")
    alpha = cho_solve((chol, True), targets, check_finite=False)
    value = (
        -0.5 * float(targets @ alpha)
        - float(np.sum(np.log(np.diag(chol))))
        - 0.5 * n * math.log(2.0 * math.pi)
    )
    if not with_grad:
        return value, None
    inner = np.outer(alpha, alpha) - cho_solve((chol, True), np.eye(n), check_finite=False)
    grad = np.empty(inputs.shape[1] + 2)
    ls = params.lengthscales
    for j in range(inputs.shape[1]):
        diff = inputs[:, j][:, None] - inputs[:, j][None, :]
        dk = gram_f * (diff / ls[j]) ** 2
        grad[j] = 0.5 * float(np.sum(inner * dk))
    grad[-2] = 0.5 * float(np.sum(inner * gram_f))
    grad[-1] = 0.5 * params.noise_variance * float(np.trace(inner))
    return value, grad


def log_marginal_likelihood(model: GPModel, with_grad: bool = False):
    """Sum of per-output-dimension log marginal likelihoods.

    With `with_grad`, also returns the gradient with respect to each output
    dimension's log-hyperparameters, concatenated in output order.
    """
    if len(model.dataset) == 0:
        raise ValueError("log marginal likelihood needs a non-empty dataset")
    total = 0.0
    grads = []
    for j, p in enumerate(model.params):
        value, grad = _lml_single(model.dataset.inputs, model.dataset.targets[:, j], p, with_grad)
        total += value
        if with_grad:
            grads.append(grad)
    if with_grad:
        return total, np.concatenate(grads)
    return total


@dataclass(frozen=True)
class FitResult:
    params: tuple
    improved: bool


def fit_hyperparams(
    model: GPModel, restarts: int = 3, max_iters: int = 60, seed: int = 0
) -> FitResult:
    """Multi-start L-BFGS ascent of the marginal likelihood, per output dim.

    Deterministic given `seed`. Keeps the incoming hyperparameters whenever no
    restart improves on them; `improved` reports whether any dimension moved.
    """
    if len(model.dataset) < 2:
        raise ValueError("hyperparameter fitting needs at least 2 observations")
    if max_iters == 0:
        return FitResult(model.params, False)
    rng = np.random.default_rng(seed)
    lo, hi = LOG_PARAM_BOUNDS
    best_params = []
    improved = False
    for j, p in enumerate(model.params):
        inputs = model.dataset.inputs
        targets = model.dataset.targets[:, j]

        def objective(vec):
            value, grad = _lml_single(inputs, targets, KernelParams.from_vector(vec), True)
            return -value, -grad

        start_vecs = [p.to_vector()]
        for _ in range(restarts):
            start_vecs.append(rng.uniform(-2.0, 2.0, size=p.to_vector().shape))
        base_value, _ = _lml_single(inputs, targets, p, False)
        best_vec, best_value = p.to_vector(), base_value
        for vec0 in start_vecs:
            try:
                res = minimize(
                    objective,
                    vec0,
                    jac=True,
                    method="L-BFGS-B",
                    bounds=[(lo, hi)] * len(vec0),
                    options={"maxiter": max_iters},
                )
            except GPNumericsError:
                continue
            value = -float(res.fun)
            if np.isfinite(value) and value > best_value:
                best_vec, best_value = res.x, value
        if best_value > base_value:
            improved = True
        best_params.append(KernelParams.from_vector(best_vec))
    return FitResult(tuple(best_params), improved)


def _float_to_hex(x: float) -> str:
    return float(x).hex()


def _hex_to_float(s: str) -> float:
    return float.fromhex(s)


def save_model(model: GPModel, path):
    """Write a checkpoint with bit-exact (hex) float encoding."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "wrap_dims": list(model.wrap_dims),
        "params": [
            {
                "log_lengthscales": [_float_to_hex(v) for v in p.log_lengthscales],
                "log_signal_variance": _float_to_hex(p.log_signal_variance),
                "log_noise_variance": _float_to_hex(p.log_noise_variance),
            }
            for p in model.params
        ],
        "inputs": [[_float_to_hex(v) for v in row] for row in model.dataset.inputs],
        "targets": [[_float_to_hex(v) for v in row] for row in model.dataset.targets],
        "provenance": [
            {
                "x": [_float_to_hex(v) for v in t.x],
                "u": [_float_to_hex(v) for v in t.u],
                "x_next": [_float_to_hex(v) for v in t.x_next],
                "tau": t.tau,
                "epoch": t.epoch,
            }
            for t in model.dataset.provenance
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path) -> GPModel:
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version: {version}")
    params = tuple(
        KernelParams(
            np.array([_hex_to_float(v) for v in p["log_lengthscales"]]),
            _hex_to_float(p["log_signal_variance"]),
            _hex_to_float(p["log_noise_variance"]),
        )
        for p in payload["params"]
    )
    inputs = np.array(
        [[_hex_to_float(v) for v in row] for row in payload["inputs"]], dtype=float
    ).reshape(-1, payload["input_dim"])
    targets = np.array(
        [[_hex_to_float(v) for v in row] for row in payload["targets"]], dtype=float
    ).reshape(-1, payload["output_dim"])
    provenance = tuple(
        TransitionTuple(
            x=np.array([_hex_to_float(v) for v in t["x"]]),
            u=np.array([_hex_to_float(v) for v in t["u"]]),
            x_next=np.array([_hex_to_float(v) for v in t["x_next"]]),
            tau=int(t["tau"]),
            epoch=int(t["epoch"]),
        )
        for t in payload["provenance"]
    )
    wrap_dims = tuple(int(v) for v in payload.get("wrap_dims", ()))
    return GPModel(GPDataset(inputs, targets, provenance), params, wrap_dims)
