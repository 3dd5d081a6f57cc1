import numpy as np
import pytest

from smtip import gp
from smtip import planner as pl
from smtip.dynamics import (
    TransitionTuple,
    clip_control,
    cost,
    lorenz_spec,
    pendulum_spec,
    step,
    trajectory_cost,
)


class QuadraticModel(pl.RolloutModel):
    """Cost sum((u - target)^2); analytic minimizer is the target itself."""

    deterministic = True

    def __init__(self, target=0.0, bound=2.0):
        self.target = target
        self.control_lo = np.array([-bound])
        self.control_hi = np.array([bound])

    def rollout(self, x0, controls, rng=None):
        return None, float(np.sum((np.atleast_2d(controls)[:, 0] - self.target) ** 2))

    def rollout_batch(self, x0, controls_batch, rng=None):
        return np.sum((controls_batch[..., 0] - self.target) ** 2, axis=-1)


class ScalarIntegrator(pl.RolloutModel):
    """x' = x + u with cost sum(x^2 + u^2) plus terminal x^2."""

    deterministic = True
    control_lo = np.array([-5.0])
    control_hi = np.array([5.0])

    def rollout_batch(self, x0, controls_batch, rng=None):
        x = np.full(controls_batch.shape[0], float(np.atleast_1d(x0)[0]))
        total = np.zeros(controls_batch.shape[0])
        for k in range(controls_batch.shape[1]):
            u = controls_batch[:, k, 0]
            total += x * x + u * u
            x = x + u
        return total + x * x

    def rollout(self, x0, controls, rng=None):
        return None, float(self.rollout_batch(x0, np.atleast_2d(controls)[None])[0])


def riccati_cost(x0: float, horizon: int) -> float:
    # finite-horizon discrete LQR for A=B=Q=R=1 with terminal weight 1
    p = 1.0
    for _ in range(horizon):
        p = 1.0 + p - p * p / (1.0 + p)
    return p * x0 * x0


class TestColoredNoise:
    def test_white_noise_uncorrelated(self):
        rng = np.random.default_rng(0)
        lags = [
            np.corrcoef(y[:-1, 0], y[1:, 0])[0, 1]
            for y in (pl.colored_noise(0.0, 512, 1, rng) for _ in range(50))
        ]
        assert abs(np.mean(lags)) < 0.1

    def test_beta_two_strongly_correlated(self):
        rng = np.random.default_rng(1)
        lags = [
            np.corrcoef(y[:-1, 0], y[1:, 0])[0, 1]
            for y in (pl.colored_noise(2.0, 512, 1, rng) for _ in range(100))
        ]
        assert np.mean(lags) > 0.5

    @pytest.mark.parametrize("beta", [0.0, 1.0, 2.0])
    def test_unit_marginal_variance(self, beta):
        rng = np.random.default_rng(2)
        variances = [pl.colored_noise(beta, 512, 1, rng).var() for _ in range(100)]
        assert abs(np.mean(variances) - 1.0) < 0.15

    def test_shapes(self):
        rng = np.random.default_rng(3)
        assert pl.colored_noise(1.0, 1, 3, rng).shape == (1, 3)
        assert pl.colored_noise(1.0, 9, 2, rng).shape == (9, 2)
        assert pl.colored_noise(1.0, 8, 2, rng, size=5).shape == (5, 8, 2)

    def test_dims_independent(self):
        # white noise: sample cross-correlation of independent dims is ~N(0, 1/n)
        rng = np.random.default_rng(4)
        y = pl.colored_noise(0.0, 2048, 2, rng)
        assert abs(np.corrcoef(y[:, 0], y[:, 1])[0, 1]) < 0.1


class TestPlan:
    def test_origin_already_optimal(self):
        cfg = pl.PlannerConfig(
            horizon=5, population=200, elites=20, cem_iters=8,
            noise_beta=0.0, init_std=0.5, decay=0.6,
        )
        result = pl.plan(ScalarIntegrator(), np.zeros(1), cfg, np.random.default_rng(0))
        assert result.predicted_cost < 1e-2
        assert abs(result.first_action[0]) < 1e-2

    def test_lqr_within_five_percent(self):
        cfg = pl.PlannerConfig(
            horizon=10, population=300, elites=30, cem_iters=12,
            noise_beta=0.0, init_std=1.0, decay=0.85,
        )
        result = pl.plan(ScalarIntegrator(), np.ones(1), cfg, np.random.default_rng(0))
        oracle = riccati_cost(1.0, 10)
        assert result.predicted_cost <= 1.05 * oracle
        assert result.predicted_cost >= oracle - 1e-9  # oracle is the true optimum

    def test_degenerate_cem_mean_is_population_mean(self):
        # population == elites and no momentum: the refit mean is the sample mean
        cfg = pl.PlannerConfig(
            horizon=3, population=8, elites=8, cem_iters=1,
            noise_beta=0.0, init_std=1.0, momentum=0.0, decay=1.0,
            elite_keep_fraction=0.0,
        )
        model = QuadraticModel(bound=50.0)  # wide bounds: no clipping
        rng = np.random.default_rng(5)
        result = pl.plan(model, np.zeros(1), cfg, rng)
        noise = pl.colored_noise(0.0, 3, 1, np.random.default_rng(5), size=8)
        expected_mean = (0.0 + 1.0 * noise).mean(axis=0)
        assert np.allclose(result.mean, expected_mean, atol=1e-12)

    def test_large_population_converges_to_minimizer(self):
        cfg = pl.PlannerConfig(
            horizon=1, population=1000, elites=50, cem_iters=5, noise_beta=0.0, init_std=1.0
        )
        result = pl.plan(QuadraticModel(target=0.7), np.zeros(1), cfg, np.random.default_rng(6))
        assert abs(result.first_action[0] - 0.7) < 5e-2

    def test_best_cost_trace_non_increasing(self):
        cfg = pl.PlannerConfig(horizon=6, population=40, elites=8, cem_iters=6, noise_beta=1.0, init_std=1.0)
        result = pl.plan(ScalarIntegrator(), np.ones(1), cfg, np.random.default_rng(7))
        assert all(a >= b for a, b in zip(result.cost_trace, result.cost_trace[1:]))

    def test_controls_within_bounds(self):
        model = QuadraticModel(target=10.0, bound=0.5)  # optimum outside the box
        cfg = pl.PlannerConfig(horizon=4, population=60, elites=10, cem_iters=3, noise_beta=0.0, init_std=2.0)
        result = pl.plan(model, np.zeros(1), cfg, np.random.default_rng(8))
        assert np.all(result.best_controls >= model.control_lo - 1e-12)
        assert np.all(result.best_controls <= model.control_hi + 1e-12)

    def test_deterministic_under_seed(self):
        cfg = pl.PlannerConfig(horizon=5, population=30, elites=6, cem_iters=3, noise_beta=1.0, init_std=1.0)
        a = pl.plan(ScalarIntegrator(), np.ones(1), cfg, np.random.default_rng(9))
        b = pl.plan(ScalarIntegrator(), np.ones(1), cfg, np.random.default_rng(9))
        assert np.array_equal(a.best_controls, b.best_controls)
        assert a.predicted_cost == b.predicted_cost

    def test_all_nan_rollouts_raise(self):
        class NanModel(QuadraticModel):
            def rollout_batch(self, x0, controls_batch, rng=None):
                return np.full(controls_batch.shape[0], np.nan)

        cfg = pl.PlannerConfig(horizon=2, population=10, elites=2, cem_iters=1, init_std=1.0)
        with pytest.raises(pl.PlanningError):
            pl.plan(NanModel(), np.zeros(1), cfg, np.random.default_rng(10))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            pl.PlannerConfig(elites=10, population=5)
        with pytest.raises(ValueError):
            pl.PlannerConfig(decay=0.0)
        with pytest.raises(ValueError):
            pl.PlannerConfig(momentum=1.0)


class TestMPCPolicy:
    def test_repeat_call_with_reset_seed_identical(self):
        cfg = pl.PlannerConfig(horizon=4, population=20, elites=4, cem_iters=2, noise_beta=0.0, init_std=1.0)
        x = np.ones(1)
        a = pl.MPCPolicy(ScalarIntegrator(), cfg, np.random.default_rng(11))(x)
        b = pl.MPCPolicy(ScalarIntegrator(), cfg, np.random.default_rng(11))(x)
        assert np.array_equal(a, b)

    def test_pendulum_stays_upright_with_true_model(self):
        spec = pendulum_spec(sigma_process=0.0)
        cfg = pl.PlannerConfig(
            horizon=15, population=60, elites=10, cem_iters=3, noise_beta=1.0,
            init_std=1.0, mc_rollouts_per_sequence=1,
        )
        policy = pl.MPCPolicy(pl.TrueSystemRollout(spec), cfg, np.random.default_rng(12))
        x = np.zeros(2)
        rng = np.random.default_rng(13)
        for _ in range(50):
            x = step(spec, x, policy(x), rng)
            assert abs(x[0]) < 0.2

    def test_lorenz_control_beats_uncontrolled(self):
        spec = lorenz_spec(sigma_process=0.0)
        cfg = pl.PlannerConfig(
            horizon=20, population=60, elites=10, cem_iters=3, noise_beta=2.0,
            init_std=5.0, mc_rollouts_per_sequence=1,
        )
        x0 = spec.x_e + np.array([2.0, -2.0, 2.0])
        policy = pl.MPCPolicy(pl.TrueSystemRollout(spec), cfg, np.random.default_rng(14))
        x = x0.copy()
        controlled = 0.0
        rng = np.random.default_rng(15)
        for _ in range(60):
            u = clip_control(spec, policy(x))
            controlled += float(cost(spec, x, u))
            x = step(spec, x, u, rng)
        x = x0.copy()
        uncontrolled = 0.0
        rng = np.random.default_rng(15)
        for _ in range(60):
            uncontrolled += float(cost(spec, x, np.zeros(3)))
            x = step(spec, x, np.zeros(3), rng)
        assert controlled < uncontrolled

    def test_warm_start_shifts_previous_plan(self):
        cfg = pl.PlannerConfig(horizon=4, population=16, elites=4, cem_iters=1, noise_beta=0.0, init_std=0.1, momentum=0.0)
        policy = pl.MPCPolicy(ScalarIntegrator(), cfg, np.random.default_rng(16))
        policy(np.ones(1))
        first_warm = policy._warm.copy()
        policy(np.ones(1))
        assert policy._warm is not None
        assert first_warm.shape == (4, 1)


class TestRolloutModels:
    def make_gp_model(self):
        rng = np.random.default_rng(17)
        obs = [
            TransitionTuple(x=rng.uniform(-1, 1, 2), u=rng.uniform(-1, 1, 1), x_next=rng.uniform(-1, 1, 2))
            for _ in range(5)
        ]
        params = tuple(gp.KernelParams.create(np.ones(3), 1.0, 1e-3) for _ in range(2))
        return gp.GPModel(gp.GPDataset.from_transitions(obs), params)

    def test_true_system_batch_matches_single(self):
        spec = pendulum_spec(sigma_process=0.0)
        model = pl.TrueSystemRollout(spec)
        controls = np.random.default_rng(18).uniform(-2, 2, (3, 6, 1))
        batch = model.rollout_batch(spec.x_e, controls, np.random.default_rng(0))
        singles = [model.rollout(spec.x_e, c, np.random.default_rng(0))[1] for c in controls]
        assert np.allclose(batch, singles)

    def test_gp_mean_rollout_deterministic(self):
        spec = pendulum_spec(sigma_process=0.0)
        model = pl.GPMeanRollout(self.make_gp_model(), spec)
        controls = np.random.default_rng(19).uniform(-1, 1, (4, 5, 1))
        a = model.rollout_batch(np.zeros(2), controls)
        b = model.rollout_batch(np.zeros(2), controls)
        assert np.array_equal(a, b)
        assert model.deterministic

    def test_gp_sample_rollout_cost_matches_path(self):
        spec = pendulum_spec(sigma_process=0.0)
        model = pl.GPSampleRollout(self.make_gp_model(), spec)
        controls = np.random.default_rng(20).uniform(-1, 1, (4, 1))
        states, total = model.rollout(np.zeros(2), controls, np.random.default_rng(1))
        assert states.shape == (5, 2)
        assert total == pytest.approx(float(trajectory_cost(spec, states, controls)))

    def test_rollout_batch_order_independent_streams(self):
        # generic fallback derives one child stream per sequence
        spec = pendulum_spec(sigma_process=0.1)
        model = pl.TrueSystemRollout(spec)
        controls = np.random.default_rng(21).uniform(-2, 2, (5, 4, 1))
        costs = model.rollout_batch(spec.x_e, controls, np.random.default_rng(2))
        assert costs.shape == (5,)
        assert np.all(np.isfinite(costs))
