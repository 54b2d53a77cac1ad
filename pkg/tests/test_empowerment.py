import numpy as np
import pytest

from empkit import (
    DynamicsModel,
    FeedforwardNet,
    GaussianPolicy,
    LayerSpec,
    OptimizerOptions,
    PendulumParams,
    build_pendulum_dynamics,
    empowerment_landscape,
    kl_diag_gaussian,
    marginal_transition,
    maximize_empowerment,
    mi_lower_bound,
    mi_lower_bound_with_gradient,
    select_action,
)
from empkit.empowerment import LOG_STD_MAX, LOG_STD_MIN


def shift_model(sigma=0.5):
    """1-D dynamics x' = x + a + N(0, sigma^2): the exactly solvable case."""
    layer = LayerSpec([[1.0, 1.0], [0.0, 0.0]], [0.0, np.log(sigma)])
    return DynamicsModel(FeedforwardNet((layer,)), state_dim=1, action_dim=1)


def tanh_model(sigma=0.5):
    """1-D dynamics x' = tanh(a) + N(0, sigma^2): bounded control authority."""
    layer = LayerSpec(
        [[0.0, 1.0], [0.0, 0.0]], [0.0, np.log(sigma)], ("tanh", "identity")
    )
    return DynamicsModel(FeedforwardNet((layer,)), state_dim=1, action_dim=1)


class TestGaussianPolicy:
    def test_log_std_clamped(self):
        pol = GaussianPolicy([0.0], [10.0])
        assert pol.action_log_std[0] == LOG_STD_MAX
        pol = GaussianPolicy([0.0], [-10.0])
        assert pol.action_log_std[0] == LOG_STD_MIN

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            GaussianPolicy([0.0, 1.0], [0.0])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            GaussianPolicy([np.inf], [0.0])


class TestMarginalTransition:
    def test_linear_gaussian_convolution_exact(self):
        sigma = 0.5
        model = shift_model(sigma)
        pol = GaussianPolicy([0.7], [np.log(0.3)])
        g = marginal_transition(model, [1.2], pol)
        assert g.mean[0] == pytest.approx(1.2 + 0.7, abs=1e-12)
        assert g.variance[0] == pytest.approx(0.3**2 + sigma**2, rel=1e-9)

    def test_narrow_policy_recovers_conditional(self):
        model = build_pendulum_dynamics(PendulumParams())
        state = [0.4, -1.0]
        pol = GaussianPolicy([0.8], [LOG_STD_MIN])
        marg = marginal_transition(model, state, pol)
        cond = model.conditional(state, [0.8])
        assert kl_diag_gaussian(cond, marg) < 1e-3

    def test_pendulum_marginal_matches_monte_carlo_small_std(self):
        model = build_pendulum_dynamics(PendulumParams())
        state = np.array([0.0, 0.0])
        std = 0.1
        pol = GaussianPolicy([0.0], [np.log(std)])
        marg = marginal_transition(model, state, pol)

        rng = np.random.default_rng(0)
        n = 200_000
        actions = std * rng.standard_normal(n)
        means = np.empty((n, 2))
        variances = np.empty((n, 2))
        for i, a in enumerate(actions):
            g = model.conditional(state, [a])
            means[i] = g.mean
            variances[i] = g.variance
        mc_mean = means.mean(axis=0)
        mc_var = means.var(axis=0) + variances.mean(axis=0)
        np.testing.assert_allclose(marg.mean, mc_mean, atol=2e-3)
        np.testing.assert_allclose(marg.variance, mc_var, rtol=0.10)

    def test_dimension_mismatch_rejected(self):
        model = shift_model()
        with pytest.raises(ValueError):
            marginal_transition(model, [0.0, 0.0], GaussianPolicy([0.0], [0.0]))


class TestMiLowerBound:
    def test_vanishing_policy_spread_gives_vanishing_mi(self):
        model = shift_model(0.5)
        pol = GaussianPolicy([0.3], [LOG_STD_MIN])
        mi = mi_lower_bound(model, [0.0], pol, mc_samples=64, seed=0)
        assert 0.0 <= mi < 1e-3

    def test_deterministic_per_seed(self):
        model = build_pendulum_dynamics(PendulumParams())
        pol = GaussianPolicy([0.2], [0.0])
        a = mi_lower_bound(model, [0.5, 1.0], pol, mc_samples=32, seed=7)
        b = mi_lower_bound(model, [0.5, 1.0], pol, mc_samples=32, seed=7)
        assert a == b

    def test_nonnegative_on_random_policies(self):
        model = build_pendulum_dynamics(PendulumParams())
        rng = np.random.default_rng(1)
        for _ in range(25):
            state = rng.uniform([-np.pi, -8.0], [np.pi, 8.0])
            pol = GaussianPolicy(rng.normal(size=1), rng.uniform(-3, 1, 1))
            mi = mi_lower_bound(model, state, pol, mc_samples=16,
                                seed=int(rng.integers(1 << 30)))
            assert mi >= -1e-12

    def test_linear_channel_matches_closed_form(self):
        # x' = x + a + noise with a ~ N(mu, s^2): MI = 0.5 ln(1 + s^2/sigma^2)
        sigma, s = 0.5, 0.8
        model = shift_model(sigma)
        pol = GaussianPolicy([0.4], [np.log(s)])
        mi = mi_lower_bound(model, [0.0], pol, mc_samples=10_000, seed=3)
        expected = 0.5 * np.log(1.0 + s**2 / sigma**2)
        assert mi == pytest.approx(expected, rel=0.02)

    def test_invalid_mc_samples(self):
        model = shift_model()
        with pytest.raises(ValueError):
            mi_lower_bound(model, [0.0], GaussianPolicy([0.0], [0.0]), 0, 0)


class TestGradient:
    @pytest.mark.parametrize("case", ["shift", "pendulum"])
    def test_matches_central_finite_differences(self, case):
        if case == "shift":
            model = shift_model(0.5)
            state = np.array([0.3])
        else:
            model = build_pendulum_dynamics(PendulumParams())
            state = np.array([0.7, -2.0])
        rng = np.random.default_rng(5)
        for _ in range(5):
            mean = rng.normal(size=1)
            log_std = rng.uniform(-2.0, 0.5, 1)
            pol = GaussianPolicy(mean, log_std)
            value, gmean, glog = mi_lower_bound_with_gradient(
                model, state, pol, mc_samples=16, seed=11
            )
            h = 1e-6
            for which in ("mean", "log_std"):
                if which == "mean":
                    plus = GaussianPolicy(mean + h, log_std)
                    minus = GaussianPolicy(mean - h, log_std)
                    analytic = gmean[0]
                else:
                    plus = GaussianPolicy(mean, log_std + h)
                    minus = GaussianPolicy(mean, log_std - h)
                    analytic = glog[0]
                fd = (
                    mi_lower_bound(model, state, plus, 16, 11)
                    - mi_lower_bound(model, state, minus, 16, 11)
                ) / (2 * h)
                assert analytic == pytest.approx(fd, rel=1e-5, abs=1e-8)


class TestMaximizeEmpowerment:
    def test_deterministic(self):
        model = build_pendulum_dynamics(PendulumParams())
        opts = OptimizerOptions(seed=4)
        a = maximize_empowerment(model, [1.0, 2.0], opts)
        b = maximize_empowerment(model, [1.0, 2.0], opts)
        assert a.value == b.value
        np.testing.assert_array_equal(a.policy.action_mean, b.policy.action_mean)
        np.testing.assert_array_equal(
            a.policy.action_log_std, b.policy.action_log_std
        )

    def test_value_nonnegative_and_converged_at_easy_state(self):
        model = build_pendulum_dynamics(PendulumParams())
        est = maximize_empowerment(model, [0.0, 0.0], OptimizerOptions())
        assert est.value >= 0.0
        assert est.converged

    def test_more_restarts_never_worse(self):
        model = build_pendulum_dynamics(PendulumParams())
        state = [2.5, -4.0]
        one = maximize_empowerment(
            model, state, OptimizerOptions(restarts=1, seed=9)
        )
        four = maximize_empowerment(
            model, state, OptimizerOptions(restarts=4, seed=9)
        )
        assert four.value >= one.value - 1e-12

    def test_linear_channel_saturates_log_std_clamp(self):
        # on x' = x + a + noise the MI grows with the action spread, so the
        # optimum sits at the upper log-std clamp with a known value
        sigma = 0.5
        model = shift_model(sigma)
        est = maximize_empowerment(
            model, [0.0], OptimizerOptions(max_iter=400, seed=2)
        )
        assert est.policy.action_log_std[0] == pytest.approx(LOG_STD_MAX, abs=1e-6)
        expected = 0.5 * np.log(1.0 + np.exp(2 * LOG_STD_MAX) / sigma**2)
        assert est.value == pytest.approx(expected, rel=0.05)

    def test_tanh_clipped_channel_saturates_clamp(self):
        # x' = tanh(a) + noise: spreading the action still helps, so the
        # optimizer runs the log-std into the upper clamp
        model = tanh_model(0.5)
        est = maximize_empowerment(
            model, [0.0], OptimizerOptions(max_iter=400, seed=1)
        )
        assert est.policy.action_log_std[0] == pytest.approx(LOG_STD_MAX, abs=1e-6)

    @pytest.mark.xfail(
        strict=True,
        reason="the delta-method marginal evaluates tanh' at the action mean, "
        "so a wide policy yields a marginal variance of ~e^4 where the true "
        "marginal is bounded by the tanh range; the estimate exceeds the "
        "discretized capacity several-fold, far outside 10%",
    )
    def test_tanh_clipped_channel_within_ten_percent_of_oracle(self):
        from empkit import oracle_empowerment

        model = tanh_model(0.5)
        est = maximize_empowerment(
            model, [0.0], OptimizerOptions(max_iter=400, seed=1)
        )
        cap = oracle_empowerment(model, [0.0], n_actions=64).capacity
        assert est.value == pytest.approx(cap, rel=0.10)

    def test_improves_on_initial_policy(self):
        model = build_pendulum_dynamics(PendulumParams())
        state = [0.3, 1.0]
        opts = OptimizerOptions(seed=6)
        est = maximize_empowerment(model, state, opts)
        init = mi_lower_bound(
            model, state, GaussianPolicy([0.0], [-1.0]), opts.mc_samples, opts.seed
        )
        assert est.value >= init

    def test_state_dimension_checked(self):
        model = shift_model()
        with pytest.raises(ValueError):
            maximize_empowerment(model, [0.0, 0.0], OptimizerOptions())


class TestSelectAction:
    def test_tie_breaks_to_first_candidate(self):
        # all actions lead to the same next state: x' = x + 0*a + noise
        layer = LayerSpec([[1.0, 0.0], [0.0, 0.0]], [0.0, np.log(0.5)])
        model = DynamicsModel(FeedforwardNet((layer,)), 1, 1)
        a, _ = select_action(
            model, [0.0], [[-1.0], [0.0], [1.0]], OptimizerOptions(max_iter=5)
        )
        assert a[0] == -1.0

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            select_action(shift_model(), [0.0], [], OptimizerOptions())

    def test_hanging_state_prefers_nonzero_torque(self):
        model = build_pendulum_dynamics(PendulumParams())
        opts = OptimizerOptions(restarts=2, max_iter=100, seed=0)
        a, value = select_action(
            model, [np.pi - 1e-6, 0.0], [[-2.0], [0.0], [2.0]], opts
        )
        assert a[0] != 0.0
        assert value > 0.0


class TestLandscape:
    def test_matches_single_state_runs(self):
        model = build_pendulum_dynamics(PendulumParams())
        opts = OptimizerOptions(seed=20)
        states = [np.array([0.0, 0.0]), np.array([1.0, -2.0])]
        results = empowerment_landscape(model, states, opts)
        assert len(results) == 2
        for i, (s, est) in enumerate(results):
            np.testing.assert_array_equal(s, states[i])
            solo = maximize_empowerment(
                model, states[i], OptimizerOptions(seed=20 + i)
            )
            assert est.value == solo.value

    def test_output_order_matches_input(self):
        model = build_pendulum_dynamics(PendulumParams())
        states = [np.array([a, 0.0]) for a in (-1.0, 0.0, 1.0)]
        results = empowerment_landscape(
            model, states, OptimizerOptions(max_iter=10)
        )
        for s_in, (s_out, _) in zip(states, results):
            np.testing.assert_array_equal(s_in, s_out)
