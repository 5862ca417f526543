import numpy as np
import pytest

from otrom.errors import CholeskyFailure, DegenerateData
from otrom.gpr import (
    GprOptions,
    _chol_with_jitter,
    gpr_fit,
    gpr_predict,
    log_marginal_likelihood,
    make_gpr,
    se_kernel,
)


class TestSeKernel:
    def test_equal_points(self):
        assert se_kernel(1.3, 1.3, 2.5, 0.7) == pytest.approx(2.5)

    def test_one_length_scale_apart(self):
        assert se_kernel(0.0, 1.0, 1.0, 1.0) == pytest.approx(np.exp(-0.5))

    def test_decay(self):
        assert se_kernel(0.0, 1e3, 1.0, 1.0) == pytest.approx(0.0, abs=1e-300)

    def test_positive_length_scale(self):
        with pytest.raises(ValueError):
            se_kernel(0.0, 1.0, 1.0, 0.0)


class TestFit:
    def test_constant_targets(self):
        x = np.linspace(0.0, 1.0, 10)
        model = gpr_fit(x, np.full(10, 3.7))
        for xq in (0.0, 0.31, 2.0):
            mean, _ = gpr_predict(model, xq)
            assert mean == pytest.approx(3.7, abs=1e-8)

    def test_noiseless_sinusoid_interpolates(self):
        x = np.linspace(0.0, 1.0, 20)
        y = np.sin(2 * np.pi * x)
        model = gpr_fit(x, y)
        mean, _ = gpr_predict(model, x)
        np.testing.assert_allclose(mean, y, atol=1e-6)

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateData):
            gpr_fit(np.ones(5), np.arange(5.0))

    def test_gradient_matches_finite_differences(self, rng):
        h = 1e-5
        for _ in range(20):
            n = int(rng.integers(5, 15))
            x = np.sort(rng.uniform(0.0, 2.0, n))
            y = rng.normal(size=n)
            mean = float(y.mean())
            params = np.array([
                float(rng.uniform(0.2, 3.0)),
                float(rng.uniform(0.3, 1.5)),
                float(rng.uniform(1e-4, 1e-1)),
            ])
            _, grad = log_marginal_likelihood(x, y, *params, mean,
                                              with_grad=True)
            fd = np.empty(3)
            for k in range(3):
                up, dn = params.copy(), params.copy()
                up[k] *= np.exp(h)
                dn[k] *= np.exp(-h)
                fd[k] = (log_marginal_likelihood(x, y, *up, mean)
                         - log_marginal_likelihood(x, y, *dn, mean)) / (2 * h)
            assert np.linalg.norm(grad - fd) <= 1e-4 * max(1.0, np.linalg.norm(fd))

    def test_gradient_at_fitted_optimum(self, rng):
        x = np.sort(rng.uniform(0.0, 1.0, 12))
        y = np.sin(3 * x) + 0.05 * rng.normal(size=12)
        model = gpr_fit(x, y, GprOptions(refine_sweeps=30))
        _, grad = log_marginal_likelihood(
            x, y, model.sigma_f2, model.length_scale, model.noise,
            model.mean_const, with_grad=True)
        fd = np.empty(3)
        params = np.array([model.sigma_f2, model.length_scale, model.noise])
        for k in range(3):
            up, dn = params.copy(), params.copy()
            up[k] *= np.exp(1e-5)
            dn[k] *= np.exp(-1e-5)
            fd[k] = (log_marginal_likelihood(x, y, *up, model.mean_const)
                     - log_marginal_likelihood(x, y, *dn, model.mean_const)) / 2e-5
        assert np.linalg.norm(grad - fd) <= 1e-4 * max(1.0, np.linalg.norm(fd))


class TestPredict:
    def test_training_point_with_jitter_noise(self):
        x = np.array([0.0, 0.5, 1.0, 1.7])
        y = np.array([1.0, -0.5, 0.25, 2.0])
        jitter = 1e-10
        model = make_gpr(x, y, sigma_f2=1.0, length_scale=0.6, noise=jitter)
        mean, var = gpr_predict(model, x)
        np.testing.assert_allclose(mean, y, atol=1e-6)
        assert np.all(var <= 10 * max(jitter, model.noise))

    def test_prior_reversion_far_away(self):
        x = np.array([0.0, 0.1, 0.2])
        y = np.array([1.0, 1.2, 0.8])
        model = make_gpr(x, y, sigma_f2=2.0, length_scale=0.1, noise=1e-6)
        mean, var = gpr_predict(model, 50.0)
        assert mean == pytest.approx(model.mean_const, abs=1e-12)
        assert var == pytest.approx(2.0 + model.noise, rel=1e-9)

    def test_two_point_closed_form(self):
        # Explicit 2x2 solve oracle for X={0,1}, y={0,1}, fixed kernel.
        x = np.array([0.0, 1.0])
        y = np.array([0.0, 1.0])
        model = make_gpr(x, y, sigma_f2=1.0, length_scale=1.0, noise=1e-6)
        K = np.array([[1.0 + 1e-6, np.exp(-0.5)],
                      [np.exp(-0.5), 1.0 + 1e-6]])
        k_star = np.array([np.exp(-0.125), np.exp(-0.125)])
        mean_oracle = 0.5 + k_star @ np.linalg.solve(K, y - 0.5)
        var_oracle = 1.0 - k_star @ np.linalg.solve(K, k_star) + model.noise
        mean, var = gpr_predict(model, 0.5)
        assert mean == pytest.approx(mean_oracle, abs=1e-10)
        assert var == pytest.approx(var_oracle, abs=1e-10)

    def test_variance_at_training_inputs_bounded_by_noise(self, rng):
        x = np.sort(rng.uniform(0.0, 1.0, 15))
        y = np.sin(4 * x)
        model = gpr_fit(x, y)
        _, var = gpr_predict(model, x)
        assert np.all(var <= model.noise + 1e-8)

    def test_reorder_invariance(self, rng):
        x = np.sort(rng.uniform(0.0, 1.0, 12))
        y = np.cos(3 * x)
        perm = rng.permutation(12)
        m1 = make_gpr(x, y, 1.0, 0.4, 1e-6)
        m2 = make_gpr(x[perm], y[perm], 1.0, 0.4, 1e-6)
        q = np.linspace(-0.2, 1.2, 7)
        mean1, var1 = gpr_predict(m1, q)
        mean2, var2 = gpr_predict(m2, q)
        np.testing.assert_allclose(mean1, mean2, atol=1e-12)
        np.testing.assert_allclose(var1, var2, atol=1e-12)


class TestJitter:
    def test_failure_after_escalation(self):
        with pytest.raises(CholeskyFailure):
            _chol_with_jitter(np.array([[-1.0]]), 0.0, escalations=4)

    def test_escalation_recovers_rank_deficient(self):
        # Duplicate inputs make K singular at zero noise; jitter must rescue.
        K = se_kernel(np.zeros((3, 1)), np.zeros((1, 3)), 1.0, 1.0)
        L, eff = _chol_with_jitter(K, 0.0, escalations=4)
        assert eff > 0
        assert L.shape == (3, 3)
