import math

import numpy as np
import pytest

from cbsurv import (
    ConfigurationError,
    NetworkConfig,
    NumericError,
    TrainingBatch,
    adam_step,
    bce_loss,
    forward,
    gradient,
    init_network,
    sample_case_base,
    train_network,
    train_on_sample,
)
from cbsurv.errors import DataError
from cbsurv.network import sigmoid
from cbsurv.data import SurvivalData


def linear_config(**kwargs):
    defaults = dict(layer_sizes=(), activation="linear", dropout_rate=0.0,
                    learning_rate=0.01, num_batches=1, epochs=1, seed=0)
    defaults.update(kwargs)
    return NetworkConfig(**defaults)


class TestInit:
    def test_degenerate_architecture(self):
        params = init_network(linear_config(), input_dim=3)
        assert params.n_layers == 1
        assert params.weights[0].shape == (3, 1)
        assert params.biases[0].shape == (1,)

    def test_deterministic(self):
        cfg = NetworkConfig(layer_sizes=(7, 3), seed=42)
        a, b = init_network(cfg, 5), init_network(cfg, 5)
        for x, y in zip(a.arrays(), b.arrays()):
            assert np.array_equal(x, y)

    def test_parameter_count(self):
        params = init_network(NetworkConfig(layer_sizes=(50, 10)), input_dim=4)
        assert params.parameter_count() == 4 * 50 + 50 + 50 * 10 + 10 + 10 * 1 + 1 == 771

    def test_biases_zero_weights_bounded(self):
        cfg = NetworkConfig(layer_sizes=(6,), seed=1)
        params = init_network(cfg, 4)
        assert np.all(params.biases[0] == 0.0)
        bound = math.sqrt(6.0 / (4 + 6))
        assert np.max(np.abs(params.weights[0])) <= bound

    def test_zero_layer_size_rejected(self):
        with pytest.raises(ConfigurationError):
            NetworkConfig(layer_sizes=(5, 0))


class TestForward:
    def test_zero_weights_give_offset(self):
        params = init_network(linear_config(), 2)
        params.weights[0][:] = 0.0
        batch = TrainingBatch(np.random.default_rng(0).normal(size=(8, 2)),
                              np.zeros(8), offset=2.302585)
        logits = forward(params, batch, "eval")
        assert np.allclose(logits, 2.302585)

    def test_eval_independent_of_seed(self):
        cfg = NetworkConfig(layer_sizes=(9,), dropout_rate=0.5, seed=2)
        params = init_network(cfg, 3)
        batch = TrainingBatch(np.random.default_rng(1).normal(size=(16, 3)),
                              np.zeros(16), offset=0.0)
        a = forward(params, batch, "eval", seed=0)
        b = forward(params, batch, "eval", seed=999)
        assert np.array_equal(a, b)

    def test_linear_dot_product(self):
        params = init_network(linear_config(), 2)
        params.weights[0][:, 0] = [1.0, 0.5]
        batch = TrainingBatch(np.array([[2.0, 4.0]]), np.zeros(1), offset=0.0)
        assert forward(params, batch, "eval")[0] == pytest.approx(4.0, abs=1e-15)

    def test_train_mode_dropout_deterministic_per_seed(self):
        cfg = NetworkConfig(layer_sizes=(32,), dropout_rate=0.5, seed=3)
        params = init_network(cfg, 3)
        batch = TrainingBatch(np.random.default_rng(2).normal(size=(4, 3)),
                              np.zeros(4), offset=0.0)
        a = forward(params, batch, "train", seed=7)
        b = forward(params, batch, "train", seed=7)
        c = forward(params, batch, "train", seed=8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_width_mismatch_rejected(self):
        params = init_network(linear_config(), 2)
        batch = TrainingBatch(np.zeros((4, 3)), np.zeros(4), offset=0.0)
        with pytest.raises(DataError):
            forward(params, batch, "eval")

    def test_dropout_expectation_matches_eval(self):
        # inverted dropout: E[masked activation] equals the eval activation
        cfg = NetworkConfig(layer_sizes=(1,), activation="relu", dropout_rate=0.3, seed=5)
        params = init_network(cfg, 1)
        params.weights[0][:] = 1.0
        params.weights[1][:] = 1.0
        batch = TrainingBatch(np.full((1, 1), 2.0), np.zeros(1), offset=0.0)
        eval_logit = forward(params, batch, "eval")[0]
        draws = np.array([forward(params, batch, "train", seed=s)[0] for s in range(10_000)])
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - eval_logit) < 3 * se + 1e-12


class TestLoss:
    def test_half_probability(self):
        assert bce_loss(np.array([0.0]), np.array([1.0])) == pytest.approx(math.log(2))

    def test_large_logit_stable(self):
        loss = bce_loss(np.array([50.0]), np.array([1.0]))
        assert 0.0 < loss < 1e-21
        assert math.isfinite(bce_loss(np.array([-1000.0]), np.array([0.0])))

    def test_symmetry(self):
        loss = bce_loss(np.array([0.0, 0.0]), np.array([0.0, 1.0]))
        assert loss == pytest.approx(math.log(2))

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            bce_loss(np.array([]), np.array([]))

    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            z = rng.normal(scale=5.0, size=10)
            y = (rng.random(10) < 0.5).astype(float)
            assert bce_loss(z, y) >= 0.0


class TestGradient:
    def test_matches_logistic_closed_form(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(40, 3))
        y = (rng.random(40) < 0.5).astype(float)
        params = init_network(linear_config(seed=8), 3)
        batch = TrainingBatch(X, y, offset=0.4)
        g = gradient(params, batch, "eval")
        z = X @ params.weights[0][:, 0] + params.biases[0][0] + 0.4
        residual = sigmoid(z) - y
        expected_w = X.T @ residual / len(y)
        expected_b = residual.mean()
        assert np.allclose(g.weights[0][:, 0], expected_w, atol=1e-12)
        assert g.biases[0][0] == pytest.approx(expected_b, abs=1e-12)

    def test_zero_at_perfect_separation_optimum(self):
        params = init_network(linear_config(), 1)
        params.weights[0][0, 0] = 60.0
        X = np.array([[1.0], [-1.0]])
        y = np.array([1.0, 0.0])
        g = gradient(params, TrainingBatch(X, y, 0.0), "eval")
        assert g.max_abs() < 1e-12

    def test_finite_differences_two_layer(self):
        rng = np.random.default_rng(6)
        cfg = NetworkConfig(layer_sizes=(8, 5), activation="relu", dropout_rate=0.0, seed=7)
        params = init_network(cfg, 4)
        X = rng.normal(size=(32, 4))
        y = (rng.random(32) < 0.5).astype(float)
        batch = TrainingBatch(X, y, offset=-1.2)
        g = gradient(params, batch, "train", seed=0)
        step = 1e-5
        worst = 0.0
        for arr, garr in zip(params.arrays(), g.arrays()):
            flat, gflat = arr.ravel(), garr.ravel()
            for k in range(flat.size):
                keep = flat[k]
                flat[k] = keep + step
                up = bce_loss(forward(params, batch, "eval"), y)
                flat[k] = keep - step
                down = bce_loss(forward(params, batch, "eval"), y)
                flat[k] = keep
                fd = (up - down) / (2 * step)
                worst = max(worst, abs(fd - gflat[k]) / max(abs(fd), abs(gflat[k]), 1e-8))
        assert worst < 1e-4

    def test_dropout_gradient_matches_masked_loss(self):
        # same seed => same mask in forward and gradient; finite differences
        # against the train-mode forward with that seed agree
        cfg = NetworkConfig(layer_sizes=(6,), activation="relu", dropout_rate=0.4, seed=9)
        params = init_network(cfg, 3)
        rng = np.random.default_rng(10)
        X = rng.normal(size=(12, 3))
        y = (rng.random(12) < 0.5).astype(float)
        batch = TrainingBatch(X, y, offset=0.0)
        g = gradient(params, batch, "train", seed=123)
        step = 1e-6
        w = params.weights[0]
        keep = w[0, 0]
        w[0, 0] = keep + step
        up = bce_loss(forward(params, batch, "train", seed=123), y)
        w[0, 0] = keep - step
        down = bce_loss(forward(params, batch, "train", seed=123), y)
        w[0, 0] = keep
        fd = (up - down) / (2 * step)
        assert fd == pytest.approx(g.weights[0][0, 0], rel=1e-4, abs=1e-9)


class TestAdam:
    def test_first_step_magnitude(self):
        params = init_network(linear_config(learning_rate=0.05), 2)
        g = gradient(params, TrainingBatch(np.array([[1.0, 2.0]]), np.array([1.0]), 0.0), "eval")
        before = [a.copy() for a in params.arrays()]
        adam_step(params, g, learning_rate=0.05)
        for arr, old, garr in zip(params.arrays(), before, g.arrays()):
            moved = arr - old
            nonzero = np.abs(garr) > 1e-12
            assert np.allclose(moved[nonzero], -0.05 * np.sign(garr[nonzero]), rtol=1e-4)

    def test_zero_gradient_fixed_point(self):
        params = init_network(linear_config(), 2)
        zero = gradient(params, TrainingBatch(np.zeros((1, 2)), np.array([1.0]), 30.0), "eval")
        for arr in zero.arrays():
            arr[:] = 0.0
        before = [a.copy() for a in params.arrays()]
        adam_step(params, zero, 0.1)
        assert params.step == 1
        for arr, old in zip(params.arrays(), before):
            assert np.array_equal(arr, old)

    def test_deterministic(self):
        cfg = linear_config()
        a, b = init_network(cfg, 2), init_network(cfg, 2)
        batch = TrainingBatch(np.array([[1.0, -1.0]]), np.array([0.0]), 0.0)
        ga, gb = gradient(a, batch, "eval"), gradient(b, batch, "eval")
        adam_step(a, ga, 0.01)
        adam_step(b, gb, 0.01)
        for x, y in zip(a.arrays(), b.arrays()):
            assert np.array_equal(x, y)

    def test_non_finite_gradient_rejected(self):
        params = init_network(linear_config(), 1)
        g = gradient(params, TrainingBatch(np.ones((1, 1)), np.array([1.0]), 0.0), "eval")
        g.weights[0][0, 0] = np.nan
        with pytest.raises(NumericError):
            adam_step(params, g, 0.01)


class TestTrain:
    def make_batch(self, n=400, seed=0):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, 2))
        logits = 1.5 * X[:, 0] - 0.5
        y = (rng.random(n) < 1 / (1 + np.exp(-logits))).astype(float)
        return TrainingBatch(X, y, offset=-0.7)

    def test_initial_loss_with_zero_init_equals_offset_loss(self):
        batch = self.make_batch()
        cfg = linear_config(epochs=1)
        params = init_network(cfg, 2)
        for arr in params.arrays():
            arr[:] = 0.0
        _, history = train_network(batch, cfg, init_params=params)
        expected = bce_loss(np.full(len(batch), batch.offset), batch.labels)
        assert history.losses[0] == pytest.approx(expected, abs=1e-12)

    def test_checkpoint_running_minimum(self):
        batch = self.make_batch()
        cfg = linear_config(epochs=25, num_batches=8)
        _, history = train_network(batch, cfg)
        running = np.minimum.accumulate(history.losses)
        assert np.all(np.diff(running) <= 0)
        assert history.best_loss == running[-1]

    def test_best_epoch_parameters_returned(self):
        batch = self.make_batch()
        cfg = linear_config(epochs=30, num_batches=4, learning_rate=0.05)
        params, history = train_network(batch, cfg)
        eval_logits = forward(params, batch, "eval")
        assert bce_loss(eval_logits, batch.labels) == pytest.approx(history.best_loss, abs=1e-12)

    def test_too_many_batches_rejected(self):
        batch = self.make_batch(n=10)
        with pytest.raises(ConfigurationError):
            train_network(batch, linear_config(num_batches=11))

    def test_offset_neutrality(self):
        # shifting the offset by delta and the output bias by -delta leaves the
        # whole loss trajectory unchanged (same logits at every step)
        rng = np.random.default_rng(12)
        X = rng.normal(size=(120, 2))
        y = (rng.random(120) < 0.5).astype(float)
        delta = 1.5
        cfg = linear_config(epochs=20, num_batches=4, learning_rate=0.02, seed=13)
        base = init_network(cfg, 2)
        shifted = base.copy()
        shifted.biases[-1][0] -= delta
        _, hist_a = train_network(TrainingBatch(X, y, -0.4), cfg, init_params=base)
        _, hist_b = train_network(TrainingBatch(X, y, -0.4 + delta), cfg, init_params=shifted)
        assert np.allclose(hist_a.losses, hist_b.losses, rtol=1e-9, atol=1e-12)

    def test_constant_hazard_recovery_through_sample(self):
        # intercept-only training on case-base moments recovers log(c/B)
        rng = np.random.default_rng(14)
        n = 1500
        d = SurvivalData(rng.exponential(5.0, n), np.ones(n), np.zeros((n, 0)))
        sample = sample_case_base(d, ratio=20, seed=3)
        cfg = linear_config(epochs=40, num_batches=50, learning_rate=0.05, seed=4)
        params, _ = train_on_sample(sample, cfg)
        recovered = math.exp(params.biases[0][0])
        mle = d.n_events / d.total_follow_up
        assert recovered == pytest.approx(mle, rel=0.05)
