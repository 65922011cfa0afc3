import numpy as np
import pytest

from bayesrisk import likelihood
from bayesrisk.likelihood import (LikelihoodModel, TrainingConfig, backward,
                                  dataset_loss, forward, init_model, load_model,
                                  loss, parameter_count, save_model, train)
from bayesrisk.demos import TrainingExample
from bayesrisk.errors import ConfigError, DatasetError, FormatError, SchemaError


def small_model(seed=0):
    return init_model(6, width=16, layers=1, seed=seed)


class TestInit:
    def test_deterministic(self):
        a, b = small_model(3), small_model(3)
        for name in a.param_names():
            np.testing.assert_array_equal(a.params[name], b.params[name])

    def test_width_divisibility(self):
        with pytest.raises(ConfigError):
            init_model(6, width=7)

    def test_parameter_count_closed_form(self):
        model = init_model(32, width=64, layers=2, seed=0)
        tally = sum(v.size for v in model.params.values())
        assert tally == parameter_count(32, 64, 2, model.ff_dim)

    def test_layers_check(self):
        with pytest.raises(ConfigError):
            init_model(6, width=16, layers=0)


class TestForward:
    def test_permutation_invariance_bitwise(self):
        model = small_model()
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b = rng.normal(size=6), rng.normal(size=6)
            np.testing.assert_array_equal(forward(model, a, b), forward(model, b, a))

    def test_output_range_and_monotonicity(self):
        model = small_model()
        rng = np.random.default_rng(2)
        for _ in range(25):
            cp = forward(model, rng.normal(size=6), rng.normal(size=6))
            assert np.all(cp > 0) and np.all(cp < 1)
            assert np.all(np.diff(cp) >= 0)

    def test_zero_weight_head_gives_sigmoid_bias(self):
        model = small_model()
        model.params["out_w"] = np.zeros_like(model.params["out_w"])
        model.params["out_b"] = np.linspace(-1.0, 1.0, 10)
        cp = forward(model, np.zeros(6), np.ones(6))
        expected = np.maximum.accumulate(1.0 / (1.0 + np.exp(-model.params["out_b"])))
        np.testing.assert_allclose(cp, expected, atol=1e-12)


class TestLoss:
    def test_zero_at_target(self):
        t = np.linspace(0.1, 0.9, 10)
        assert loss(t, t) == 0.0

    def test_constant_offset(self):
        t = np.linspace(0.1, 0.8, 10)
        assert loss(t + 0.1, t) == pytest.approx(0.01)

    def test_matches_reference(self):
        rng = np.random.default_rng(3)
        p, t = rng.uniform(size=10), rng.uniform(size=10)
        assert loss(p, t) == pytest.approx(float(np.mean((p - t) ** 2)))


class TestBackward:
    def test_zero_gradient_at_target(self):
        model = small_model()
        rng = np.random.default_rng(4)
        a, b = rng.normal(size=6), rng.normal(size=6)
        grads = backward(model, a, b, forward(model, a, b))
        for g in grads.values():
            np.testing.assert_array_equal(g, np.zeros_like(g))

    def test_finite_difference_check(self):
        model = small_model(seed=5)
        rng = np.random.default_rng(6)
        a, b = rng.normal(size=6), rng.normal(size=6)
        target = np.sort(rng.uniform(size=10))
        grads = backward(model, a, b, target)
        eps = 1e-5
        worst = 0.0
        for name in model.param_names():
            p = model.params[name]
            flat = p.reshape(-1)
            idx = rng.choice(flat.size, size=min(5, flat.size), replace=False)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + eps
                up = loss(forward(model, a, b), target)
                flat[i] = orig - eps
                dn = loss(forward(model, a, b), target)
                flat[i] = orig
                fd = (up - dn) / (2 * eps)
                g = grads[name].reshape(-1)[i]
                worst = max(worst, abs(g - fd) / max(1.0, abs(g)))
        assert worst <= 1e-4

    def test_gradient_symmetry(self):
        model = small_model()
        rng = np.random.default_rng(7)
        a, b = rng.normal(size=6), rng.normal(size=6)
        target = np.sort(rng.uniform(size=10))
        ga = backward(model, a, b, target)
        gb = backward(model, b, a, target)
        for name in ga:
            np.testing.assert_allclose(ga[name], gb[name], atol=1e-15)


def _toy_examples(n=12, seed=0):
    rng = np.random.default_rng(seed)
    target = np.sort(rng.uniform(size=10))
    return [TrainingExample(rng.normal(size=6), rng.normal(size=6), target, f"t{i}")
            for i in range(n)]


class TestTrain:
    def test_loss_history_deterministic(self):
        examples = _toy_examples()
        cfg = TrainingConfig(learning_rate=0.05, epochs=3, batch_size=4, seed=1)
        _, h1 = train(small_model(), examples, cfg)
        _, h2 = train(small_model(), examples, cfg)
        assert h1 == h2
        assert len(h1) == 4  # pre-training entry + one per epoch

    def test_overfits_single_example(self):
        # The running-max head only passes gradient to the active element, so
        # an init whose raw outputs become dominated can lock pairs of control
        # points at their mean.  Seeds are chosen so the raw head outputs stay
        # in target order and every position trains to its own value.
        example = _toy_examples(1, seed=10)
        cfg = TrainingConfig(learning_rate=0.2, epochs=500, batch_size=1, seed=2)
        model, history = train(small_model(seed=1), example, cfg)
        assert history[-1] <= 1e-4

    def test_empty_dataset_rejected(self):
        with pytest.raises(DatasetError):
            train(small_model(), [], TrainingConfig())

    def test_dataset_loss_matches_history_head(self):
        examples = _toy_examples()
        model = small_model()
        cfg = TrainingConfig(learning_rate=0.01, epochs=1, batch_size=4, seed=0)
        _, history = train(small_model(), examples, cfg)
        assert history[0] == pytest.approx(dataset_loss(model, examples))


class TestModelIO:
    def test_round_trip(self, tmp_path):
        model = small_model(seed=9)
        rng = np.random.default_rng(10)
        a, b = rng.normal(size=6), rng.normal(size=6)
        before = forward(model, a, b)
        path = tmp_path / "model.bin"
        save_model(model, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(forward(loaded, a, b), before)

    def test_truncated_file(self, tmp_path):
        model = small_model()
        path = tmp_path / "model.bin"
        save_model(model, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(FormatError):
            load_model(path)

    def test_wrong_feature_dim(self, tmp_path):
        model = small_model()
        path = tmp_path / "model.bin"
        save_model(model, path)
        with pytest.raises(SchemaError):
            load_model(path, expect_feature_dim=32)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "model.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(FormatError):
            load_model(path)
