import numpy as np
import pytest
from sklearn.base import clone

from dofnet.categorical import encode_observations, total_deviance
from dofnet.datagen import gen_deepnet
from dofnet.estimators import (
    DeepNetClassifier,
    IdentityEstimator,
    LinearSmoother,
    MeanEstimator,
    MultinomialLogit,
    extend_with_implied,
)


def _toy_multiclass(n=60, p=3, k=3, seed=0):
    gen = np.random.default_rng(seed)
    X = gen.standard_normal((n, p))
    logits = X @ gen.standard_normal((p, k))
    probs = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    y = np.array([gen.choice(k, p=row) for row in probs]) + 1
    return X, encode_observations(y, k), y


class TestMultinomialLogit:
    def test_separable_data_perfect_accuracy(self):
        X = np.linspace(-2, 2, 20)[:, None]
        y = np.where(X[:, 0] > 0, 1, 2)
        P = encode_observations(y, 2)
        model = MultinomialLogit().fit(X, P)
        pred = np.argmax(model.predict_proba(X), axis=1) + 1
        assert np.array_equal(pred, y)
        assert model.converged_ is False  # separable: weights keep growing

    def test_intercept_only_predicts_frequencies(self):
        y = np.array([1] * 10 + [2] * 20 + [3] * 10)
        P = encode_observations(y, 3)
        X = np.zeros((40, 2))
        model = MultinomialLogit().fit(X, P)
        probs = model.predict_proba(X)
        np.testing.assert_allclose(probs[0], [0.25, 0.5, 0.25], atol=1e-6)
        assert model.converged_

    def test_param_count(self):
        X, P, _ = _toy_multiclass(n=30, p=5, k=4)
        model = MultinomialLogit().fit(X, P)
        assert model.param_count() == (5 + 1) * 3

    def test_convexity_same_loss_from_different_inits(self):
        X, P, _ = _toy_multiclass(seed=3)
        losses = []
        for seed in (1, 2, 3):
            m = MultinomialLogit(init_scale=0.5, random_state=seed).fit(X, P)
            assert m.converged_
            losses.append(m.loss_)
        assert max(losses) - min(losses) < 1e-6

    def test_refit_is_bit_identical(self):
        X, P, _ = _toy_multiclass(seed=4)
        a = MultinomialLogit().fit(X, P).predict_proba(X)
        b = MultinomialLogit().fit(X, P).predict_proba(X)
        assert np.array_equal(a, b)

    def test_weight_decay_shrinks_norms_monotonically(self):
        X, P, _ = _toy_multiclass(seed=5)
        norms = []
        for wd in (0.0, 1e-3, 1e-2, 1e-1, 1.0):
            m = MultinomialLogit(weight_decay=wd).fit(X, P)
            norms.append(float((m.net_.head.W ** 2).sum()))
        diffs = np.diff(norms)
        assert np.all(diffs <= 1e-9), norms

    def test_needs_enough_samples(self):
        with pytest.raises(ValueError, match="n >= k"):
            MultinomialLogit().fit(np.zeros((2, 1)), np.zeros((2, 2)))


class TestDeepNetClassifier:
    def test_same_seed_identical_predictions(self):
        X, P, _ = _toy_multiclass(n=40, seed=6)
        cfg = dict(hidden_widths=(5,), epochs=8, batch_size=8, random_state=3)
        a = DeepNetClassifier(**cfg).fit(X, P).predict_proba(X)
        b = DeepNetClassifier(**cfg).fit(X, P).predict_proba(X)
        assert np.array_equal(a, b)

    def test_depth_zero_agrees_with_full_batch_logit(self):
        X, P, _ = _toy_multiclass(n=50, seed=7)
        sgd = DeepNetClassifier(hidden_widths=(), learning_rate=0.5, epochs=3000,
                                batch_size=50, random_state=0).fit(X, P)
        gd = MultinomialLogit().fit(X, P)
        np.testing.assert_allclose(sgd.predict_proba(X), gd.predict_proba(X), atol=1e-3)

    def test_beats_intercept_only_on_deep_data(self):
        train, _ = gen_deepnet(n=300, input_dim=10, gen_widths=(10, 10), k=3,
                               seed=11, n_test=0)
        P = encode_observations(train.y, 3)
        net = DeepNetClassifier(hidden_widths=(30, 30), learning_rate=0.3, epochs=40,
                                batch_size=32, pretrain_epochs=5,
                                pretrain_learning_rate=0.05, random_state=1).fit(train.X, P)
        dev_net = total_deviance(P, net.predict_proba(train.X))
        freq = P.mean(axis=0)
        baseline = np.tile(np.concatenate([freq, [1 - freq.sum()]]), (train.n, 1))
        dev_base = total_deviance(P, baseline)
        assert dev_net < dev_base

    def test_pretraining_changes_fit_deterministically(self):
        X, P, _ = _toy_multiclass(n=40, seed=8)
        cfg = dict(hidden_widths=(6,), epochs=5, batch_size=8, pretrain_epochs=4,
                   corruption=0.2, dropout=0.1, random_state=5)
        a = DeepNetClassifier(**cfg).fit(X, P).predict_proba(X)
        b = DeepNetClassifier(**cfg).fit(X, P).predict_proba(X)
        c = DeepNetClassifier(**{**cfg, "pretrain_epochs": 0}).fit(X, P).predict_proba(X)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_param_count_matches_formula(self):
        X, P, _ = _toy_multiclass(n=30, p=3, k=3, seed=9)
        model = DeepNetClassifier(hidden_widths=(7, 7), epochs=1, random_state=0).fit(X, P)
        assert model.param_count() == (3 + 1) * 7 + (7 + 1) * 7 + (7 + 1) * 2

    def test_clone_preserves_configuration(self):
        est = DeepNetClassifier(hidden_widths=(4, 4), dropout=0.3, random_state=9)
        c = clone(est)
        assert c.get_params() == est.get_params()


class TestMeanEstimator:
    def test_binary_mean(self):
        X = np.zeros((2, 1))
        P = np.array([[1.0], [0.0]])
        m = MeanEstimator().fit(X, P)
        np.testing.assert_allclose(m.predict_proba(X), [[0.5, 0.5], [0.5, 0.5]])

    def test_predicts_same_row_for_unseen_inputs(self):
        X = np.arange(12.0).reshape(4, 3)
        P = encode_observations([1, 2, 3, 3], 3)
        m = MeanEstimator().fit(X, P)
        out = m.predict_proba(np.full((2, 3), 99.0))
        np.testing.assert_allclose(out, np.tile([0.25, 0.25, 0.5], (2, 1)))

    def test_analytic_df(self):
        X = np.zeros((10, 1))
        P = encode_observations(np.tile([1, 2, 3], 4)[:10], 3)
        m = MeanEstimator().fit(X, P)
        assert m.analytic_df() == 2.0


class TestIdentityEstimator:
    def test_returns_observations_on_training_inputs(self):
        gen = np.random.default_rng(0)
        X = gen.standard_normal((6, 2))
        P = encode_observations(gen.integers(1, 4, size=6), 3)
        m = IdentityEstimator().fit(X, P)
        np.testing.assert_array_equal(m.predict_proba(X)[:, :2], P)

    def test_raw_perturbed_rows_pass_through(self):
        gen = np.random.default_rng(1)
        X = gen.standard_normal((5, 2))
        P = encode_observations(gen.integers(1, 3, size=5), 2) + 1e-5 * gen.standard_normal((5, 1))
        m = IdentityEstimator().fit(X, P)
        np.testing.assert_array_equal(m.predict_proba(X)[:, :1], P)

    def test_unseen_rows_get_uniform(self):
        X = np.zeros((3, 2))
        X[:, 0] = [1, 2, 3]
        P = encode_observations([1, 2, 2], 2)
        m = IdentityEstimator().fit(X, P)
        out = m.predict_proba(np.array([[9.0, 0.0]]))
        np.testing.assert_allclose(out, [[0.5, 0.5]])

    def test_zero_train_deviance_on_one_hot(self):
        gen = np.random.default_rng(2)
        X = gen.standard_normal((8, 2))
        P = encode_observations(gen.integers(1, 3, size=8), 2)
        m = IdentityEstimator().fit(X, P)
        assert total_deviance(P, m.predict_proba(X), clamp=True) <= 1e-9

    def test_analytic_df(self):
        X = np.random.default_rng(3).standard_normal((10, 2))
        P = encode_observations(np.tile([1, 2, 3], 4)[:10], 3)
        m = IdentityEstimator().fit(X, P)
        assert m.analytic_df() == 20.0


class TestLinearSmoother:
    def test_identity_smoother_reproduces_observations(self):
        gen = np.random.default_rng(4)
        X = gen.standard_normal((5, 2))
        P = encode_observations(gen.integers(1, 4, size=5), 3)
        m = LinearSmoother(smoother=np.eye(5)).fit(X, P)
        np.testing.assert_allclose(m.predict_proba(X)[:, :2], P)
        assert m.analytic_df() == pytest.approx(10.0)

    def test_averaging_smoother(self):
        gen = np.random.default_rng(5)
        X = gen.standard_normal((4, 2))
        P = encode_observations([1, 1, 2, 2], 2)
        m = LinearSmoother(smoother=np.full((4, 4), 0.25)).fit(X, P)
        np.testing.assert_allclose(m.predict_proba(X)[:, 0], [0.5] * 4)
        assert m.analytic_df() == pytest.approx(1.0)

    def test_random_smoother_fitted_values_and_trace(self):
        gen = np.random.default_rng(6)
        S = gen.standard_normal((6, 6)) * 0.3
        X = gen.standard_normal((6, 3))
        P = encode_observations(gen.integers(1, 5, size=6), 4)
        m = LinearSmoother(smoother=S).fit(X, P)
        np.testing.assert_allclose(m.predict_proba(X)[:, :3], S @ P, atol=1e-12)
        assert m.analytic_df() == pytest.approx(3 * np.trace(S))

    def test_shape_check(self):
        with pytest.raises(ValueError, match="smoother"):
            LinearSmoother(smoother=np.eye(3)).fit(np.zeros((4, 1)), np.zeros((4, 1)))


def test_extend_with_implied_column():
    V = np.array([[0.2, 0.3], [0.5, 0.25]])
    out = extend_with_implied(V)
    np.testing.assert_allclose(out.sum(axis=1), 1.0)
    np.testing.assert_allclose(out[:, -1], [0.5, 0.25])
