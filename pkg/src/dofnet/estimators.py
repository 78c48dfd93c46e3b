"""Classifiers with a uniform soft-label fit/predict surface.

Every estimator here fits an (n, p) feature matrix against an (n, k-1)
observation matrix of soft labels and afterwards exposes

    predict_proba(X) -> (n, k) class probabilities
    param_count()    -> number of trainable scalars

Fitting is a pure function of (X, P, hyperparameters, random_state):
refitting an identical configuration reproduces predictions bit for bit,
which the degrees-of-freedom estimator relies on. Estimators follow the
scikit-learn parameter conventions, so ``sklearn.base.clone`` yields a
fresh unfitted copy with the same configuration.

``MeanEstimator``, ``IdentityEstimator`` and ``LinearSmoother`` are
closed-form references whose degrees of freedom are known exactly; they
exist to cross-check the Monte-Carlo estimator.
"""

from typing import Protocol, runtime_checkable

import numpy as np
from sklearn.base import BaseEstimator

from .network import (
    Layer,
    Network,
    TrainConfig,
    forward,
    init_network,
    loss_and_gradients,
    param_count,
    pretrain_sda,
    train,
)
from .rng import RngStream
from .validation import check_features, check_observation_matrix


@runtime_checkable
class SoftLabelClassifier(Protocol):
    def fit(self, X, P): ...

    def predict_proba(self, X): ...

    def param_count(self): ...


def extend_with_implied(V):
    """Append the implied last-class column 1 - sum of the first k-1 columns."""
    V = np.asarray(V, dtype=np.float64)
    return np.column_stack([V, 1.0 - V.sum(axis=1)])


class MultinomialLogit(BaseEstimator):
    """Multinomial logistic regression by full-batch gradient descent.

    Minimizes the soft-target deviance (optionally plus
    ``weight_decay * ||W||^2`` on the per-sample-mean scale) with a constant
    step of ``learning_rate / n``, stopping when the objective gradient
    norm falls below ``tol`` or after ``max_iter`` iterations. The problem
    is convex, so the optimizer reaches the same fit from any init;
    ``init_scale > 0`` draws a random starting point from ``random_state``
    (used by tests), otherwise weights start at zero.

    Non-convergence within the cap is recorded on ``converged_``, not
    raised: separable data legitimately never reaches the tolerance.
    """

    def __init__(self, learning_rate=0.5, max_iter=50_000, tol=1e-8,
                 weight_decay=0.0, init_scale=0.0, random_state=0):
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.tol = tol
        self.weight_decay = weight_decay
        self.init_scale = init_scale
        self.random_state = random_state

    def fit(self, X, P):
        X = check_features(X)
        P = check_observation_matrix(P)
        n, p = X.shape
        k = P.shape[1] + 1
        if n < k:
            raise ValueError(f"need n >= k, got n={n}, k={k}")
        if self.init_scale > 0.0:
            gen = RngStream(self.random_state).generator("init")
            W = gen.normal(0.0, self.init_scale, size=(k - 1, p))
            b = gen.normal(0.0, self.init_scale, size=k - 1)
        else:
            W = np.zeros((k - 1, p))
            b = np.zeros(k - 1)
        net = Network([Layer(W, b)], k)
        decay_total = self.weight_decay * n  # mean-scale decay on the total objective
        step = self.learning_rate / n
        self.converged_ = False
        self.n_iter_ = self.max_iter
        for it in range(self.max_iter):
            loss, grads = loss_and_gradients(net, X, P, weight_decay_rate=decay_total)
            dW, db = grads[0]
            gnorm = float(np.sqrt((dW ** 2).sum() + (db ** 2).sum()))
            if gnorm <= self.tol:
                self.converged_ = True
                self.n_iter_ = it
                break
            net.head.W -= step * dW
            net.head.b -= step * db
        self.net_ = net
        self.loss_ = loss
        self.n_features_in_ = p
        self.k_ = k
        return self

    def predict_proba(self, X):
        return forward(self.net_, X)

    def param_count(self):
        # (p+1)(k-1): weights plus bias of the identifiable head
        return int(self.net_.head.W.size + self.net_.head.b.size)


class DeepNetClassifier(BaseEstimator):
    """Sigmoid network classifier with optional denoising-autoencoder pre-training.

    ``fit`` runs init -> pre-train (if ``pretrain_epochs > 0`` and there are
    hidden layers) -> minibatch SGD fine-tuning, all seeded from
    ``random_state``. ``hidden_widths=()`` degenerates to multinomial
    logistic regression trained by SGD.
    """

    def __init__(self, hidden_widths=(), learning_rate=0.1, epochs=10, batch_size=32,
                 weight_decay=0.0, dropout=0.0, corruption=0.0,
                 pretrain_epochs=0, pretrain_learning_rate=0.01, random_state=0):
        self.hidden_widths = hidden_widths
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.corruption = corruption
        self.pretrain_epochs = pretrain_epochs
        self.pretrain_learning_rate = pretrain_learning_rate
        self.random_state = random_state

    def _config(self):
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            weight_decay_rate=self.weight_decay,
            dropout_rate=self.dropout,
            corruption_rate=self.corruption,
            pretrain_epochs=self.pretrain_epochs,
            pretrain_learning_rate=self.pretrain_learning_rate,
        )

    def fit(self, X, P):
        X = check_features(X)
        P = check_observation_matrix(P)
        k = P.shape[1] + 1
        config = self._config()
        rng = RngStream(self.random_state)
        net = init_network(X.shape[1], list(self.hidden_widths), k, rng)
        if net.hidden and config.pretrain_epochs > 0:
            net = pretrain_sda(net, X, config, rng)
        net = train(net, X, P, config, rng)
        self.net_ = net
        self.n_features_in_ = X.shape[1]
        self.k_ = k
        return self

    def predict_proba(self, X):
        return forward(self.net_, X)

    def param_count(self):
        return param_count(self.net_)


class _MemorizingEstimator(BaseEstimator):
    """Shared predict logic for estimators whose fit is a map P -> fitted values.

    ``predict_proba`` returns the stored fitted values positionally when X
    is exactly the training matrix (the degrees-of-freedom path), falls
    back to per-row lookup for matching rows otherwise, and predicts the
    uniform distribution for rows never seen in training (the
    cross-validation path). Fitted rows are returned raw: perturbed
    observations may sit slightly outside [0, 1], and clamping happens
    only where deviance is evaluated.
    """

    def _store(self, X, fitted):
        self.X_ = X
        self.fitted_ = fitted
        self.k_ = fitted.shape[1] + 1
        self._index_ = {}
        for i, row in enumerate(X):
            self._index_.setdefault(row.tobytes(), i)

    def predict_proba(self, X):
        X = check_features(X)
        if X.shape == self.X_.shape and np.array_equal(X, self.X_):
            return extend_with_implied(self.fitted_)
        out = np.full((X.shape[0], self.k_), 1.0 / self.k_)
        for i, row in enumerate(X):
            j = self._index_.get(row.tobytes())
            if j is not None:
                out[i, :-1] = self.fitted_[j]
                out[i, -1] = 1.0 - self.fitted_[j].sum()
        return out


class MeanEstimator(_MemorizingEstimator):
    """Predicts the column mean of the observations for every row; df = k-1."""

    def fit(self, X, P):
        X = check_features(X)
        P = check_observation_matrix(P)
        self.mean_ = P.mean(axis=0)
        self._store(X, np.tile(self.mean_, (P.shape[0], 1)))
        return self

    def predict_proba(self, X):
        X = check_features(X)
        row = np.concatenate([self.mean_, [1.0 - self.mean_.sum()]])
        return np.tile(row, (X.shape[0], 1))

    def param_count(self):
        return int(self.mean_.size)

    def analytic_df(self):
        # dL_ic/dp_ic = 1/n summed over n(k-1) entries
        return float(self.k_ - 1)


class IdentityEstimator(_MemorizingEstimator):
    """The saturated model: fitted values are the observations themselves."""

    def fit(self, X, P):
        X = check_features(X)
        P = check_observation_matrix(P)
        self._store(X, P.copy())
        return self

    def param_count(self):
        return int(self.fitted_.size)

    def analytic_df(self):
        return float(self.fitted_.size)  # dp/dp = 1 at every entry


class LinearSmoother(_MemorizingEstimator):
    """Fitted values S @ P for a fixed n x n smoother matrix S.

    The per-category Jacobian is S itself, so df = (k-1) * trace(S); the
    divided difference of a linear map is exact at any step size, which
    makes this the sharpest oracle for the Monte-Carlo estimator.
    """

    def __init__(self, smoother=None):
        self.smoother = smoother

    def fit(self, X, P):
        X = check_features(X)
        P = check_observation_matrix(P)
        S = np.asarray(self.smoother, dtype=np.float64)
        if S.shape != (P.shape[0], P.shape[0]):
            raise ValueError(f"smoother must be {P.shape[0]} x {P.shape[0]}, got {S.shape}")
        self._store(X, S @ P)
        return self

    def param_count(self):
        return int(np.asarray(self.smoother).size)

    def analytic_df(self):
        return float((self.k_ - 1) * np.trace(np.asarray(self.smoother)))
