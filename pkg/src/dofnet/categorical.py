"""Exponential-family form of the categorical distribution.

A label y in 1..k is represented by its sufficient statistic
h(y) = [delta(y-1), ..., delta(y-(k-1))]: a one-hot vector over the first
k-1 classes, all zeros when y = k. A probability vector mu over k classes
maps to natural parameters (log-odds against the implied last class)

    theta_c = ln(mu_c) - ln(mu_k),            c = 1..k-1,

with log-partition A(theta) = ln(1 + sum_c exp(theta_c)). The deviance of
an observation row p under estimated probabilities mu_hat is

    err = -2 [ theta(mu_hat)^T p - A(theta(mu_hat)) ],

which reduces to -2 ln(mu_hat_y) for a one-hot observation of class y, and
stays well-defined (linear in p) for soft or perturbed observation rows.
Optimism is the gap between expected and realized deviance,
2 theta^T (p - mu_true), the quantity that degrees of freedom track.

All functions operate on float64 and are pure.
"""

import numpy as np

from .validation import (
    as_float_array,
    check_labels,
    check_observation_matrix,
    check_probability_row,
)

PROB_FLOOR = 1e-12


def encode_observations(labels, k):
    """One-hot-or-zero encoding of integer labels into an (n, k-1) matrix.

    Class k is the implied category and encodes as an all-zero row.
    """
    y = check_labels(labels, k)
    P = np.zeros((y.size, k - 1), dtype=np.float64)
    rows = np.nonzero(y < k)[0]
    P[rows, y[rows] - 1] = 1.0
    return P


def clamp_probabilities(mu):
    """Clip probabilities into [PROB_FLOOR, 1 - PROB_FLOOR] before taking logs.

    Saturated model heads can emit exact zeros; clamping keeps deviance
    finite without touching the raw predictions used elsewhere.
    """
    return np.clip(mu, PROB_FLOOR, 1.0 - PROB_FLOOR)


def natural_params(mu_row):
    """Log-odds of each of the first k-1 classes against class k.

    Rejects rows with nonpositive entries; use ``clamp_probabilities``
    upstream when feeding raw model output.
    """
    mu = check_probability_row(mu_row)
    if mu.min() <= 0.0:
        raise ValueError("natural parameters undefined: nonpositive probability (log of nonpositive)")
    return np.log(mu[:-1]) - np.log(mu[-1])


def log_partition(theta):
    """ln(1 + sum exp(theta_c)), max-shifted so extreme logits stay finite."""
    t = as_float_array(theta, name="theta", ndim=1)
    m = max(0.0, float(t.max())) if t.size else 0.0
    return m + np.log(np.exp(-m) + np.exp(t - m).sum())


def mean_from_natural(theta):
    """Inverse link: softmax over [theta; 0], returning the full k-vector.

    Round-trips with ``natural_params`` on strictly positive rows.
    """
    t = as_float_array(theta, name="theta", ndim=1)
    z = np.concatenate([t, [0.0]])
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def _theta_and_logpart(M):
    """Row-wise natural parameters and log-partition for an (n, k) matrix.

    Computed directly from (possibly clamped, possibly unnormalized)
    probabilities; no simplex check, callers own that.
    """
    logm = np.log(M)
    theta = logm[:, :-1] - logm[:, -1:]
    z = np.concatenate([theta, np.zeros((theta.shape[0], 1))], axis=1)
    m = z.max(axis=1, keepdims=True)
    A = (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True)))[:, 0]
    return theta, A


def deviance(obs_row, mu_hat_row, clamp=False):
    """Deviance -2[theta^T p - A(theta)] of one observation row.

    ``clamp=True`` clips ``mu_hat_row`` into the representable range first,
    for raw model output; with ``clamp=False`` nonpositive probabilities are
    rejected.
    """
    obs = as_float_array(obs_row, name="obs", ndim=1)
    mu = as_float_array(mu_hat_row, name="mu_hat", ndim=1)
    if mu.size != obs.size + 1:
        raise ValueError(f"mu_hat has {mu.size} entries, expected {obs.size + 1}")
    if clamp:
        mu = clamp_probabilities(mu)
    elif mu.min() <= 0.0:
        raise ValueError("deviance undefined: zero predicted probability")
    theta = np.log(mu[:-1]) - np.log(mu[-1])
    A = log_partition(theta)
    return -2.0 * (float(theta @ obs) - A)


def expected_deviance(mu_true_row, mu_hat_row, clamp=False):
    """Expectation of the deviance over observations drawn from ``mu_true_row``.

    Deviance is linear in the observation, so the expectation is the
    deviance evaluated at the first k-1 entries of the true probabilities:
    -2[theta(mu_hat)^T mu_true_{1..k-1} - A].
    """
    mu_true = check_probability_row(mu_true_row)
    return deviance(mu_true[:-1], mu_hat_row, clamp=clamp)


def optimism(obs_row, mu_true_row, mu_hat_row, clamp=False):
    """Closed-form optimism 2 theta(mu_hat)^T (p - mu_true_{1..k-1}).

    Equals expected_deviance(mu_true, mu_hat) - deviance(obs, mu_hat).
    """
    obs = as_float_array(obs_row, name="obs", ndim=1)
    mu_true = check_probability_row(mu_true_row)
    mu = as_float_array(mu_hat_row, name="mu_hat", ndim=1)
    if clamp:
        mu = clamp_probabilities(mu)
    elif mu.min() <= 0.0:
        raise ValueError("optimism undefined: zero predicted probability")
    theta = np.log(mu[:-1]) - np.log(mu[-1])
    return 2.0 * float(theta @ (obs - mu_true[:-1]))


def row_deviances(P, M_hat, clamp=True):
    """Vector of per-row deviances for an observation and a prediction matrix."""
    P = check_observation_matrix(P)
    M = as_float_array(M_hat, name="M_hat", ndim=2)
    if M.shape[0] != P.shape[0] or M.shape[1] != P.shape[1] + 1:
        raise ValueError(f"shape mismatch: P {P.shape} vs predictions {M.shape}")
    if clamp:
        M = clamp_probabilities(M)
    elif M.min() <= 0.0:
        raise ValueError("deviance undefined: zero predicted probability")
    theta, A = _theta_and_logpart(M)
    return -2.0 * ((theta * P).sum(axis=1) - A)


def total_deviance(P, M_hat, clamp=True):
    """Sum of row deviances; the training-error term of the selection criteria."""
    return float(row_deviances(P, M_hat, clamp=clamp).sum())
