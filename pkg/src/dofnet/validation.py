"""Input validation helpers shared by the estimators and the math core.

All numeric data is coerced to C-contiguous float64; the divided-difference
step in the degrees-of-freedom estimator divides by eps = 1e-5, so float32
rounding noise is not acceptable anywhere in the pipeline.
"""

import numpy as np

PROB_ROW_SUM_TOL = 1e-9


def as_float_array(a, name="array", ndim=None):
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_features(X):
    """Coerce a feature matrix to finite float64 of shape (n, p)."""
    return as_float_array(X, name="X", ndim=2)


def check_observation_matrix(P, k=None):
    """Coerce an observation matrix (sufficient statistics) to shape (n, k-1).

    Entries are not forced into {0, 1}: perturbed and soft-target
    observation matrices are legal inputs everywhere downstream of
    label encoding.
    """
    P = as_float_array(P, name="P", ndim=2)
    if P.shape[1] < 1:
        raise ValueError(f"P must have at least one column (k >= 2), got shape {P.shape}")
    if k is not None and P.shape[1] != k - 1:
        raise ValueError(f"P has {P.shape[1]} columns, expected k-1 = {k - 1}")
    return P


def check_probability_matrix(M, tol=PROB_ROW_SUM_TOL):
    """Validate an (n, k) matrix of class probabilities: entries in [0, 1], rows sum to 1."""
    M = as_float_array(M, name="probability matrix", ndim=2)
    if M.shape[1] < 2:
        raise ValueError(f"probability matrix needs k >= 2 columns, got shape {M.shape}")
    if M.min() < 0.0 or M.max() > 1.0:
        raise ValueError("probabilities outside [0, 1]")
    sums = M.sum(axis=1)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ValueError(f"row {i} sums to {sums[i]!r}, not 1 within {tol}")
    return M


def check_probability_row(mu, tol=PROB_ROW_SUM_TOL):
    """Validate a single length-k probability vector."""
    mu = as_float_array(mu, name="probability row", ndim=1)
    if mu.size < 2:
        raise ValueError("probability row needs k >= 2 entries")
    if mu.min() < 0.0 or mu.max() > 1.0:
        raise ValueError("probabilities outside [0, 1]")
    s = mu.sum()
    if abs(s - 1.0) > tol:
        raise ValueError(f"probability row sums to {s!r}, not 1 within {tol}")
    return mu


def check_labels(y, k):
    """Validate integer labels in 1..k; returns an int64 vector."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1-dimensional, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        yf = np.asarray(y, dtype=np.float64)
        yi = yf.astype(np.int64)
        if not np.array_equal(yf, yi):
            raise ValueError("labels must be integers")
        y = yi
    else:
        y = y.astype(np.int64)
    if int(k) < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    bad = (y < 1) | (y > k)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ValueError(f"label {y[i]} at index {i} outside 1..{k}")
    return y
