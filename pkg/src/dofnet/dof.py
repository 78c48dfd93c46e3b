"""Monte-Carlo estimation of classifier degrees of freedom.

Degrees of freedom of a fitting procedure L are the summed sensitivities
of each sample's fitted probabilities to its own observation,

    df = sum_i sum_c d L_ic(P) / d p_ic.

The estimator perturbs the whole observation matrix at once: draw B with
i.i.d. zero-mean unit-variance entries, refit on P + eps * B, and contract

    df_hat = sum_ic b_ic * (L_ic(P + eps B) - L_ic(P)) / eps,

averaging over T independent draws of B. One extra fit per replicate is
the entire cost. Crucially the baseline and every perturbed fit share one
``model_seed``: identical inits, shuffles, and masks make the divided
difference pick up only the response to the perturbation (common random
numbers), which is why a single replicate is usually enough.

Fitted values enter the contraction raw (first k-1 predicted columns,
no clamping): clamping would zero the very derivatives being measured.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone

from .categorical import encode_observations, row_deviances
from .exceptions import EstimationError
from .rng import indexed_seed
from .validation import check_features, check_observation_matrix


@dataclass(frozen=True)
class CrnContext:
    """Seeds and knobs shared by every fit inside one df comparison.

    ``model_seed`` is handed to every fit (baseline and perturbed, and all
    models of a sweep being compared); ``perturbation_seed`` derives the
    per-replicate seeds of B. ``distribution`` selects the entries of B:
    ``"normal"`` (default) or ``"rademacher"`` (+-1, numerically gentler
    for estimators that sit on the boundary of the simplex).
    """

    model_seed: int = 0
    perturbation_seed: int = 1
    epsilon: float = 1e-5
    T: int = 1
    distribution: str = "normal"
    workers: int = 1

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.distribution not in ("normal", "rademacher"):
            raise ValueError(f"unknown perturbation distribution {self.distribution!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class DofEstimate:
    df: float
    per_replicate: np.ndarray
    stderr: float
    epsilon: float
    T: int
    model_seed: int
    perturbation_seeds: list
    model: object = field(default=None, repr=False)  # fitted baseline, reused by callers


def sample_perturbation(n, k, seed, distribution="normal"):
    """An (n, k-1) matrix of i.i.d. zero-mean unit-variance entries."""
    if n < 1 or k < 2:
        raise ValueError("need n >= 1 and k >= 2")
    gen = np.random.default_rng(np.random.SeedSequence(int(seed)))
    if distribution == "normal":
        return gen.standard_normal((n, k - 1))
    if distribution == "rademacher":
        return gen.integers(0, 2, size=(n, k - 1)).astype(np.float64) * 2.0 - 1.0
    raise ValueError(f"unknown perturbation distribution {distribution!r}")


def _seeded_clone(estimator, model_seed):
    est = clone(estimator)
    if "random_state" in est.get_params():
        est.set_params(random_state=model_seed)
    return est


def run_jobs(jobs, workers):
    """Evaluate thunks, preserving input order; results identical for any worker count."""
    if workers <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: job(), jobs))


def estimate_dof(estimator, X, P, ctx):
    """Run the perturbation estimator for one fitting procedure.

    Fits the baseline on (X, P) and, for t = 1..T, on (X, P + eps * B_t),
    every fit seeded with ``ctx.model_seed``. Returns the replicate values,
    their mean (the df estimate) and standard error (0 when T = 1).
    """
    X = check_features(X)
    P = check_observation_matrix(P)
    n, km1 = P.shape
    k = km1 + 1
    pert_seeds = [indexed_seed(ctx.perturbation_seed, t) for t in range(ctx.T)]
    perturbations = [sample_perturbation(n, k, s, ctx.distribution) for s in pert_seeds]

    def fit_job(P_fit, label):
        def run():
            est = _seeded_clone(estimator, ctx.model_seed)
            try:
                est.fit(X, P_fit)
            except Exception as exc:
                raise EstimationError(f"fit failed for {label}: {exc}") from exc
            return est, est.predict_proba(X)[:, :km1]
        return run

    jobs = [fit_job(P, "baseline")]
    jobs += [fit_job(P + ctx.epsilon * B, f"replicate {t}") for t, B in enumerate(perturbations)]
    results = run_jobs(jobs, ctx.workers)

    baseline_model, L0 = results[0]
    reps = np.empty(ctx.T)
    for t, (B, (_, Lt)) in enumerate(zip(perturbations, results[1:])):
        reps[t] = float((B * (Lt - L0)).sum() / ctx.epsilon)
        if not math.isfinite(reps[t]):
            raise EstimationError(
                f"non-finite replicate {t} for {type(estimator).__name__}")
    df = float(reps.mean())
    stderr = float(reps.std(ddof=1) / math.sqrt(ctx.T)) if ctx.T > 1 else 0.0
    return DofEstimate(df=df, per_replicate=reps, stderr=stderr, epsilon=ctx.epsilon,
                       T=ctx.T, model_seed=ctx.model_seed, perturbation_seeds=pert_seeds,
                       model=baseline_model)


def dofaic(train_total_deviance, df):
    """Selection score: training deviance plus twice the estimated df."""
    if not math.isfinite(df):
        raise ValueError("df must be finite")
    return float(train_total_deviance) + 2.0 * float(df)


def naive_aic(train_total_deviance, param_count):
    """AIC with the raw parameter count as the complexity correction."""
    if param_count < 0:
        raise ValueError("param_count must be nonnegative")
    return float(train_total_deviance) + 2.0 * int(param_count)


def measured_optimism(model, X_test, y_test, train_total_deviance, n_train):
    """Mean held-out deviance minus mean training deviance of a fitted model."""
    X_test = check_features(X_test)
    probs = model.predict_proba(X_test)
    k = probs.shape[1]
    P_test = encode_observations(y_test, k)
    mean_test = float(row_deviances(P_test, probs, clamp=True).mean())
    return mean_test - float(train_total_deviance) / int(n_train)
