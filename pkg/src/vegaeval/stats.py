"""Batch-metric statistics: bootstrap intervals, Pearson correlation, and
ridge learning of judge dimension weights.

The bootstrap is a seeded percentile bootstrap of the mean (2000 resamples by
default).  Ridge fitting is the closed-form solution on centered data with an
unpenalized intercept; learned coefficients are clipped at zero and
renormalized to sum to one so they can serve directly as judge weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from .errors import DegenerateInput, EmptySample, SingularSystem
from .judge import VISION_DIMENSIONS, VisionWeights


@dataclass(frozen=True)
class Interval:
    low: float
    high: float
    level: float = 0.95


def bootstrap_ci(samples, level: float = 0.95, resamples: int = 2000,
                 seed: int = 0) -> Interval:
    """Seeded percentile bootstrap of the mean."""
    values = np.asarray(list(samples), dtype=float)
    if values.size == 0:
        raise EmptySample("bootstrap_ci needs at least one sample")
    if values.size == 1:
        return Interval(float(values[0]), float(values[0]), level)
    rng = np.random.default_rng(seed)
    indices = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[indices].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    low, high = np.percentile(means, [100 * alpha, 100 * (1 - alpha)])
    return Interval(float(low), float(high), level)


@dataclass(frozen=True)
class PearsonResult:
    r: float
    ci: Interval
    n: int


def pearson(x, y, level: float = 0.95) -> PearsonResult:
    """Product-moment correlation with a Fisher-z confidence interval."""
    xs = np.asarray(list(x), dtype=float)
    ys = np.asarray(list(y), dtype=float)
    if xs.size != ys.size:
        raise DegenerateInput(f"length mismatch: {xs.size} vs {ys.size}")
    if xs.size < 3:
        raise DegenerateInput("pearson needs at least 3 paired samples")
    if np.std(xs) == 0 or np.std(ys) == 0:
        raise DegenerateInput("pearson is undefined for zero-variance input")
    r = float(np.corrcoef(xs, ys)[0, 1])
    r = max(min(r, 1.0), -1.0)
    if xs.size > 3 and abs(r) < 1.0:
        z = math.atanh(r)
        se = 1.0 / math.sqrt(xs.size - 3)
        quantile = float(_scipy_stats.norm.ppf((1 + level) / 2))
        ci = Interval(math.tanh(z - quantile * se), math.tanh(z + quantile * se), level)
    else:
        ci = Interval(r, r, level)
    return PearsonResult(r, ci, int(xs.size))


# ---------------------------------------------------------------------------
# Ridge weight learning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RidgeFit:
    weights: VisionWeights
    coefficients: tuple[float, ...]  # raw, pre-clipping
    intercept: float
    lam: float
    cv_pearson_learned: float
    cv_pearson_uniform: float
    cv_folds: int
    cv_repetitions: int


def _ridge_solve(features: np.ndarray, target: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    x_mean = features.mean(axis=0)
    y_mean = target.mean()
    xc = features - x_mean
    yc = target - y_mean
    gram = xc.T @ xc + lam * np.eye(features.shape[1])
    if lam == 0 and np.linalg.matrix_rank(xc) < features.shape[1]:
        raise SingularSystem("unregularized system is singular (collinear dimensions)")
    try:
        beta = np.linalg.solve(gram, xc.T @ yc)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    intercept = float(y_mean - x_mean @ beta)
    return beta, intercept


def _clip_normalize(beta: np.ndarray) -> np.ndarray:
    clipped = np.clip(beta, 0.0, None)
    total = clipped.sum()
    # No appreciable mass left (e.g. lambda -> inf shrank everything): uniform.
    if total <= 1e-9:
        return np.full(beta.shape, 1.0 / beta.size)
    return clipped / total


def _cv_pearson(features: np.ndarray, target: np.ndarray, lam: float,
                folds: int, repetitions: int, seed: int,
                fixed_weights: np.ndarray | None = None) -> float:
    """Mean Pearson r of held-out weighted sums over repeated k-fold splits."""
    n = features.shape[0]
    rng = np.random.default_rng(seed)
    scores: list[float] = []
    for _ in range(repetitions):
        order = rng.permutation(n)
        predictions = np.empty(n)
        for fold in range(folds):
            test_idx = order[fold::folds]
            train_idx = np.setdiff1d(order, test_idx)
            if fixed_weights is None:
                beta, _ = _ridge_solve(features[train_idx], target[train_idx], lam)
                w = _clip_normalize(beta)
            else:
                w = fixed_weights
            predictions[test_idx] = features[test_idx] @ w
        if np.std(predictions) == 0 or np.std(target) == 0:
            scores.append(0.0)
        else:
            scores.append(float(np.corrcoef(predictions, target)[0, 1]))
    return float(np.mean(scores))


def learn_weights_ridge(dimension_scores, human_scores, lam: float = 1.0,
                        cv_folds: int = 5, cv_repetitions: int = 10,
                        seed: int = 0) -> RidgeFit:
    """Learn judge dimension weights from human ratings.

    ``dimension_scores`` is an (n x 5) matrix of per-dimension judge scores
    normalized to [0, 1], columns ordered as VISION_DIMENSIONS;
    ``human_scores`` the matching human ratings.  The fit report carries
    repeated-k-fold cross-validated Pearson r for both the learned weights
    and the uniform-weight baseline.
    """
    features = np.asarray(dimension_scores, dtype=float)
    target = np.asarray(list(human_scores), dtype=float)
    d = len(VISION_DIMENSIONS)
    if features.ndim != 2 or features.shape[1] != d:
        raise DegenerateInput(f"dimension_scores must be n x {d}, got {features.shape}")
    if features.shape[0] != target.size:
        raise DegenerateInput("dimension_scores and human_scores disagree on n")
    if features.shape[0] < 10:
        raise DegenerateInput("need at least 10 rated examples to fit weights")
    if lam < 0:
        raise DegenerateInput("lambda must be nonnegative")

    beta, intercept = _ridge_solve(features, target, lam)
    normalized = _clip_normalize(beta)
    weights = VisionWeights(tuple(zip(VISION_DIMENSIONS, (float(w) for w in normalized))))

    uniform = np.full(d, 1.0 / d)
    cv_learned = _cv_pearson(features, target, lam, cv_folds, cv_repetitions, seed)
    cv_uniform = _cv_pearson(features, target, lam, cv_folds, cv_repetitions, seed,
                             fixed_weights=uniform)
    return RidgeFit(weights=weights,
                    coefficients=tuple(float(b) for b in beta),
                    intercept=intercept, lam=lam,
                    cv_pearson_learned=cv_learned,
                    cv_pearson_uniform=cv_uniform,
                    cv_folds=cv_folds, cv_repetitions=cv_repetitions)
