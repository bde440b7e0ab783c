"""Summary statistics, the four prediction strategies and the second-stage regressors.

One-stage strategies (``w_pp``, ``map_pp``) summarise per-sample predictive
responses.  Two-stage strategies (``w_vs``, ``map_vs``) summarise the impact
points, snap them to the grid and fit a ridge or L2-logistic regression on
those marginals.  The ``w_*`` variants combine dimensions with the posterior
frequencies of ``p``; the ``map_*`` variants use the most frequent ``p`` only.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import FunctionalDataset
from .model import ModelKind
from .postprocess import RelabeledChains, linear_predictors, map_dimension, p_posterior

logger = logging.getLogger(__name__)

SUMMARIES = ("tmean", "median", "mode")
METHODS = ("w_pp", "map_pp", "w_vs", "map_vs")
LAMBDA_GRID = np.logspace(-4, 4, 20)
N_FOLDS = 10
_CHUNK = 8192


class FitError(ValueError):
    pass


# -- summary statistics ----------------------------------------------------

def trimmed_mean(xs, frac: float = 0.1, axis=0):
    """Drop ``floor(frac * n)`` values from each tail and average the rest."""
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0 or xs.shape[axis] == 0:
        raise ValueError("trimmed mean of an empty sample")
    if not 0.0 <= frac < 0.5:
        raise ValueError("trimming fraction must lie in [0, 0.5)")
    return stats.trim_mean(xs, frac, axis=axis)


def half_sample_mode(xs, axis=0):
    """Half-sample mode, computed independently for every slice along ``axis``.

    Repeatedly keeps the narrowest window holding ``ceil(n/2)`` sorted points;
    three points resolve to the mean of the closer pair (the middle one on a
    tie), two points to their mean.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0 or xs.shape[axis] == 0:
        raise ValueError("mode of an empty sample")
    x = np.moveaxis(np.sort(xs, axis=axis), axis, 0)
    shape = x.shape[1:]
    x = x.reshape(x.shape[0], -1)
    k = x.shape[1]
    cols = np.arange(k)
    lo = np.zeros(k, dtype=np.int64)
    n = x.shape[0]
    while n > 3:
        h = (n + 1) // 2
        starts = lo[None, :] + np.arange(n - h + 1)[:, None]
        widths = x[starts + h - 1, cols] - x[starts, cols]
        lo = lo + np.argmin(widths, axis=0)
        n = h
    if n == 1:
        out = x[lo, cols]
    elif n == 2:
        out = 0.5 * (x[lo, cols] + x[lo + 1, cols])
    else:
        a, b, c = x[lo, cols], x[lo + 1, cols], x[lo + 2, cols]
        left, right = b - a, c - b
        out = np.where(left < right, 0.5 * (a + b), np.where(left > right, 0.5 * (b + c), b))
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def summarize(xs, summary: str, axis=0):
    if summary == "tmean":
        return trimmed_mean(xs, 0.1, axis=axis)
    if summary == "median":
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            raise ValueError("median of an empty sample")
        return np.median(xs, axis=axis)
    if summary == "mode":
        return half_sample_mode(xs, axis=axis)
    if summary == "mean":
        return np.mean(np.asarray(xs, dtype=float), axis=axis)
    raise ValueError(f"unknown summary {summary!r}")


def metric(y_true, y_pred, kind) -> float:
    """RMSE for the linear model, accuracy for the logistic one."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.size == 0 or y_true.shape != y_pred.shape:
        raise ValueError("metric needs two non-empty vectors of equal length")
    if ModelKind(kind) is ModelKind.LINEAR:
        return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))
    return float(np.mean(y_true == y_pred))


def classify(prob) -> np.ndarray:
    return (np.asarray(prob) > 0.5).astype(float)


# -- grid snapping ---------------------------------------------------------

def snap_to_grid(taus, grid) -> np.ndarray:
    """Nearest grid index for each tau, moving later duplicates to the nearest free index.

    Distance ties (both when snapping and when searching outward) go to the lower index.
    """
    grid = np.asarray(grid, dtype=float)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.size > grid.size:
        raise ValueError(f"cannot place {taus.size} distinct points on a grid of {grid.size}")
    used = np.zeros(grid.size, dtype=bool)
    out = np.empty(taus.size, dtype=np.int64)
    for i, t in enumerate(taus):
        free = np.nonzero(~used)[0]
        dist = np.abs(grid[free] - t)
        j = int(free[np.argmin(dist)])  # argmin returns the first, i.e. lowest, index on ties
        used[j] = True
        out[i] = j
    return out


# -- second-stage regressors -----------------------------------------------

@dataclass
class SecondStageModel:
    """Linear score ``intercept + features @ coef`` on the original feature scale."""

    coefficients: np.ndarray  # intercept first
    lam: float
    feature_indices: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    logistic: bool = False

    def decision(self, features) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        return self.coefficients[0] + features @ self.coefficients[1:]

    def predict(self, features) -> np.ndarray:
        """Fitted responses (linear) or class-1 probabilities (logistic)."""
        score = self.decision(features)
        return 1.0 / (1.0 + np.exp(-score)) if self.logistic else score


def _standardize(F):
    mean = F.mean(axis=0)
    scale = F.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return (F - mean) / scale, mean, scale


def _unstandardize(b0, w, mean, scale):
    slopes = w / scale
    return np.concatenate([[b0 - mean @ slopes], slopes])


def ridge_solve(Z, y, lam: float):
    """Minimise ``||y - b0 - Z w||^2 + lam ||w||^2`` via the SVD of the centred design."""
    zm = Z.mean(axis=0)
    ym = y.mean()
    U, s, Vt = np.linalg.svd(Z - zm, full_matrices=False)
    w = Vt.T @ ((s / (s**2 + lam)) * (U.T @ (y - ym)))
    return ym - zm @ w, w


def _folds(n: int, k: int):
    return np.array_split(np.arange(n), min(k, n))


def fit_ridge(features, y, lam: float) -> SecondStageModel:
    F = np.asarray(features, dtype=float)
    Z, mean, scale = _standardize(F)
    b0, w = ridge_solve(Z, np.asarray(y, dtype=float), lam)
    return SecondStageModel(_unstandardize(b0, w, mean, scale), lam, np.array([], dtype=np.int64), mean, scale)


def fit_ridge_cv(features, y, n_folds: int = N_FOLDS, lambdas=LAMBDA_GRID) -> SecondStageModel:
    """Ridge with the penalty chosen by contiguous k-fold CV squared error."""
    F = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(y, dtype=float)
    if F.shape[0] < 2:
        raise FitError("ridge needs at least two observations")
    errors = np.zeros(len(lambdas))
    for test in _folds(len(y), n_folds):
        train = np.setdiff1d(np.arange(len(y)), test)
        Z, mean, scale = _standardize(F[train])
        Zt = (F[test] - mean) / scale
        for i, lam in enumerate(lambdas):
            b0, w = ridge_solve(Z, y[train], lam)
            errors[i] += np.sum((y[test] - b0 - Zt @ w) ** 2)
    return fit_ridge(F, y, float(lambdas[int(np.argmin(errors))]))


def logistic_newton(Z, y, lam: float, tol: float = 1e-8, max_iter: int = 100):
    """Minimise ``sum logloss + lam/2 ||w||^2`` (intercept unpenalised) by damped Newton steps."""
    n, k = Z.shape
    A = np.column_stack([np.ones(n), Z])
    pen = np.full(k + 1, lam)
    pen[0] = 0.0

    def objective(c):
        eta = A @ c
        return float(np.sum(np.logaddexp(0.0, eta) - y * eta) + 0.5 * np.sum(pen * c**2))

    coef = np.zeros(k + 1)
    f = objective(coef)
    for _ in range(max_iter):
        mu = 1.0 / (1.0 + np.exp(-(A @ coef)))
        grad = A.T @ (mu - y) + pen * coef
        if np.linalg.norm(grad) < tol:
            break
        H = (A * (mu * (1.0 - mu))[:, None]).T @ A + np.diag(pen)
        step = np.linalg.solve(H + 1e-12 * np.eye(k + 1), grad)
        t = 1.0
        while t > 1e-10:
            cand = coef - t * step
            f_new = objective(cand)
            if f_new <= f:
                break
            t *= 0.5
        coef, f = cand, f_new
    return coef[0], coef[1:]


def logistic_gradient(Z, y, lam, b0, w) -> np.ndarray:
    A = np.column_stack([np.ones(len(y)), Z])
    c = np.concatenate([[b0], w])
    mu = 1.0 / (1.0 + np.exp(-(A @ c)))
    pen = np.full(c.size, lam)
    pen[0] = 0.0
    return A.T @ (mu - y) + pen * c


def fit_logistic_l2(features, y, lam: float) -> SecondStageModel:
    F = np.asarray(features, dtype=float)
    Z, mean, scale = _standardize(F)
    b0, w = logistic_newton(Z, np.asarray(y, dtype=float), lam)
    return SecondStageModel(_unstandardize(b0, w, mean, scale), lam, np.array([], dtype=np.int64),
                            mean, scale, logistic=True)


def fit_logistic_l2_cv(features, y, n_folds: int = N_FOLDS, lambdas=LAMBDA_GRID) -> SecondStageModel:
    """L2-logistic regression with the penalty chosen by k-fold CV accuracy (ties: smallest lambda)."""
    F = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(y, dtype=float)
    if np.unique(y).size < 2:
        raise FitError("logistic fit needs both classes")
    correct = np.zeros(len(lambdas))
    total = 0
    for test in _folds(len(y), n_folds):
        train = np.setdiff1d(np.arange(len(y)), test)
        if np.unique(y[train]).size < 2:
            warnings.warn("skipping a CV fold whose training part has a single class")
            continue
        Z, mean, scale = _standardize(F[train])
        Zt = (F[test] - mean) / scale
        for i, lam in enumerate(lambdas):
            b0, w = logistic_newton(Z, y[train], lam)
            correct[i] += np.sum(((b0 + Zt @ w) > 0).astype(float) == y[test])
        total += test.size
    if total == 0:
        raise FitError("every CV fold had a single-class training part")
    return fit_logistic_l2(F, y, float(lambdas[int(np.argmax(correct))]))


# -- prediction strategies ---------------------------------------------------

def _as_store(chains):
    return chains.samples if isinstance(chains, RelabeledChains) else chains


def _weights(store, map_only: bool) -> dict[int, float]:
    if len(store) == 0:
        raise ValueError("no posterior samples")
    post = p_posterior(store)
    if map_only:
        return {map_dimension(post): 1.0}
    return post


def _pp_block(store, rows, test: FunctionalDataset, kind, summary, rng, predictive_mean):
    out = np.empty((rows.size, test.n))
    for start in range(0, rows.size, _CHUNK):
        r = rows[start:start + _CHUNK]
        eta = linear_predictors(store, test.grid, test.X, r)
        if kind is ModelKind.LOGISTIC:
            out[start:start + r.size] = 1.0 / (1.0 + np.exp(-eta))
        elif predictive_mean:
            out[start:start + r.size] = eta
        else:
            sigma = np.exp(store.log_sigma[r])[:, None]
            out[start:start + r.size] = eta + sigma * rng.standard_normal(eta.shape)
    return summarize(out, summary, axis=0)


def predict_pp(chains, test: FunctionalDataset, kind, summary: str, rng: np.random.Generator | None = None,
               map_only: bool = False, predictive_mean: bool = False) -> np.ndarray:
    """One-stage prediction; logistic results are class-1 probabilities (threshold with :func:`classify`)."""
    kind = ModelKind(kind)
    store = _as_store(chains)
    if kind is ModelKind.LINEAR and not predictive_mean and rng is None:
        raise ValueError("linear predictive draws need an rng")
    pred = np.zeros(test.n)
    for p, weight in sorted(_weights(store, map_only).items()):
        rows = np.nonzero(store.p == p)[0]
        pred += weight * _pp_block(store, rows, test, kind, summary, rng, predictive_mean)
    return pred


def predict_w_pp(chains, test, kind, summary, rng=None, predictive_mean=False):
    return predict_pp(chains, test, kind, summary, rng, False, predictive_mean)


def predict_map_pp(chains, test, kind, summary, rng=None, predictive_mean=False):
    return predict_pp(chains, test, kind, summary, rng, True, predictive_mean)


def impact_point_summary(chains, p: int, summary: str) -> np.ndarray:
    """Component-wise summary of ``tau`` over the samples of dimension ``p``."""
    store = _as_store(chains)
    block = store.tau[store.p == p, :p]
    if block.shape[0] == 0:
        raise ValueError(f"no samples with p = {p}")
    return np.atleast_1d(summarize(block, summary, axis=0))


def predict_vs(chains, train: FunctionalDataset, test: FunctionalDataset, kind, summary: str,
               map_only: bool = False) -> np.ndarray:
    """Two-stage prediction; logistic results are class-1 probabilities."""
    kind = ModelKind(kind)
    store = _as_store(chains)
    pred = np.zeros(test.n)
    for p, weight in sorted(_weights(store, map_only).items()):
        idx = snap_to_grid(impact_point_summary(store, p, summary), train.grid)
        idx = np.sort(idx)
        fit = fit_ridge_cv if kind is ModelKind.LINEAR else fit_logistic_l2_cv
        model = fit(train.X[:, idx], train.y)
        model.feature_indices = idx
        pred += weight * model.predict(test.X[:, idx])
    return pred


def predict_w_vs(chains, train, test, kind, summary):
    return predict_vs(chains, train, test, kind, summary, False)


def predict_map_vs(chains, train, test, kind, summary):
    return predict_vs(chains, train, test, kind, summary, True)


def predict(method: str, chains, train, test, kind, summary, rng=None, predictive_mean=False) -> np.ndarray:
    """Dispatch by method name; logistic outputs are thresholded labels."""
    kind = ModelKind(kind)
    if method == "w_pp":
        out = predict_w_pp(chains, test, kind, summary, rng, predictive_mean)
    elif method == "map_pp":
        out = predict_map_pp(chains, test, kind, summary, rng, predictive_mean)
    elif method == "w_vs":
        out = predict_w_vs(chains, train, test, kind, summary)
    elif method == "map_vs":
        out = predict_map_vs(chains, train, test, kind, summary)
    else:
        raise ValueError(f"unknown method {method!r}")
    return classify(out) if kind is ModelKind.LOGISTIC else out
