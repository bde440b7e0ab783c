"""Parameters, priors, likelihoods and log-posteriors of the RKHS models.

A parameter point holds ``p`` components ``(beta_j, t_j)``, the intercept
``alpha0`` and, for the linear model, ``log_sigma``.  The linear predictor
of a trajectory is ``alpha0 + sum_j beta_j * X(t_j)`` with ``X(t_j)`` read
from the grid column nearest to ``t_j``.

Scalar functions (``log_prior``, ``log_likelihood`` ...) work on one
:class:`ParamState`.  :class:`Target` evaluates the same densities for whole
batches of padded parameter arrays and is what the sampler uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .data import FunctionalDataset, Problem, nearest_index

ModelKind = Problem

# t_5(0, 2.5) log-density is -3 log(4 b^2 + 125) + this constant
_T5_CONST = 7.5 * math.log(5.0) + 4.0 * math.log(2.0) - math.log(3.0 * math.pi)
_CAUCHY_CONST = math.log(10.0 / math.pi)


@dataclass
class ParamState:
    beta: np.ndarray
    tau: np.ndarray
    alpha0: float = 0.0
    log_sigma: float | None = None

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        if self.beta.shape != self.tau.shape or self.beta.ndim != 1:
            raise ValueError("beta and tau must be 1-d and of equal length")
        self.alpha0 = float(self.alpha0)
        if self.log_sigma is not None:
            self.log_sigma = float(self.log_sigma)

    @property
    def p(self) -> int:
        return self.beta.size

    @property
    def sigma(self) -> float:
        return math.exp(self.log_sigma)

    def permuted(self, order) -> "ParamState":
        order = np.asarray(order)
        return ParamState(self.beta[order], self.tau[order], self.alpha0, self.log_sigma)


@dataclass(frozen=True)
class PriorConfig:
    p_prior: str = "poisson"  # "poisson" (truncated) or "uniform"
    rate: float = 3.0
    p_max: int = 10
    eta2: float = 25.0

    def __post_init__(self):
        if self.p_prior not in ("poisson", "uniform"):
            raise ValueError(f"unknown p prior {self.p_prior!r}")
        if not self.rate > 0 or self.p_max < 1 or not self.eta2 > 0:
            raise ValueError("need rate > 0, p_max >= 1 and eta2 > 0")

    def log_pmf_table(self) -> np.ndarray:
        """``log pi(p)`` indexed by ``p`` (entry 0 is -inf)."""
        ps = np.arange(1, self.p_max + 1)
        if self.p_prior == "uniform":
            logw = np.zeros(self.p_max)
        else:
            logw = ps * math.log(self.rate) - gammaln(ps + 1)
        logw = logw - np.logaddexp.reduce(logw)
        return np.concatenate([[-np.inf], logw])

    def pmf(self) -> np.ndarray:
        return np.exp(self.log_pmf_table()[1:])


def log_p_prior(p: int, cfg: PriorConfig) -> float:
    if not 1 <= p <= cfg.p_max:
        return -np.inf
    return float(cfg.log_pmf_table()[p])


def beta_log_prior(beta, cfg: PriorConfig, kind: ModelKind) -> np.ndarray:
    """Per-coefficient prior log-density (normal for linear, t_5(0, 2.5) for logistic)."""
    beta = np.asarray(beta, dtype=float)
    if ModelKind(kind) is ModelKind.LINEAR:
        return -0.5 * math.log(2.0 * math.pi * cfg.eta2) - beta**2 / (2.0 * cfg.eta2)
    return _T5_CONST - 3.0 * np.log(4.0 * beta**2 + 125.0)


def alpha0_log_prior(alpha0, kind: ModelKind):
    """Logistic: Cauchy(0, 10).  Linear: flat (the Jeffreys factor lives in the sigma term)."""
    alpha0 = np.asarray(alpha0, dtype=float)
    if ModelKind(kind) is ModelKind.LINEAR:
        return np.zeros_like(alpha0)
    return _CAUCHY_CONST - np.log(100.0 + alpha0**2)


def _check_kind(theta: ParamState, kind: ModelKind):
    if kind is ModelKind.LINEAR and theta.log_sigma is None:
        raise ValueError("linear model needs log_sigma")
    if kind is ModelKind.LOGISTIC and theta.log_sigma is not None:
        raise ValueError("logistic model has no scale parameter")


def linear_predictor(theta: ParamState, dataset: FunctionalDataset, row=None):
    """``alpha0 + sum_j beta_j X(t_j)`` for one row, or for all rows when ``row`` is None."""
    cols = nearest_index(theta.tau, dataset.grid)
    X = dataset.X if row is None else dataset.X[row]
    return theta.alpha0 + X[..., cols] @ theta.beta


def log_prior(theta: ParamState, cfg: PriorConfig, kind: ModelKind) -> float:
    """Log prior density of ``theta`` w.r.t. Lebesgue measure in ``(beta, tau, alpha0, sigma^2)``.

    For the linear model the improper Jeffreys prior ``1/sigma^2`` contributes
    ``-2 log sigma``.  Out-of-support points give ``-inf``.
    """
    kind = ModelKind(kind)
    _check_kind(theta, kind)
    if not 1 <= theta.p <= cfg.p_max or np.any((theta.tau < 0) | (theta.tau > 1)):
        return -np.inf
    lp = log_p_prior(theta.p, cfg) + float(np.sum(beta_log_prior(theta.beta, cfg, kind)))
    lp += float(alpha0_log_prior(theta.alpha0, kind))
    if kind is ModelKind.LINEAR:
        lp -= 2.0 * theta.log_sigma
    return lp


def gaussian_loglik(residuals, log_sigma):
    """Sum over the last axis of Normal(0, sigma^2) log-densities."""
    residuals = np.asarray(residuals, dtype=float)
    n = residuals.shape[-1]
    ss = np.einsum("...n,...n->...", residuals, residuals)
    return -0.5 * n * math.log(2.0 * math.pi) - n * log_sigma - 0.5 * ss * np.exp(-2.0 * log_sigma)


def bernoulli_loglik(y, eta):
    """Sum over the last axis of ``y*eta - log(1 + exp(eta))`` (stable)."""
    return np.sum(y * eta - np.logaddexp(0.0, eta), axis=-1)


def log_likelihood(theta: ParamState, dataset: FunctionalDataset, kind: ModelKind) -> float:
    kind = ModelKind(kind)
    _check_kind(theta, kind)
    if dataset.problem is not kind:
        raise ValueError(f"{kind.value} model on a {dataset.problem.value} dataset")
    if dataset.n == 0:
        return 0.0
    eta = linear_predictor(theta, dataset)
    if kind is ModelKind.LINEAR:
        return float(gaussian_loglik(dataset.y - eta, theta.log_sigma))
    return float(bernoulli_loglik(dataset.y, eta))


def log_posterior(theta: ParamState, dataset: FunctionalDataset, cfg: PriorConfig, kind: ModelKind) -> float:
    """Unnormalised log-posterior; for the linear model the sigma exponent totals -(n + 2)."""
    return tempered_log_posterior(theta, dataset, cfg, kind, 1.0)


def tempered_log_posterior(theta, dataset, cfg, kind, T: float) -> float:
    if T < 1.0:
        raise ValueError("temperature must be >= 1")
    lp = log_prior(theta, cfg, kind)
    if lp == -np.inf:
        return lp
    if math.isinf(T):
        return lp
    return lp + log_likelihood(theta, dataset, kind) / T


@dataclass
class Target:
    """Batched posterior pieces for padded parameter arrays.

    Arrays of components have shape ``(..., P)``; slots at or beyond ``p``
    must hold ``beta = 0`` so they drop out of the linear predictor.  The
    prior returned by :meth:`log_prior` is expressed in the sampler's working
    coordinates: for the linear model that is ``log sigma`` instead of
    ``sigma^2``, which adds the Jacobian ``2 log sigma`` and leaves a flat
    prior on ``log sigma``.

    ``flat=True`` replaces the likelihood by a constant (prior sampling).
    """

    dataset: FunctionalDataset
    prior: PriorConfig = field(default_factory=PriorConfig)
    kind: ModelKind = ModelKind.LINEAR
    flat: bool = False

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        if self.dataset.problem is not self.kind:
            raise ValueError(f"{self.kind.value} model on a {self.dataset.problem.value} dataset")
        self._XT = np.ascontiguousarray(self.dataset.X.T)
        self._y = np.ascontiguousarray(self.dataset.y, dtype=float)
        self._logpmf = self.prior.log_pmf_table()

    @property
    def linear(self) -> bool:
        return self.kind is ModelKind.LINEAR

    @property
    def p_max(self) -> int:
        return self.prior.p_max

    def columns(self, tau) -> np.ndarray:
        return nearest_index(tau, self.dataset.grid)

    def component_term(self, beta, tau) -> np.ndarray:
        """``sum_j beta_j X_i(t_j)`` for every batch entry and row: shape ``(..., n)``."""
        beta = np.asarray(beta, dtype=float)
        cols = self.columns(tau)
        lead = beta.shape[:-1]
        rows = int(np.prod(lead))
        m = self._XT.shape[0]
        # scatter coefficients into a dense (rows, m) matrix, then one BLAS product
        flat = (np.arange(rows)[:, None] * m + cols.reshape(rows, -1)).ravel()
        dense = np.bincount(flat, weights=beta.ravel(), minlength=rows * m).reshape(rows, m)
        return (dense @ self._XT).reshape(*lead, self._XT.shape[1])

    def column_term(self, beta, tau) -> np.ndarray:
        """Contribution of a single component per batch entry: shape ``(..., n)``."""
        return np.asarray(beta, dtype=float)[..., None] * self._XT[self.columns(tau)]

    def loglik(self, u, alpha0, log_sigma=None) -> np.ndarray:
        """Untempered log-likelihood for cached component terms ``u`` of shape ``(..., n)``."""
        u = np.asarray(u, dtype=float)
        lead = u.shape[:-1]
        if self.flat or self.dataset.n == 0:
            return np.zeros(lead)
        u2 = np.ascontiguousarray(u.reshape(-1, u.shape[-1]))
        a = np.ascontiguousarray(np.broadcast_to(np.asarray(alpha0, dtype=float), lead)).ravel()
        if self.linear:
            ls = np.ascontiguousarray(np.broadcast_to(np.asarray(log_sigma, dtype=float), lead)).ravel()
            return _kernels.gauss_ll(u2, a, ls, self._y).reshape(lead)
        return _kernels.bern_ll(u2, a, self._y).reshape(lead)

    def loglik_components(self, p, beta, tau, alpha0, log_sigma=None) -> np.ndarray:
        """Log-likelihood computed directly from ``(k, P)`` component arrays, without caching ``u``."""
        beta = np.ascontiguousarray(beta, dtype=float)
        k = beta.shape[0]
        if self.flat or self.dataset.n == 0:
            return np.zeros(k)
        cols = np.ascontiguousarray(self.columns(tau), dtype=np.int64)
        p = np.ascontiguousarray(p, dtype=np.int64)
        a = np.ascontiguousarray(alpha0, dtype=float).ravel()
        ls = np.zeros(k) if log_sigma is None else np.ascontiguousarray(log_sigma, dtype=float).ravel()
        return _kernels.component_ll(beta, cols, p, a, ls, self._y, self._XT, self.linear)

    def loglik_plus_column(self, u, beta, tau, alpha0, log_sigma=None) -> np.ndarray:
        """Log-likelihood after adding one candidate component per try.

        ``u`` is ``(k, n)``, ``beta``/``tau`` are ``(k, n_try)``; returns ``(k, n_try)``.
        """
        beta = np.ascontiguousarray(beta, dtype=float)
        if self.flat or self.dataset.n == 0:
            return np.zeros(beta.shape)
        cols = np.ascontiguousarray(self.columns(tau), dtype=np.int64)
        u = np.ascontiguousarray(u, dtype=float)
        a = np.ascontiguousarray(alpha0, dtype=float).ravel()
        if self.linear:
            ls = np.ascontiguousarray(log_sigma, dtype=float).ravel()
            return _kernels.gauss_ll_plus_column(u, a, ls, self._y, beta, cols, self._XT)
        return _kernels.bern_ll_plus_column(u, a, self._y, beta, cols, self._XT)

    def log_p(self, p) -> np.ndarray:
        p = np.asarray(p)
        return self._logpmf[np.clip(p, 0, self.p_max)] + np.where((p < 1) | (p > self.p_max), -np.inf, 0.0)

    def component_log_prior(self, beta) -> np.ndarray:
        return beta_log_prior(beta, self.prior, self.kind)

    def log_prior(self, p, beta, tau, alpha0, log_sigma=None) -> np.ndarray:
        p = np.asarray(p)
        beta = np.asarray(beta, dtype=float)
        tau = np.asarray(tau, dtype=float)
        active = np.arange(beta.shape[-1]) < p[..., None]
        comp = np.where(active, self.component_log_prior(beta), 0.0).sum(axis=-1)
        outside = (active & ((tau < 0.0) | (tau > 1.0))).any(axis=-1)
        lp = self.log_p(p) + comp + alpha0_log_prior(alpha0, self.kind)
        # linear: -2 log sigma (Jeffreys) + 2 log sigma (Jacobian) = 0
        return np.where(outside, -np.inf, lp)

    def sample_components(self, rng: np.random.Generator, size) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``(beta, tau)`` pairs from the component prior."""
        if self.linear:
            beta = math.sqrt(self.prior.eta2) * rng.standard_normal(size)
        else:
            beta = 2.5 * rng.standard_t(5, size)
        return beta, rng.random(size)
