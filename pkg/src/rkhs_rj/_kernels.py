"""Compiled likelihood loops; each avoids allocating the (batch, n) linear-predictor array."""
import math

import numpy as np
from numba import njit

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@njit(cache=True)
def _log1pexp(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(cache=True)
def gauss_ll(u, alpha0, log_sigma, y):
    k, n = u.shape
    out = np.empty(k)
    for w in range(k):
        a = alpha0[w]
        ss = 0.0
        for i in range(n):
            r = y[i] - a - u[w, i]
            ss += r * r
        out[w] = -n * _HALF_LOG_2PI - n * log_sigma[w] - 0.5 * ss * math.exp(-2.0 * log_sigma[w])
    return out


@njit(cache=True)
def bern_ll(u, alpha0, y):
    k, n = u.shape
    out = np.empty(k)
    for w in range(k):
        a = alpha0[w]
        s = 0.0
        for i in range(n):
            eta = a + u[w, i]
            s += y[i] * eta - _log1pexp(eta)
        out[w] = s
    return out


@njit(cache=True)
def gauss_ll_plus_column(u, alpha0, log_sigma, y, beta, cols, XT):
    """Log-likelihood of ``u[w] + beta[w, t] * X(cols[w, t])`` for every try ``t``."""
    k, n = u.shape
    n_try = beta.shape[1]
    out = np.empty((k, n_try))
    for w in range(k):
        a = alpha0[w]
        scale = math.exp(-2.0 * log_sigma[w])
        for t in range(n_try):
            b = beta[w, t]
            c = cols[w, t]
            ss = 0.0
            for i in range(n):
                r = y[i] - a - u[w, i] - b * XT[c, i]
                ss += r * r
            out[w, t] = -n * _HALF_LOG_2PI - n * log_sigma[w] - 0.5 * ss * scale
    return out


@njit(cache=True)
def bern_ll_plus_column(u, alpha0, y, beta, cols, XT):
    k, n = u.shape
    n_try = beta.shape[1]
    out = np.empty((k, n_try))
    for w in range(k):
        a = alpha0[w]
        for t in range(n_try):
            b = beta[w, t]
            c = cols[w, t]
            s = 0.0
            for i in range(n):
                eta = a + u[w, i] + b * XT[c, i]
                s += y[i] * eta - _log1pexp(eta)
            out[w, t] = s
    return out


@njit(cache=True)
def component_ll(beta, cols, p, alpha0, log_sigma, y, XT, linear):
    """Log-likelihood straight from the first ``p[w]`` components of each walker."""
    k = beta.shape[0]
    n = y.shape[0]
    out = np.empty(k)
    eta = np.empty(n)
    for w in range(k):
        for i in range(n):
            eta[i] = alpha0[w]
        for j in range(p[w]):
            b = beta[w, j]
            c = cols[w, j]
            for i in range(n):
                eta[i] += b * XT[c, i]
        s = 0.0
        if linear:
            for i in range(n):
                r = y[i] - eta[i]
                s += r * r
            out[w] = -n * _HALF_LOG_2PI - n * log_sigma[w] - 0.5 * s * math.exp(-2.0 * log_sigma[w])
        else:
            for i in range(n):
                s += y[i] * eta[i] - _log1pexp(eta[i])
            out[w] = s
    return out
