"""Relabelling, convergence diagnostics and posterior summaries of a ChainStore."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import nearest_index
from .model import ModelKind
from .sampler import ChainStore


class Ordering(str, enum.Enum):
    BY_BETA = "beta"
    BY_TAU = "tau"


@dataclass
class RelabeledChains:
    samples: ChainStore
    ordering_variable: Ordering
    separation_score: dict = field(default_factory=dict)


def separation_score(values, p) -> float:
    """Mean over samples with ``p >= 2`` of the smallest standardised gap between components.

    ``values`` is the NaN-padded ``(M, p_max)`` array of one component variable.
    Returns 0 when no sample has two components.
    """
    values = np.asarray(values, dtype=float)
    p = np.asarray(p)
    multi = p >= 2
    if not multi.any():
        return 0.0
    pooled = values[~np.isnan(values)]
    sd = float(np.std(pooled))
    if sd == 0.0:
        return 0.0
    srt = np.sort(values[multi] / sd, axis=1)  # NaN sorts last
    gaps = np.diff(srt, axis=1)
    return float(np.mean(np.nanmin(gaps, axis=1)))


def relabel(chains: ChainStore) -> RelabeledChains:
    """Order every sample's components by the variable that separates them best.

    Ties go to ``tau``; with only one-component samples nothing changes.
    """
    if len(chains) == 0:
        raise ValueError("relabel needs at least one sample")
    scores = {Ordering.BY_BETA: separation_score(chains.beta, chains.p),
              Ordering.BY_TAU: separation_score(chains.tau, chains.p)}
    if not (chains.p >= 2).any():
        return RelabeledChains(chains, Ordering.BY_TAU, scores)
    choice = Ordering.BY_BETA if scores[Ordering.BY_BETA] > scores[Ordering.BY_TAU] else Ordering.BY_TAU
    key = chains.beta if choice is Ordering.BY_BETA else chains.tau
    order = np.argsort(np.where(np.isnan(key), np.inf, key), axis=1, kind="stable")
    beta = np.take_along_axis(chains.beta, order, axis=1)
    tau = np.take_along_axis(chains.tau, order, axis=1)
    return RelabeledChains(chains.with_components(beta, tau), choice, scores)


def gelman_rubin(chains) -> tuple[float, bool]:
    """Potential scale reduction for an ``(m chains, n draws)`` array.

    Returns ``(rhat, degenerate)``; zero within-chain variance gives ``(1.0, True)``.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("need at least 2 chains of at least 2 draws")
    n = x.shape[1]
    W = float(np.mean(np.var(x, axis=1, ddof=1)))
    B = n * float(np.var(np.mean(x, axis=1), ddof=1))
    if W == 0.0:
        return 1.0, True
    return float(np.sqrt(((n - 1) / n * W + B / n) / W)), False


def p_posterior(chains: ChainStore) -> dict[int, float]:
    """Relative frequency of each dimension among the cold-chain samples."""
    if len(chains) == 0:
        return {}
    ps, counts = np.unique(chains.p, return_counts=True)
    return {int(k): float(c) / len(chains) for k, c in zip(ps, counts)}


def map_dimension(post: dict[int, float]) -> int:
    """Most frequent p; ties go to the smaller p."""
    best = max(post.values())
    return min(k for k, v in post.items() if v == best)


def coefficient_matrix(beta, tau, grid) -> np.ndarray:
    """Dense ``(M, m)`` matrix with each sample's coefficients placed on its grid columns."""
    beta = np.asarray(beta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    live = ~np.isnan(beta)
    M, m = beta.shape[0], len(grid)
    cols = nearest_index(np.where(live, tau, 0.0), grid)
    flat = (np.arange(M)[:, None] * m + cols)[live]
    return np.bincount(flat, weights=beta[live], minlength=M * m).reshape(M, m)


def linear_predictors(chains: ChainStore, grid, X, rows=None) -> np.ndarray:
    """``alpha0 + sum_j beta_j X(t_j)`` for the selected samples: shape ``(n_samples, n_rows_of_X)``."""
    rows = np.arange(len(chains)) if rows is None else np.asarray(rows)
    coef = coefficient_matrix(chains.beta[rows], chains.tau[rows], grid)
    return chains.alpha0[rows, None] + coef @ np.asarray(X, dtype=float).T


def posterior_predictive(chains: ChainStore, grid, X, kind, rng: np.random.Generator | None = None,
                         thin: int = 1, mean_only: bool = False) -> np.ndarray:
    """Per-sample responses for every row of ``X``.

    Linear: one Normal(eta, sigma^2) draw per sample (or ``eta`` itself when
    ``mean_only``).  Logistic: class-1 probabilities.
    """
    kind = ModelKind(kind)
    rows = np.arange(0, len(chains), thin)
    eta = linear_predictors(chains, grid, X, rows)
    if kind is ModelKind.LOGISTIC:
        return 1.0 / (1.0 + np.exp(-eta))
    if mean_only:
        return eta
    if rng is None:
        raise ValueError("linear predictive draws need an rng")
    sigma = np.exp(chains.log_sigma[rows])[:, None]
    return eta + sigma * rng.standard_normal(eta.shape)


@dataclass
class DiagnosticsReport:
    gelman_rubin: dict
    acceptance: dict
    in_model_acceptance: float
    p_posterior: dict
    tempered_p_posterior: np.ndarray
    degenerate: dict = field(default_factory=dict)

    def rows(self):
        """Flat ``(name, value)`` pairs for CSV output."""
        out = [(f"rhat_{k}", v) for k, v in self.gelman_rubin.items()]
        out.append(("in_model_acceptance", self.in_model_acceptance))
        for move, rates in self.acceptance.items():
            if np.size(rates) and np.isfinite(rates[0]):
                out.append((f"acceptance_{move}_cold", float(rates[0])))
        out += [(f"p_posterior_{k}", v) for k, v in sorted(self.p_posterior.items())]
        return out


def diagnostics(chains: ChainStore) -> DiagnosticsReport:
    params = {"alpha0": chains.alpha0}
    if chains.log_sigma is not None:
        params["log_sigma"] = chains.log_sigma
    rhat, degenerate = {}, {}
    for name, values in params.items():
        by_walker = chains.by_walker(values)
        if by_walker.shape[1] < 10:
            warnings.warn("fewer than 10 post-burn-in draws per walker; R-hat skipped")
            continue
        rhat[name], degenerate[name] = gelman_rubin(by_walker)
    in_model = chains.in_model_acceptance
    return DiagnosticsReport(
        gelman_rubin=rhat, acceptance=chains.acceptance,
        in_model_acceptance=float(in_model[0]) if in_model is not None else float("nan"),
        p_posterior=p_posterior(chains), tempered_p_posterior=chains.tempered_p_histograms(),
        degenerate=degenerate,
    )
