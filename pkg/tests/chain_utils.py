"""Helpers that build ChainStore objects from explicit samples."""
import numpy as np

from rkhs_rj.sampler import ChainStore


def make_store(betas, taus, alpha0=None, log_sigma=None, p_max=10, n_walkers=1):
    """ChainStore from ragged per-sample component lists, laid out iteration-major."""
    M = len(betas)
    p = np.array([len(b) for b in betas])
    beta = np.full((M, p_max), np.nan)
    tau = np.full((M, p_max), np.nan)
    for i, (b, t) in enumerate(zip(betas, taus)):
        beta[i, :len(b)] = b
        tau[i, :len(t)] = t
    alpha0 = np.zeros(M) if alpha0 is None else np.asarray(alpha0, dtype=float)
    ls = None if log_sigma is None else np.broadcast_to(np.asarray(log_sigma, dtype=float), (M,)).copy()
    n_it = M // n_walkers
    return ChainStore(
        iteration=np.repeat(np.arange(n_it), n_walkers), walker=np.tile(np.arange(n_walkers), n_it),
        p=p, beta=beta, tau=tau, alpha0=alpha0, log_sigma=ls, loglik=np.zeros(M),
        p_trace=p.reshape(n_it, 1, n_walkers).astype(np.int16), n_burn=0, inv_temps=np.ones(1),
    )


def random_store(rng, M=50, p_max=10, n_walkers=1, linear=True):
    """Random chains with unsorted components and distinct values."""
    ps = rng.integers(1, p_max + 1, M)
    betas = [rng.normal(0, 3, k) for k in ps]
    taus = [rng.random(k) for k in ps]
    return make_store(betas, taus, rng.normal(size=M), rng.normal(size=M) if linear else None,
                      p_max, n_walkers)


def component_multiset(store, i):
    k = store.p[i]
    return sorted(zip(store.beta[i, :k].tolist(), store.tau[i, :k].tolist()))
