"""Reversible-jump affine-invariant ensemble sampler with parallel tempering.

The ensemble has ``n_temps x n_walkers`` walkers, all stored as padded numpy
arrays so every move is evaluated for a whole batch at once.  One iteration:

1. stretch move on the common parameters (``alpha0``, and ``log_sigma`` for
   the linear model), alternating the two halves of the ensemble;
2. group stretch move on the components ``(beta, tau)``, with partners taken
   from a stationary group of same-dimension snapshots (random-walk
   Metropolis when the group has no walker of that dimension);
3. one birth or death per walker, optionally with multiple tries;
4. one sweep of adjacent temperature swaps (alternating parity).

Inside the sampler the components of every walker are kept sorted by ``tau``.
The posterior is symmetric under relabelling, so restricting it to the ordered
cone changes nothing about ``p`` or the unordered set of components, and it
lines up the j-th component of a walker with the j-th component of its
stretch partner.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .model import ParamState, Target

logger = logging.getLogger(__name__)

IN_MODEL_MOVES = ("stretch", "group_stretch", "random_walk")
MOVES = IN_MODEL_MOVES + ("birth", "death", "swap")


class SamplerError(RuntimeError):
    """Internal invariant violation (non-finite stored state, cache drift)."""


class InitializationError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    n_walkers: int = 64
    n_temps: int = 10
    n_iters: int = 5000
    n_burn: int = 4000
    stretch_scale: float = 2.0
    multiple_try: int = 1
    min_inv_temp: float = 1e-2
    group_refresh: int = 100
    rw_scale: float = 0.1
    adapt_window: int = 25
    adapt_target: tuple[float, float] = (0.20, 0.30)
    check_every: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_walkers < 4 or self.n_walkers % 2:
            raise ValueError("n_walkers must be even and at least 4")
        if self.n_temps < 1:
            raise ValueError("n_temps must be at least 1")
        if not 0 <= self.n_burn < self.n_iters:
            raise ValueError("need 0 <= n_burn < n_iters")
        if not self.stretch_scale > 1.0:
            raise ValueError("stretch scale must exceed 1")
        if self.multiple_try < 1:
            raise ValueError("multiple_try must be at least 1")
        if not 0.0 < self.min_inv_temp <= 1.0:
            raise ValueError("min_inv_temp must lie in (0, 1]")

    def inverse_temperatures(self) -> np.ndarray:
        """Geometric ladder of inverse temperatures from 1 (cold chain) down to ``min_inv_temp``."""
        if self.n_temps == 1:
            return np.ones(1)
        return np.geomspace(1.0, self.min_inv_temp, self.n_temps)


def move_probabilities(p, p_max: int):
    """Probabilities of proposing a birth and a death from dimension ``p``."""
    p = np.asarray(p)
    if p_max == 1:
        return np.zeros(p.shape), np.zeros(p.shape)
    birth = np.where(p <= 1, 1.0, np.where(p >= p_max, 0.0, 0.5))
    return birth, 1.0 - birth


def stretch_factor(a, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw Z from g_a(z) ~ 1/sqrt(z) on [1/a, a] by inverse CDF."""
    a = np.asarray(a, dtype=float)
    u = rng.random(size if size is not None else a.shape)
    return ((a - 1.0) * u + 1.0) ** 2 / a


def stretch_proposal(x, partner, z):
    """``partner + z * (x - partner)`` with ``z`` broadcast over the last axis."""
    z = np.asarray(z, dtype=float)[..., None]
    return partner + z * (x - partner)


def stretch_log_ratio(z, dim, logp_new, logp_old):
    return (np.asarray(dim) - 1) * np.log(z) + (logp_new - logp_old)


def metropolis_accept(log_ratio, rng: np.random.Generator) -> np.ndarray:
    log_ratio = np.where(np.isnan(log_ratio), -np.inf, log_ratio)
    return np.log(rng.random(np.shape(log_ratio))) < log_ratio


def stretch_move(x, partner, a: float, log_target, rng: np.random.Generator, logp_x=None):
    """Single-walker stretch move.  Returns ``(proposal, accepted, z)``."""
    x = np.asarray(x, dtype=float)
    z = float(stretch_factor(a, rng, ()))
    prop = stretch_proposal(x, np.asarray(partner, dtype=float), z)
    logp_x = log_target(x) if logp_x is None else logp_x
    accepted = bool(metropolis_accept(stretch_log_ratio(z, x.size, log_target(prop), logp_x), rng))
    return prop, accepted, z


def ensemble_stretch_step(coords, logp, log_target, a, rng: np.random.Generator):
    """One full update of a fixed-dimension ensemble, half by half.

    ``coords`` has shape ``(L, d)``; ``log_target`` maps ``(k, d)`` arrays to
    ``(k,)``.  Returns updated ``(coords, logp, n_accepted)``.
    """
    coords = np.array(coords, dtype=float)
    logp = np.array(logp, dtype=float)
    n_walkers, dim = coords.shape
    half = n_walkers // 2
    halves = (np.arange(half), np.arange(half, n_walkers))
    n_acc = 0
    for h in (0, 1):
        active, other = halves[h], halves[1 - h]
        partners = other[rng.integers(0, other.size, active.size)]
        z = stretch_factor(a, rng, active.size)
        prop = stretch_proposal(coords[active], coords[partners], z)
        logp_prop = log_target(prop)
        acc = metropolis_accept(stretch_log_ratio(z, dim, logp_prop, logp[active]), rng)
        coords[active[acc]] = prop[acc]
        logp[active[acc]] = logp_prop[acc]
        n_acc += int(acc.sum())
    return coords, logp, n_acc


def birth_log_ratio(ll_low, ll_candidates, p_low, inv_temp, target: Target):
    """Log acceptance ratio of a (multiple-try) birth ``p_low -> p_low + 1``.

    ``ll_candidates`` has a trailing axis with the untempered log-likelihoods
    of the ``N`` candidate states; with ``N = 1`` this is the plain birth
    ratio.  Because new components are drawn from their prior, proposal and
    component prior cancel.  The move-probability ratio is death over birth,
    which is what detailed balance requires.  A death from ``p_low + 1`` has
    exactly the negated ratio (with its reference set in place of the
    candidates).
    """
    ll_candidates = np.asarray(ll_candidates, dtype=float)
    p_low = np.asarray(p_low)
    inv_temp = np.asarray(inv_temp, dtype=float)
    n_try = ll_candidates.shape[-1]
    log_w = (inv_temp[..., None] * (ll_candidates - np.asarray(ll_low)[..., None])
             + (target.log_p(p_low + 1) - target.log_p(p_low))[..., None])
    birth_p, _ = move_probabilities(p_low, target.p_max)
    _, death_p = move_probabilities(p_low + 1, target.p_max)
    with np.errstate(divide="ignore"):
        log_moves = np.log(death_p) - np.log(birth_p)
    if n_try == 1:
        return log_w[..., 0] + log_moves
    return logsumexp(log_w, axis=-1) - math.log(n_try) + log_moves


def swap_log_ratio(inv_i, inv_j, ll_i, ll_j):
    """Replica-exchange log acceptance for swapping states between two temperatures."""
    return (inv_i - inv_j) * (np.asarray(ll_j) - np.asarray(ll_i))


def adapt_scale(rate, a, target=(0.20, 0.30), factor: float = 1.1, bounds=(1.01, 10.0)):
    """Grow ``a`` when acceptance is above the band, shrink it when below."""
    rate = np.asarray(rate, dtype=float)
    a = np.asarray(a, dtype=float)
    lo, hi = target
    a = np.where(rate > hi, a * factor, np.where(rate < lo, a / factor, a))
    a = np.clip(a, *bounds)
    return float(a) if a.ndim == 0 else a


def sort_components(p, beta, tau):
    """Order the active components of every walker by ``tau`` (padding stays at the end)."""
    active = np.arange(beta.shape[-1]) < np.asarray(p)[..., None]
    key = np.where(active, tau, np.inf)
    order = np.argsort(key, axis=-1, kind="stable")
    beta = np.take_along_axis(beta, order, axis=-1)
    tau = np.take_along_axis(tau, order, axis=-1)
    return np.where(active, beta, 0.0), np.where(active, tau, 0.0)


def in_cone(p, tau) -> np.ndarray:
    """Active ``tau`` inside [0, 1] and strictly increasing."""
    p = np.asarray(p)
    P = tau.shape[-1]
    active = np.arange(P) < p[..., None]
    inside = np.all(~active | ((tau >= 0.0) & (tau <= 1.0)), axis=-1)
    if P < 2:
        return inside
    pair_active = np.arange(P - 1) < (p[..., None] - 1)
    increasing = np.all(~pair_active | (np.diff(tau, axis=-1) > 0.0), axis=-1)
    return inside & increasing


@dataclass
class MoveStats:
    n_temps: int
    proposed: dict = field(default_factory=dict)
    accepted: dict = field(default_factory=dict)

    def __post_init__(self):
        for m in MOVES:
            self.proposed.setdefault(m, np.zeros(self.n_temps, dtype=np.int64))
            self.accepted.setdefault(m, np.zeros(self.n_temps, dtype=np.int64))

    def add(self, move, temps, accepted):
        temps = np.asarray(temps).ravel()
        accepted = np.asarray(accepted).ravel()
        self.proposed[move] += np.bincount(temps, minlength=self.n_temps)
        self.accepted[move] += np.bincount(temps, weights=accepted, minlength=self.n_temps).astype(np.int64)

    def rates(self) -> dict:
        with np.errstate(invalid="ignore", divide="ignore"):
            return {m: self.accepted[m] / self.proposed[m] for m in MOVES}

    def in_model_rate(self) -> np.ndarray:
        prop = sum(self.proposed[m] for m in IN_MODEL_MOVES)
        acc = sum(self.accepted[m] for m in IN_MODEL_MOVES)
        with np.errstate(invalid="ignore", divide="ignore"):
            return acc / prop


@dataclass
class EnsembleState:
    """Live sampler state; every array is indexed ``[temperature, walker, ...]``."""

    p: np.ndarray
    beta: np.ndarray
    tau: np.ndarray
    alpha0: np.ndarray
    log_sigma: np.ndarray
    u: np.ndarray  # cached sum_j beta_j X(t_j), shape (T, L, n)
    loglik: np.ndarray
    logprior: np.ndarray
    inv_temps: np.ndarray
    scales: dict
    stats: MoveStats

    @property
    def shape(self):
        return self.p.shape

    def log_target(self) -> np.ndarray:
        return self.inv_temps[:, None] * self.loglik + self.logprior

    def param_state(self, t: int, l: int, linear: bool = True) -> ParamState:
        p = int(self.p[t, l])
        return ParamState(self.beta[t, l, :p].copy(), self.tau[t, l, :p].copy(), self.alpha0[t, l],
                          self.log_sigma[t, l] if linear else None)

    def swap_arrays(self):
        return ("p", "beta", "tau", "alpha0", "log_sigma", "u", "loglik", "logprior")


def init_ensemble(cfg: SamplerConfig, target: Target, rng: np.random.Generator) -> EnsembleState:
    """Draw every walker's ``(p, beta, tau)`` from the prior.

    Linear model: ``alpha0 ~ N(0, (10 |mean y|)^2)`` and ``sigma^2 ~ InvGamma(2, b)``
    with ``b = (0.01 |mean y|)^2 / var(y)`` (responses are already scaled).
    Logistic model: ``alpha0`` from its Cauchy(0, 10) prior.
    """
    T, L, P = cfg.n_temps, cfg.n_walkers, target.p_max
    y = target.dataset.y
    p = rng.choice(np.arange(1, P + 1), size=(T, L), p=target.prior.pmf())
    beta, tau = target.sample_components(rng, (T, L, P))
    beta, tau = sort_components(p, beta, tau)
    if target.linear:
        var_y = float(np.var(y)) if y.size > 1 else 0.0
        if not var_y > 0.0:
            raise InitializationError("response has zero variance; cannot initialise sigma")
        ybar = abs(float(np.mean(y)))
        sd_alpha = 10.0 * ybar if ybar > 0 else 1.0
        sigma_hat = 1e-2 * ybar if ybar > 0 else 1e-2
        alpha0 = sd_alpha * rng.standard_normal((T, L))
        sigma2 = (sigma_hat**2 / var_y) / rng.gamma(2.0, 1.0, (T, L))
        log_sigma = 0.5 * np.log(sigma2)
    else:
        alpha0 = 10.0 * rng.standard_cauchy((T, L))
        log_sigma = np.zeros((T, L))
    u = target.component_term(beta, tau)
    loglik = target.loglik(u, alpha0, log_sigma)
    logprior = target.log_prior(p, beta, tau, alpha0, log_sigma)
    a0 = cfg.stretch_scale
    return EnsembleState(
        p=p, beta=beta, tau=tau, alpha0=alpha0, log_sigma=log_sigma, u=u, loglik=loglik,
        logprior=logprior, inv_temps=cfg.inverse_temperatures(),
        scales={"stretch": np.full(T, a0), "group_stretch": np.full(T, a0)},
        stats=MoveStats(T),
    )


@dataclass
class ChainStore:
    """Cold-chain samples after burn-in, stored iteration-major (``index = k * L + walker``)."""

    iteration: np.ndarray
    walker: np.ndarray
    p: np.ndarray
    beta: np.ndarray  # (M, p_max), NaN beyond p
    tau: np.ndarray
    alpha0: np.ndarray
    log_sigma: np.ndarray | None
    loglik: np.ndarray
    p_trace: np.ndarray  # (n_iters, T, L), all iterations and temperatures
    n_burn: int
    inv_temps: np.ndarray
    acceptance: dict = field(default_factory=dict)
    in_model_acceptance: np.ndarray | None = None
    scales: dict = field(default_factory=dict)

    def __len__(self):
        return self.p.size

    @property
    def n_walkers(self) -> int:
        return self.p_trace.shape[2] if self.p_trace.size else int(self.walker.max(initial=-1) + 1)

    @property
    def p_max(self) -> int:
        return self.beta.shape[1]

    def state(self, i: int) -> ParamState:
        p = int(self.p[i])
        ls = None if self.log_sigma is None else self.log_sigma[i]
        return ParamState(self.beta[i, :p], self.tau[i, :p], self.alpha0[i], ls)

    def states(self):
        for i in range(len(self)):
            yield self.state(i)

    def by_walker(self, values) -> np.ndarray:
        """Reshape a per-sample array to ``(n_walkers, n_kept)`` chains."""
        values = np.asarray(values)
        return values.reshape(-1, self.n_walkers).T

    def tempered_p_histograms(self) -> np.ndarray:
        """Row ``k``: relative frequencies of ``p = 1..p_max`` at temperature ``k`` after burn-in."""
        kept = self.p_trace[self.n_burn:]
        T = kept.shape[1] if kept.ndim == 3 else 0
        out = np.zeros((T, self.p_max))
        for k in range(T):
            counts = np.bincount(kept[:, k].ravel(), minlength=self.p_max + 1)[1:self.p_max + 1]
            out[k] = counts / max(counts.sum(), 1)
        return out

    def with_components(self, beta, tau) -> "ChainStore":
        from dataclasses import replace
        return replace(self, beta=beta, tau=tau)


class RJSampler:
    """Drives an :class:`EnsembleState` through the move cycle."""

    def __init__(self, target: Target, config: SamplerConfig, rng: np.random.Generator | None = None,
                 state: EnsembleState | None = None):
        self.target = target
        self.cfg = config
        self.rng = rng if rng is not None else np.random.Generator(np.random.Philox(config.seed))
        self.state = state if state is not None else init_ensemble(config, target, self.rng)
        T, L = self.state.shape
        self._temps = np.broadcast_to(np.arange(T)[:, None], (T, L))
        self._group = None
        self._window = MoveStats(T)

    # -- stationary group -------------------------------------------------
    def refresh_group(self):
        s = self.state
        T, L = s.shape
        order = np.argsort(s.p, axis=1, kind="stable")
        counts = np.stack([np.bincount(s.p[t], minlength=self.target.p_max + 1) for t in range(T)])
        starts = np.cumsum(counts, axis=1) - counts
        self._group = dict(beta=s.beta.copy(), tau=s.tau.copy(), order=order, counts=counts, starts=starts)

    # -- moves ------------------------------------------------------------
    def stretch_common(self, half: int):
        s, tgt, rng = self.state, self.target, self.rng
        T, L = s.shape
        h = L // 2
        active = np.arange(h) + half * h
        other = np.arange(h) + (1 - half) * h
        tt = np.arange(T)[:, None]
        partners = other[rng.integers(0, h, (T, h))]
        z = stretch_factor(s.scales["stretch"][:, None], rng, (T, h))
        x = np.stack([s.alpha0[tt, active], s.log_sigma[tt, active]], axis=-1)
        g = np.stack([s.alpha0[tt, partners], s.log_sigma[tt, partners]], axis=-1)
        dim = 2
        if not tgt.linear:
            x, g, dim = x[..., :1], g[..., :1], 1
        prop = stretch_proposal(x, g, z)
        new_alpha0 = prop[..., 0]
        new_ls = prop[..., 1] if tgt.linear else s.log_sigma[tt, active]
        ll_new = tgt.loglik(s.u[tt, active], new_alpha0, new_ls)
        lp_new = tgt.log_prior(s.p[tt, active], s.beta[tt, active], s.tau[tt, active], new_alpha0, new_ls)
        inv = s.inv_temps[:, None]
        logp_new = inv * ll_new + lp_new
        logp_old = inv * s.loglik[tt, active] + s.logprior[tt, active]
        acc = metropolis_accept(stretch_log_ratio(z, dim, logp_new, logp_old), rng)
        ti, wi = np.nonzero(acc)
        wa = active[wi]
        s.alpha0[ti, wa] = new_alpha0[ti, wi]
        s.log_sigma[ti, wa] = new_ls[ti, wi]
        s.loglik[ti, wa] = ll_new[ti, wi]
        s.logprior[ti, wa] = lp_new[ti, wi]
        self._count("stretch", self._temps[:, :h], acc)

    def group_stretch(self):
        s, tgt, rng, grp = self.state, self.target, self.rng, self._group
        if grp is None:
            self.refresh_group()
            grp = self._group
        T, L = s.shape
        tt = self._temps
        count = grp["counts"][tt, s.p]
        use_stretch = count > 0
        pick = np.minimum((rng.random((T, L)) * count).astype(np.int64), np.maximum(count - 1, 0))
        slot = np.minimum(grp["starts"][tt, s.p] + pick, L - 1)
        partner = grp["order"][tt, slot]
        z = stretch_factor(s.scales["group_stretch"][:, None], rng, (T, L))
        g_beta = grp["beta"][tt, partner]
        g_tau = grp["tau"][tt, partner]
        active = np.arange(tgt.p_max) < s.p[..., None]
        noise = rng.standard_normal((2, T, L, tgt.p_max)) * self.cfg.rw_scale * active
        stretch_b = stretch_proposal(s.beta, g_beta, z)
        stretch_t = stretch_proposal(s.tau, g_tau, z)
        new_beta = np.where(use_stretch[..., None], stretch_b, s.beta + noise[0])
        new_tau = np.where(use_stretch[..., None], stretch_t, s.tau + noise[1])
        new_beta = np.where(active, new_beta, 0.0)
        new_tau = np.where(active, new_tau, 0.0)
        log_jac = np.where(use_stretch, (2 * s.p - 1) * np.log(z), 0.0)
        log_u = np.log(rng.random((T, L)))

        ok = in_cone(s.p, new_tau)
        ti, wi = np.nonzero(ok)
        acc = np.zeros((T, L), dtype=bool)
        if ti.size:
            nb, nt = new_beta[ti, wi], new_tau[ti, wi]
            p_ok = s.p[ti, wi]
            ll_new = tgt.loglik_components(p_ok, nb, nt, s.alpha0[ti, wi], s.log_sigma[ti, wi])
            lp_new = tgt.log_prior(p_ok, nb, nt, s.alpha0[ti, wi], s.log_sigma[ti, wi])
            inv = s.inv_temps[ti]
            ratio = log_jac[ti, wi] + inv * (ll_new - s.loglik[ti, wi]) + (lp_new - s.logprior[ti, wi])
            ratio = np.where(np.isnan(ratio), -np.inf, ratio)
            a = log_u[ti, wi] < ratio
            ai, aw = ti[a], wi[a]
            s.beta[ai, aw] = nb[a]
            s.tau[ai, aw] = nt[a]
            if ai.size:
                pmax_here = int(p_ok[a].max())
                s.u[ai, aw] = tgt.component_term(nb[a, :pmax_here], nt[a, :pmax_here])
            s.loglik[ai, aw] = ll_new[a]
            s.logprior[ai, aw] = lp_new[a]
            acc[ai, aw] = True
        self._count("group_stretch", tt[use_stretch], acc[use_stretch])
        self._count("random_walk", tt[~use_stretch], acc[~use_stretch])

    def birth_death(self):
        s, tgt, rng = self.state, self.target, self.rng
        T, L = s.shape
        if tgt.p_max == 1:
            return
        b, _ = move_probabilities(s.p, tgt.p_max)
        is_birth = rng.random((T, L)) < b
        self._birth(*np.nonzero(is_birth))
        self._death(*np.nonzero(~is_birth))

    def _birth(self, ti, wi):
        s, tgt, rng = self.state, self.target, self.rng
        if ti.size == 0:
            return
        n_try = self.cfg.multiple_try
        cb, ct = tgt.sample_components(rng, (ti.size, n_try))
        u_base = s.u[ti, wi]
        ll_c = tgt.loglik_plus_column(u_base, cb, ct, s.alpha0[ti, wi], s.log_sigma[ti, wi])
        p_low = s.p[ti, wi]
        inv = s.inv_temps[ti]
        ratio = birth_log_ratio(s.loglik[ti, wi], ll_c, p_low, inv, tgt)
        if n_try == 1:
            k = np.zeros(ti.size, dtype=np.int64)
        else:
            log_w = inv[:, None] * (ll_c - s.loglik[ti, wi][:, None])
            k = _choose_weighted(log_w, rng)
        log_u = np.log(rng.random(ti.size))
        acc = log_u < np.where(np.isnan(ratio), -np.inf, ratio)
        self._count("birth", ti, acc)
        if not acc.any():
            return
        ti, wi, k = ti[acc], wi[acc], k[acc]
        rows = np.nonzero(acc)[0]
        new_b, new_t = cb[rows, k], ct[rows, k]
        p_old = s.p[ti, wi]
        beta = s.beta[ti, wi]
        tau = s.tau[ti, wi]
        beta[np.arange(ti.size), p_old] = new_b
        tau[np.arange(ti.size), p_old] = new_t
        beta, tau = sort_components(p_old + 1, beta, tau)
        s.p[ti, wi] = p_old + 1
        s.beta[ti, wi] = beta
        s.tau[ti, wi] = tau
        s.u[ti, wi] = u_base[rows] + tgt.column_term(new_b, new_t)
        s.loglik[ti, wi] = ll_c[rows, k]
        s.logprior[ti, wi] = tgt.log_prior(p_old + 1, beta, tau, s.alpha0[ti, wi], s.log_sigma[ti, wi])

    def _death(self, ti, wi):
        s, tgt, rng = self.state, self.target, self.rng
        if ti.size == 0:
            return
        p = s.p[ti, wi]
        j = np.minimum((rng.random(ti.size) * p).astype(np.int64), p - 1)
        beta, tau = _delete_component(s.beta[ti, wi], s.tau[ti, wi], j)
        a0, ls = s.alpha0[ti, wi], s.log_sigma[ti, wi]
        # removing column j from the cached sum keeps u exact up to rounding
        u_low = s.u[ti, wi] - tgt.column_term(np.take_along_axis(s.beta[ti, wi], j[:, None], 1)[:, 0],
                                              np.take_along_axis(s.tau[ti, wi], j[:, None], 1)[:, 0])
        ll_low = tgt.loglik(u_low, a0, ls)
        inv = s.inv_temps[ti]
        ref = s.loglik[ti, wi][:, None]
        n_try = self.cfg.multiple_try
        if n_try > 1:
            ab, at = tgt.sample_components(rng, (ti.size, n_try - 1))
            ll_aux = tgt.loglik_plus_column(u_low, ab, at, a0, ls)
            ref = np.concatenate([ref, ll_aux], axis=1)
        ratio = -birth_log_ratio(ll_low, ref, p - 1, inv, tgt)
        log_u = np.log(rng.random(ti.size))
        acc = log_u < np.where(np.isnan(ratio), -np.inf, ratio)
        self._count("death", ti, acc)
        if not acc.any():
            return
        ti, wi = ti[acc], wi[acc]
        s.p[ti, wi] = p[acc] - 1
        s.beta[ti, wi] = beta[acc]
        s.tau[ti, wi] = tau[acc]
        s.u[ti, wi] = u_low[acc]
        s.loglik[ti, wi] = ll_low[acc]
        s.logprior[ti, wi] = tgt.log_prior(p[acc] - 1, beta[acc], tau[acc], a0[acc], ls[acc])

    def temperature_swap(self, iteration: int):
        s, rng = self.state, self.rng
        T, L = s.shape
        for k in range(iteration % 2, T - 1, 2):
            perm = rng.permutation(L)
            ratio = swap_log_ratio(s.inv_temps[k], s.inv_temps[k + 1], s.loglik[k], s.loglik[k + 1, perm])
            acc = metropolis_accept(ratio, rng)
            self._count("swap", np.full(L, k), acc)
            lo = np.nonzero(acc)[0]
            hi = perm[lo]
            for name in s.swap_arrays():
                arr = getattr(s, name)
                tmp = arr[k, lo].copy()
                arr[k, lo] = arr[k + 1, hi]
                arr[k + 1, hi] = tmp

    def adapt(self):
        for move in ("stretch", "group_stretch"):
            prop = self._window.proposed[move]
            with np.errstate(invalid="ignore", divide="ignore"):
                rate = self._window.accepted[move] / prop
            a = self.state.scales[move]
            self.state.scales[move] = np.where(prop > 0, adapt_scale(rate, a, self.cfg.adapt_target), a)
        self._window = MoveStats(self.state.shape[0])

    def _count(self, move, temps, accepted):
        self.state.stats.add(move, temps, accepted)
        self._window.add(move, temps, accepted)

    # -- checks -----------------------------------------------------------
    def check_cache(self, tol: float = 1e-9):
        s, tgt = self.state, self.target
        u = tgt.component_term(s.beta, s.tau)
        ll = tgt.loglik(u, s.alpha0, s.log_sigma)
        lp = tgt.log_prior(s.p, s.beta, s.tau, s.alpha0, s.log_sigma)
        fresh = s.inv_temps[:, None] * ll + lp
        cached = s.log_target()
        if not np.all(np.isfinite(cached)):
            bad = np.argwhere(~np.isfinite(cached))[0]
            raise SamplerError(f"non-finite log-posterior stored at temperature/walker {tuple(bad)}")
        drift = float(np.max(np.abs(fresh - cached)))
        if drift > tol:
            raise SamplerError(f"cached log-posterior drifted from a fresh evaluation by {drift:.3g}")
        return drift

    # -- main loop --------------------------------------------------------
    def step(self, iteration: int):
        if self._group is None or iteration % self.cfg.group_refresh == 0:
            self.refresh_group()
        self.stretch_common(0)
        self.stretch_common(1)
        self.group_stretch()
        self.birth_death()
        if self.state.shape[0] > 1:
            self.temperature_swap(iteration)

    def run(self) -> ChainStore:
        cfg, s = self.cfg, self.state
        T, L = s.shape
        P = self.target.p_max
        n_keep = cfg.n_iters - cfg.n_burn
        p_trace = np.zeros((cfg.n_iters, T, L), dtype=np.int16)
        keep = dict(
            p=np.zeros((n_keep, L), dtype=np.int64), beta=np.full((n_keep, L, P), np.nan),
            tau=np.full((n_keep, L, P), np.nan), alpha0=np.zeros((n_keep, L)),
            log_sigma=np.zeros((n_keep, L)), loglik=np.zeros((n_keep, L)),
        )
        for it in range(cfg.n_iters):
            if it == cfg.n_burn:
                s.stats = MoveStats(T)
            self.step(it)
            p_trace[it] = s.p
            if it < cfg.n_burn and (it + 1) % cfg.adapt_window == 0:
                self.adapt()
            if cfg.check_every and (it + 1) % cfg.check_every == 0:
                self.check_cache()
            if it >= cfg.n_burn:
                k = it - cfg.n_burn
                active = np.arange(P) < s.p[0][:, None]
                keep["p"][k] = s.p[0]
                keep["beta"][k] = np.where(active, s.beta[0], np.nan)
                keep["tau"][k] = np.where(active, s.tau[0], np.nan)
                keep["alpha0"][k] = s.alpha0[0]
                keep["log_sigma"][k] = s.log_sigma[0]
                keep["loglik"][k] = s.loglik[0]
        iters = np.repeat(np.arange(cfg.n_burn, cfg.n_iters), L)
        return ChainStore(
            iteration=iters, walker=np.tile(np.arange(L), n_keep), p=keep["p"].ravel(),
            beta=keep["beta"].reshape(-1, P), tau=keep["tau"].reshape(-1, P),
            alpha0=keep["alpha0"].ravel(),
            log_sigma=keep["log_sigma"].ravel() if self.target.linear else None,
            loglik=keep["loglik"].ravel(), p_trace=p_trace, n_burn=cfg.n_burn, inv_temps=s.inv_temps.copy(),
            acceptance=s.stats.rates(), in_model_acceptance=s.stats.in_model_rate(),
            scales={k: v.copy() for k, v in s.scales.items()},
        )


def _choose_weighted(log_w, rng: np.random.Generator) -> np.ndarray:
    """Row-wise categorical draw with probabilities proportional to ``exp(log_w)``."""
    m = np.max(log_w, axis=1, keepdims=True)
    # rows with no finite weight fall back to uniform
    w = np.exp(log_w - np.where(np.isfinite(m), m, 0.0))
    w = np.where(np.isfinite(m), w, 1.0)
    cum = np.cumsum(w, axis=1)
    total = cum[:, -1:]
    total = np.where(total > 0, total, 1.0)
    u = rng.random((log_w.shape[0], 1)) * total
    return np.minimum((cum <= u).sum(axis=1), log_w.shape[1] - 1)


def _delete_component(beta, tau, j):
    """Remove column ``j[i]`` from row ``i``, shifting later components left."""
    P = beta.shape[1]
    idx = np.arange(P)[None, :]
    src = np.where(idx >= j[:, None], np.minimum(idx + 1, P - 1), idx)
    beta = np.take_along_axis(beta, src, axis=1)
    tau = np.take_along_axis(tau, src, axis=1)
    beta[:, -1] = 0.0
    tau[:, -1] = 0.0
    return beta, tau


def run_sampler(dataset, prior_cfg, kind, cfg: SamplerConfig, rng: np.random.Generator | None = None,
                flat: bool = False) -> ChainStore:
    """Fit the model to an already scaled dataset and return the cold-chain samples."""
    target = Target(dataset, prior_cfg, kind, flat=flat)
    return RJSampler(target, cfg, rng).run()
