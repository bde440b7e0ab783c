import math

import numpy as np
import pytest
from scipy import stats

from oracles import log_posterior_oracle, truncated_poisson_pmf
from rkhs_rj.data import FunctionalDataset, KernelSpec, Problem, ScenarioSpec, equispaced_grid, generate_dataset
from rkhs_rj.model import (
    ParamState,
    PriorConfig,
    Target,
    alpha0_log_prior,
    beta_log_prior,
    linear_predictor,
    log_likelihood,
    log_p_prior,
    log_posterior,
    log_prior,
    tempered_log_posterior,
)

GRID = equispaced_grid(100)


@pytest.fixture(scope="module")
def linear_ds():
    return generate_dataset(ScenarioSpec("rkhs", KernelSpec("bm"), n=50, seed=0))


@pytest.fixture(scope="module")
def logistic_ds():
    return generate_dataset(ScenarioSpec("rkhs", KernelSpec("bm"), n=50, problem="logistic", seed=0))


def random_state(rng, kind, p=None, p_max=10):
    p = rng.integers(1, p_max + 1) if p is None else p
    beta = rng.normal(0, 3, p)
    tau = rng.random(p)
    ls = rng.normal(0, 0.5) if kind == "linear" else None
    return ParamState(beta, tau, rng.normal(0, 2), ls)


class TestPriors:
    def test_poisson_pmf(self):
        np.testing.assert_allclose(PriorConfig().pmf(), truncated_poisson_pmf(), rtol=1e-13)
        assert PriorConfig().pmf().sum() == pytest.approx(1.0)

    def test_poisson_ratio(self):
        cfg = PriorConfig()
        assert log_p_prior(4, cfg) - log_p_prior(3, cfg) == pytest.approx(math.log(3 / 4))

    def test_uniform_pmf(self):
        np.testing.assert_allclose(PriorConfig("uniform").pmf(), np.full(10, 0.1))

    def test_out_of_range_p(self):
        assert log_p_prior(0, PriorConfig()) == -np.inf
        assert log_p_prior(11, PriorConfig()) == -np.inf

    def test_beta_priors(self):
        b = np.linspace(-8, 8, 17)
        np.testing.assert_allclose(beta_log_prior(b, PriorConfig(), "linear"), stats.norm.logpdf(b, 0, 5), rtol=1e-13)
        np.testing.assert_allclose(beta_log_prior(b, PriorConfig(), "logistic"),
                                   stats.t.logpdf(b, 5, scale=2.5), rtol=1e-13)

    def test_logistic_beta_zero(self):
        const = beta_log_prior(0.0, PriorConfig(), "logistic") + 3 * math.log(125.0)
        assert beta_log_prior(1.0, PriorConfig(), "logistic") == pytest.approx(const - 3 * math.log(129.0))

    def test_alpha0_prior(self):
        assert alpha0_log_prior(0.0, "logistic") == pytest.approx(stats.cauchy.logpdf(0, scale=10))
        assert alpha0_log_prior(0.0, "logistic") == pytest.approx(math.log(10 / math.pi) - math.log(100))
        assert alpha0_log_prior(3.0, "linear") == 0.0

    def test_tau_out_of_support(self):
        theta = ParamState([1.0], [1.2], 0.0, 0.0)
        assert log_prior(theta, PriorConfig(), "linear") == -np.inf

    def test_kind_mismatch(self, linear_ds):
        with pytest.raises(ValueError):
            log_prior(ParamState([1.0], [0.5], 0.0), PriorConfig(), "linear")
        with pytest.raises(ValueError):
            log_prior(ParamState([1.0], [0.5], 0.0, 0.0), PriorConfig(), "logistic")
        with pytest.raises(ValueError):
            log_likelihood(ParamState([1.0], [0.5], 0.0), linear_ds, "logistic")


class TestLikelihood:
    def test_linear_predictor_uses_nearest_column(self, linear_ds):
        theta = ParamState([2.0, -1.0], [0.104, 0.6], 1.5, 0.0)
        expected = 1.5 + 2.0 * linear_ds.X[:, 10] - 1.0 * linear_ds.X[:, 59]
        np.testing.assert_allclose(linear_predictor(theta, linear_ds), expected)

    def test_gaussian_against_scipy(self, linear_ds):
        theta = ParamState([2.0], [0.3], 1.0, -0.2)
        eta = linear_predictor(theta, linear_ds)
        expected = stats.norm.logpdf(linear_ds.y, eta, math.exp(-0.2)).sum()
        assert log_likelihood(theta, linear_ds, "linear") == pytest.approx(expected, rel=1e-12)

    def test_logistic_eta_zero(self, logistic_ds):
        theta = ParamState([0.0], [0.5], 0.0)
        assert log_likelihood(theta, logistic_ds, "logistic") == pytest.approx(-logistic_ds.n * math.log(2))

    def test_logistic_stable_for_large_eta(self):
        ds = FunctionalDataset(GRID, np.ones((2, 100)), [1.0, 0.0], Problem.LOGISTIC)
        ll = log_likelihood(ParamState([1000.0], [0.5], 0.0), ds, "logistic")
        assert np.isfinite(ll) and ll == pytest.approx(-1000.0)

    def test_logistic_concave_in_coefficients(self, logistic_ds):
        rng = np.random.default_rng(0)
        tau = [0.2, 0.7]
        for _ in range(20):
            a, b = rng.normal(0, 2, 3), rng.normal(0, 2, 3)
            f = lambda c: log_likelihood(ParamState(c[1:], tau, c[0]), logistic_ds, "logistic")
            assert f((a + b) / 2) >= (f(a) + f(b)) / 2 - 1e-9

    def test_empty_dataset(self):
        ds = FunctionalDataset(GRID, np.zeros((0, 100)), np.zeros(0), Problem.LOGISTIC)
        assert log_likelihood(ParamState([1.0], [0.5], 0.0), ds, "logistic") == 0.0


class TestPosterior:
    @pytest.mark.parametrize("kind", ["linear", "logistic"])
    def test_matches_oracle(self, kind, linear_ds, logistic_ds):
        ds = linear_ds if kind == "linear" else logistic_ds
        rng = np.random.default_rng(11)
        for _ in range(20):
            th = random_state(rng, kind)
            ours = log_posterior(th, ds, PriorConfig(), kind)
            ref = log_posterior_oracle(th.beta, th.tau, th.alpha0, th.log_sigma, ds.grid, ds.X, ds.y, kind)
            assert ours == pytest.approx(ref, abs=1e-9)

    def test_sigma_exponent(self, linear_ds):
        # at fixed residuals the log-posterior moves by -(n + 2) d(log sigma) plus the quadratic term
        th = ParamState([1.0], [0.5], 5.0, 0.0)
        th2 = ParamState([1.0], [0.5], 5.0, 0.3)
        rss = np.sum((linear_ds.y - linear_predictor(th, linear_ds)) ** 2)
        diff = log_posterior(th2, linear_ds, PriorConfig(), "linear") - log_posterior(th, linear_ds, PriorConfig(),
                                                                                       "linear")
        expected = -(linear_ds.n + 2) * 0.3 - 0.5 * rss * (math.exp(-0.6) - 1.0)
        assert diff == pytest.approx(expected, rel=1e-10)

    def test_tempered(self, linear_ds):
        th = ParamState([1.0], [0.5], 5.0, 0.0)
        cfg = PriorConfig()
        lp = log_prior(th, cfg, "linear")
        ll = log_likelihood(th, linear_ds, "linear")
        assert tempered_log_posterior(th, linear_ds, cfg, "linear", 4.0) == pytest.approx(lp + ll / 4)
        assert tempered_log_posterior(th, linear_ds, cfg, "linear", math.inf) == lp
        with pytest.raises(ValueError):
            tempered_log_posterior(th, linear_ds, cfg, "linear", 0.5)

    def test_permutation_invariant(self, linear_ds):
        th = random_state(np.random.default_rng(5), "linear", p=4)
        a = log_posterior(th, linear_ds, PriorConfig(), "linear")
        b = log_posterior(th.permuted([2, 0, 3, 1]), linear_ds, PriorConfig(), "linear")
        assert a == pytest.approx(b, abs=1e-10)


class TestTarget:
    @pytest.mark.parametrize("kind", ["linear", "logistic"])
    def test_batched_matches_scalar(self, kind, linear_ds, logistic_ds):
        ds = linear_ds if kind == "linear" else logistic_ds
        tgt = Target(ds, PriorConfig(), kind)
        rng = np.random.default_rng(2)
        states = [random_state(rng, kind) for _ in range(12)]
        P = 10
        p = np.array([s.p for s in states])
        beta = np.zeros((12, P))
        tau = np.zeros((12, P))
        for i, s in enumerate(states):
            beta[i, :s.p], tau[i, :s.p] = s.beta, s.tau
        a0 = np.array([s.alpha0 for s in states])
        ls = np.array([s.log_sigma or 0.0 for s in states])
        u = tgt.component_term(beta, tau)
        ll = tgt.loglik(u, a0, ls)
        ll_direct = tgt.loglik_components(p, beta, tau, a0, ls)
        for i, s in enumerate(states):
            assert ll[i] == pytest.approx(log_likelihood(s, ds, kind), abs=1e-9)
        np.testing.assert_allclose(ll_direct, ll, atol=1e-9)
        lp = tgt.log_prior(p, beta, tau, a0, ls)
        for i, s in enumerate(states):
            # working coordinates: the linear prior gains the 2 log sigma Jacobian
            jac = 2 * s.log_sigma if kind == "linear" else 0.0
            assert lp[i] == pytest.approx(log_prior(s, PriorConfig(), kind) + jac, abs=1e-10)

    def test_plus_column(self, linear_ds):
        tgt = Target(linear_ds, PriorConfig(), "linear")
        beta = np.array([[1.0, 0.0], [2.0, 0.0]])
        tau = np.array([[0.3, 0.0], [0.6, 0.0]])
        u = tgt.component_term(beta, tau)
        cb = np.array([[0.5, -1.0], [3.0, 0.1]])
        ct = np.array([[0.9, 0.1], [0.2, 0.45]])
        got = tgt.loglik_plus_column(u, cb, ct, np.array([0.1, 0.2]), np.array([0.0, 0.3]))
        for w in range(2):
            for k in range(2):
                th = ParamState([beta[w, 0], cb[w, k]], [tau[w, 0], ct[w, k]], [0.1, 0.2][w], [0.0, 0.3][w])
                assert got[w, k] == pytest.approx(log_likelihood(th, linear_ds, "linear"), abs=1e-9)

    def test_flat_target(self, linear_ds):
        tgt = Target(linear_ds, PriorConfig(), "linear", flat=True)
        assert np.all(tgt.loglik(np.ones((3, linear_ds.n)), np.zeros(3), np.zeros(3)) == 0)

    def test_component_prior_sampling(self):
        ds = FunctionalDataset(GRID, np.zeros((0, 100)), np.zeros(0), Problem.LOGISTIC)
        tgt = Target(ds, PriorConfig(), "logistic")
        b, t = tgt.sample_components(np.random.default_rng(0), 20000)
        assert stats.kstest(b, stats.t(5, scale=2.5).cdf).pvalue > 0.01
        assert stats.kstest(t, "uniform").pvalue > 0.01
