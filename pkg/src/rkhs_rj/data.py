"""Covariance kernels, Gaussian-process trajectories and the synthetic data sets.

All random draws go through an explicitly passed ``numpy.random.Generator``;
nothing here keeps global state.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Invalid kernel or scenario parameter."""


class ConfigurationError(ValueError):
    """Scenario and problem type do not fit together."""


class Kernel(str, enum.Enum):
    BM = "bm"
    FBM = "fbm"
    OU = "ou"
    SQEXP = "sqexp"


class Problem(str, enum.Enum):
    LINEAR = "linear"
    LOGISTIC = "logistic"


class Scenario(str, enum.Enum):
    RKHS = "rkhs"
    L2 = "l2"
    GBM_RKHS = "gbm_rkhs"
    GBM_L2 = "gbm_l2"
    MIXTURE_HOMOSCEDASTIC = "mixture_homoscedastic"
    MIXTURE_HETEROSCEDASTIC = "mixture_heteroscedastic"


MIXTURES = (Scenario.MIXTURE_HOMOSCEDASTIC, Scenario.MIXTURE_HETEROSCEDASTIC)

# generating model shared by every RKHS-type response
RKHS_COEFS = (-5.0, 5.0, 10.0)
RKHS_TIMES = (0.1, 0.6, 0.8)
LINEAR_INTERCEPT = 5.0
LOGISTIC_INTERCEPT = -0.5


@dataclass(frozen=True)
class KernelSpec:
    kind: Kernel = Kernel.BM
    hurst: float = 0.8
    length_scale: float = 0.2
    variance: float = 1.0  # multiplies the kernel; 2.0 gives the rate-2 BM

    def __post_init__(self):
        object.__setattr__(self, "kind", Kernel(self.kind))
        if self.kind is Kernel.FBM and not 0.0 < self.hurst < 1.0:
            raise ParameterError(f"hurst must lie in (0, 1), got {self.hurst}")
        if self.kind is Kernel.SQEXP and not self.length_scale > 0.0:
            raise ParameterError(f"length scale must be positive, got {self.length_scale}")
        if not self.variance > 0.0:
            raise ParameterError(f"variance must be positive, got {self.variance}")


def equispaced_grid(m: int = 100) -> np.ndarray:
    return np.linspace(0.0, 1.0, m)


def check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ParameterError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ParameterError("grid points must be strictly increasing")
    if grid[0] < 0.0 or grid[-1] > 1.0:
        raise ParameterError("grid points must lie in [0, 1]")
    return grid


def kernel_matrix(spec: KernelSpec, t, s) -> np.ndarray:
    """Kernel values for every pair of points, broadcasting ``t`` against ``s``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if spec.kind is Kernel.BM:
        k = np.minimum(t, s)
    elif spec.kind is Kernel.FBM:
        h2 = 2.0 * spec.hurst
        k = 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(t - s) ** h2)
    elif spec.kind is Kernel.OU:
        k = np.exp(-np.abs(t - s))
    else:
        k = np.exp(-((t - s) ** 2) / (2.0 * spec.length_scale**2))
    return spec.variance * k


def kernel_eval(spec: KernelSpec, t: float, s: float) -> float:
    return float(kernel_matrix(spec, t, s))


def gram_matrix(spec: KernelSpec, grid) -> np.ndarray:
    grid = check_grid(grid)
    return kernel_matrix(spec, grid[:, None], grid[None, :])


def _jittered_cholesky(gram: np.ndarray, spec: KernelSpec) -> np.ndarray:
    jitter = 1e-10
    eye = np.eye(gram.shape[0])
    while jitter <= 1e-6 * (1 + 1e-9):
        try:
            return np.linalg.cholesky(gram + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise np.linalg.LinAlgError(
        f"Cholesky factorization failed for {spec} on a grid of {gram.shape[0]} points "
        "even with jitter 1e-6"
    )


def sample_gp(spec: KernelSpec, grid, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` centred GP trajectories on ``grid`` (rows are trajectories).

    Grid points with zero prior variance (BM at t = 0) carry no randomness at
    all, so they are left out of the factorisation and stay exactly 0.
    """
    if n < 1:
        raise ParameterError("n must be at least 1")
    gram = gram_matrix(spec, grid)
    live = np.diag(gram) > 0.0
    chol = _jittered_cholesky(gram[np.ix_(live, live)], spec)
    out = np.zeros((n, gram.shape[0]))
    out[:, live] = rng.standard_normal((n, int(live.sum()))) @ chol.T
    return out


def sample_gbm(grid, n: int, rng: np.random.Generator) -> np.ndarray:
    return np.exp(sample_gp(KernelSpec(Kernel.BM), grid, n, rng))


def nearest_index(times, grid) -> np.ndarray:
    """Index of the grid point nearest to each time; exact midpoints go to the lower index."""
    grid = np.asarray(grid, dtype=float)
    times = np.asarray(times, dtype=float)
    if grid.size == 1:
        return np.zeros(times.shape, dtype=np.intp)
    hi = np.clip(np.searchsorted(grid, times), 1, grid.size - 1)
    lo = hi - 1
    take_lo = (times - grid[lo]) <= (grid[hi] - times)
    return np.where(take_lo, lo, hi)


def trapezoid_weights(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    w = np.zeros(grid.size)
    dt = np.diff(grid)
    w[:-1] += dt / 2.0
    w[1:] += dt / 2.0
    return w


def l2_coefficient(t) -> np.ndarray:
    return np.log1p(4.0 * np.asarray(t, dtype=float))


@dataclass
class FunctionalDataset:
    grid: np.ndarray
    X: np.ndarray
    y: np.ndarray
    problem: Problem = Problem.LINEAR

    def __post_init__(self):
        self.problem = Problem(self.problem)
        self.grid = check_grid(self.grid)
        self.X = np.asarray(self.X, dtype=float).reshape(-1, self.grid.size)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.X.shape[0] != self.y.size:
            raise ValueError(f"{self.X.shape[0]} trajectories but {self.y.size} responses")
        if self.problem is Problem.LOGISTIC and not np.all((self.y == 0) | (self.y == 1)):
            raise ValueError("logistic responses must be exactly 0 or 1")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def m(self) -> int:
        return self.grid.size

    def subset(self, rows) -> "FunctionalDataset":
        rows = np.asarray(rows)
        return FunctionalDataset(self.grid, self.X[rows], self.y[rows], self.problem)


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: Scenario = Scenario.RKHS
    kernel: KernelSpec = field(default_factory=KernelSpec)
    n: int = 300
    problem: Problem = Problem.LINEAR
    noise_sd: float = float(np.sqrt(0.5))
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "problem", Problem(self.problem))
        if self.scenario in MIXTURES and self.problem is not Problem.LOGISTIC:
            raise ConfigurationError(f"{self.scenario.value} is a classification scenario")
        if not self.noise_sd > 0.0:
            raise ParameterError("noise_sd must be positive")
        if self.n < 1:
            raise ParameterError("n must be at least 1")


def regression_function(scenario: Scenario, grid, X) -> np.ndarray:
    """Noise-free functional part of the response (no intercept)."""
    scenario = Scenario(scenario)
    X = np.asarray(X, dtype=float)
    if scenario in (Scenario.RKHS, Scenario.GBM_RKHS):
        cols = nearest_index(RKHS_TIMES, grid)
        return X[:, cols] @ np.asarray(RKHS_COEFS)
    if scenario in (Scenario.L2, Scenario.GBM_L2):
        return X @ (trapezoid_weights(grid) * l2_coefficient(grid))
    raise ConfigurationError(f"{scenario.value} has no regression function")


def _regressors(spec: ScenarioSpec, grid, n, rng) -> np.ndarray:
    if spec.scenario in (Scenario.GBM_RKHS, Scenario.GBM_L2):
        return sample_gbm(grid, n, rng)
    return sample_gp(spec.kernel, grid, n, rng)


def generate_dataset(spec: ScenarioSpec, grid=None, rng: np.random.Generator | None = None) -> FunctionalDataset:
    grid = equispaced_grid() if grid is None else check_grid(grid)
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    n = spec.n

    if spec.scenario in MIXTURES:
        labels = (rng.random(n) < 0.5).astype(float)
        bm = KernelSpec(Kernel.BM)
        X = sample_gp(bm, grid, n, rng)
        ones = labels == 1
        if spec.scenario is Scenario.MIXTURE_HOMOSCEDASTIC:
            X[ones] += np.where(grid > 0.5, 0.75 * grid, 0.0)
        elif ones.any():
            X[ones] = sample_gp(KernelSpec(Kernel.BM, variance=2.0), grid, int(ones.sum()), rng)
        return FunctionalDataset(grid, X, labels, Problem.LOGISTIC)

    X = _regressors(spec, grid, n, rng)
    signal = regression_function(spec.scenario, grid, X)
    if spec.problem is Problem.LINEAR:
        y = LINEAR_INTERCEPT + signal + spec.noise_sd * rng.standard_normal(n)
    else:
        prob = 1.0 / (1.0 + np.exp(-(LOGISTIC_INTERCEPT + signal)))
        y = (rng.random(n) < prob).astype(float)
    return FunctionalDataset(grid, X, y, spec.problem)
