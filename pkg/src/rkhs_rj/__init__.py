"""Trans-dimensional Bayesian RKHS functional regression with an ensemble reversible-jump sampler."""
from .data import FunctionalDataset, Kernel, KernelSpec, Problem, Scenario, ScenarioSpec, generate_dataset
from .model import ParamState, PriorConfig, Target, log_posterior
from .sampler import ChainStore, RJSampler, SamplerConfig, run_sampler

__all__ = [
    "ChainStore", "FunctionalDataset", "Kernel", "KernelSpec", "ParamState", "PriorConfig", "Problem",
    "RJSampler", "SamplerConfig", "Scenario", "ScenarioSpec", "Target", "generate_dataset", "log_posterior",
    "run_sampler",
]
