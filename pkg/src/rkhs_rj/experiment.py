"""Repeated train/test experiments, results tables and plot-data files."""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import FunctionalDataset, KernelSpec, Problem, Scenario, ScenarioSpec, equispaced_grid, generate_dataset
from .io import ScalingWarning, load_csv_dataset, scale_fit_apply
from .model import PriorConfig
from .postprocess import DiagnosticsReport, RelabeledChains, diagnostics, posterior_predictive, relabel
from .predict import METHODS, SUMMARIES, metric, predict
from .sampler import ChainStore, SamplerConfig, run_sampler

logger = logging.getLogger(__name__)

RESULTS_HEADER = ["dataset", "method", "summary", "rep", "seed", "metric", "value"]
DIAGNOSTICS_HEADER = ["dataset", "rep", "seed", "name", "value"]
TRAIN_FRACTION = 2.0 / 3.0


@dataclass
class ExperimentConfig:
    problem: Problem = Problem.LINEAR
    scenario: Scenario = Scenario.RKHS
    kernel: KernelSpec = field(default_factory=KernelSpec)
    data_path: str | None = None
    n_train: int = 200
    n_test: int = 100
    grid_size: int = 100
    reps: int = 10
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    methods: tuple = METHODS
    summaries: tuple = SUMMARIES
    out_dir: str | None = None
    master_seed: int = 0
    emit_plot_data: bool = False
    predictive_mean: bool = False
    keep_chains: bool = False

    def __post_init__(self):
        self.problem = Problem(self.problem)
        self.scenario = Scenario(self.scenario)
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.data_path is None:
            # validates the scenario/problem pairing early
            ScenarioSpec(self.scenario, self.kernel, self.n_train + self.n_test, self.problem)
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        bad = set(self.summaries) - set(SUMMARIES) - {"mean"}
        if bad:
            raise ValueError(f"unknown summaries {sorted(bad)}")

    @property
    def dataset_label(self) -> str:
        if self.data_path is not None:
            return Path(self.data_path).stem
        if self.scenario in (Scenario.MIXTURE_HOMOSCEDASTIC, Scenario.MIXTURE_HETEROSCEDASTIC, Scenario.GBM_RKHS,
                             Scenario.GBM_L2):
            return f"{self.problem.value}_{self.scenario.value}"
        return f"{self.problem.value}_{self.scenario.value}_{self.kernel.kind.value}"


@dataclass
class RepOutcome:
    rep: int
    seed: int
    rows: list
    report: DiagnosticsReport | None = None
    chains: RelabeledChains | None = None
    error: str | None = None


@dataclass
class ExperimentResult:
    rows: list
    outcomes: list

    @property
    def failed(self) -> list:
        return [o for o in self.outcomes if o.error is not None]

    def values(self, method: str, summary: str) -> np.ndarray:
        return np.array([r[6] for r in self.rows
                         if r[1] == method and r[2] == summary and isinstance(r[3], int)])


def rep_seeds(master_seed: int, reps: int) -> list[int]:
    """Independent 64-bit seeds for each repetition, expanded from the master seed."""
    children = np.random.SeedSequence(master_seed).spawn(reps)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _split(cfg: ExperimentConfig, rng: np.random.Generator):
    if cfg.data_path is not None:
        full = load_csv_dataset(cfg.data_path, cfg.problem)
        perm = rng.permutation(full.n)
        n_train = int(round(TRAIN_FRACTION * full.n))
        return full.subset(np.sort(perm[:n_train])), full.subset(np.sort(perm[n_train:]))
    spec = ScenarioSpec(cfg.scenario, cfg.kernel, cfg.n_train + cfg.n_test, cfg.problem)
    full = generate_dataset(spec, equispaced_grid(cfg.grid_size), rng)
    return full.subset(np.arange(cfg.n_train)), full.subset(np.arange(cfg.n_train, full.n))


def run_repetition(cfg: ExperimentConfig, rep: int, seed: int) -> RepOutcome:
    data_ss, sampler_ss, predict_ss = np.random.SeedSequence(seed).spawn(3)
    train, test = _split(cfg, np.random.Generator(np.random.Philox(data_ss)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScalingWarning)
        train_s, test_s, scaling = scale_fit_apply(train, test)
    sampler_cfg = replace(cfg.sampler, seed=int(sampler_ss.generate_state(1, dtype=np.uint64)[0]))
    chains = run_sampler(train_s, cfg.prior, cfg.problem, sampler_cfg,
                         np.random.Generator(np.random.Philox(sampler_ss)))
    rel = relabel(chains)
    report = diagnostics(chains)
    rng = np.random.Generator(np.random.Philox(predict_ss))
    name = "rmse" if cfg.problem is Problem.LINEAR else "accuracy"
    rows = []
    for method in cfg.methods:
        for summary in cfg.summaries:
            pred = predict(method, rel, train_s, test_s, cfg.problem, summary, rng, cfg.predictive_mean)
            if cfg.problem is Problem.LINEAR:
                pred = scaling.invert_response(pred)
            rows.append([cfg.dataset_label, method, summary, rep, seed, name, metric(test.y, pred, cfg.problem)])
    if cfg.emit_plot_data and cfg.out_dir is not None:
        pp = posterior_predictive(chains, train_s.grid, train_s.X, cfg.problem, rng,
                                  thin=max(1, -(-len(chains) // 200)))
        if cfg.problem is Problem.LINEAR:
            pp = scaling.invert_response(pp)
        emit_plot_data(rel.samples, report, Path(cfg.out_dir) / "plot_data" / f"rep_{rep}", pp)
    return RepOutcome(rep, seed, rows, report, rel if cfg.keep_chains else None)


def summary_rows(cfg: ExperimentConfig, rows: list) -> list:
    out = []
    keys = []
    for r in rows:
        if (r[1], r[2]) not in keys:
            keys.append((r[1], r[2]))
    for method, summary in keys:
        vals = np.array([r[6] for r in rows if r[1] == method and r[2] == summary])
        metric_name = next(r[5] for r in rows if r[1] == method)
        sd = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
        out.append([cfg.dataset_label, method, summary, "mean", cfg.master_seed, metric_name, float(np.mean(vals))])
        out.append([cfg.dataset_label, method, summary, "std", cfg.master_seed, metric_name, sd])
    return out


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every repetition; a failing repetition is logged and the rest continue."""
    outcomes, rows = [], []
    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    for rep, seed in enumerate(rep_seeds(cfg.master_seed, cfg.reps)):
        try:
            outcome = run_repetition(cfg, rep, seed)
        except Exception as exc:  # recorded, the experiment goes on
            logger.exception("repetition %d failed", rep)
            outcome = RepOutcome(rep, seed, [], error=f"{type(exc).__name__}: {exc}")
        outcomes.append(outcome)
        rows.extend(outcome.rows)
    rows_all = rows + summary_rows(cfg, rows)
    result = ExperimentResult(rows_all, outcomes)
    if out_dir is not None:
        write_results(out_dir / "results.csv", rows_all)
        write_diagnostics(out_dir / "diagnostics.csv", cfg, outcomes)
    return result


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def write_results(path, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULTS_HEADER)
        w.writerows([[_fmt(v) for v in r] for r in rows])


def write_diagnostics(path, cfg: ExperimentConfig, outcomes) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIAGNOSTICS_HEADER)
        for o in outcomes:
            if o.error is not None:
                w.writerow([cfg.dataset_label, o.rep, o.seed, "error", o.error])
                continue
            for name, value in o.report.rows():
                w.writerow([cfg.dataset_label, o.rep, o.seed, name, _fmt(value)])


def emit_plot_data(chains: ChainStore, report: DiagnosticsReport | None, out_dir, pp_draws=None) -> list[Path]:
    """Plain CSV files for the posterior plots: samples, p traces, tempered p histograms, PP draws."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    path = out_dir / "samples.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "iteration", "walker", "p", "component", "beta", "tau", "alpha0", "log_sigma"])
        for i in range(len(chains)):
            ls = "" if chains.log_sigma is None else repr(float(chains.log_sigma[i]))
            for j in range(int(chains.p[i])):
                w.writerow([i, int(chains.iteration[i]), int(chains.walker[i]), int(chains.p[i]), j,
                            repr(float(chains.beta[i, j])), repr(float(chains.tau[i, j])),
                            repr(float(chains.alpha0[i])), ls])
    written.append(path)

    path = out_dir / "p_trace.csv"
    kept = chains.p_trace[chains.n_burn:] if chains.p_trace.ndim == 3 else np.zeros((0, 0, 0), dtype=int)
    n_temps = kept.shape[1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "walker"] + [f"p_temp{k}" for k in range(n_temps)])
        for i in range(kept.shape[0]):
            for l in range(kept.shape[2]):
                w.writerow([chains.n_burn + i, l] + [int(v) for v in kept[i, :, l]])
    written.append(path)

    path = out_dir / "tempered_p.csv"
    hist = chains.tempered_p_histograms() if len(chains) else np.zeros((0, 0))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["temperature", "inv_temp", "p", "frequency"])
        for k in range(hist.shape[0]):
            for p in range(1, hist.shape[1] + 1):
                w.writerow([k, repr(float(chains.inv_temps[k])), p, repr(float(hist[k, p - 1]))])
    written.append(path)

    path = out_dir / "pp_draws.csv"
    draws = np.zeros((0, 0)) if pp_draws is None else np.asarray(pp_draws)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["draw", "row", "value"])
        for d in range(draws.shape[0]):
            w.writerows([[d, i, repr(float(v))] for i, v in enumerate(draws[d])])
    written.append(path)
    return written
