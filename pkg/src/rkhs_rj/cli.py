"""Command-line entry point: ``rkhs-rj [options]`` or ``python3 -m rkhs_rj``."""
from __future__ import annotations

import argparse
import logging
import sys

from .data import Kernel, KernelSpec, Problem, Scenario
from .experiment import ExperimentConfig, run_experiment
from .model import PriorConfig
from .predict import METHODS, SUMMARIES
from .sampler import SamplerConfig


def _list(choices):
    def parse(text):
        items = [t.strip().replace("-", "_") for t in text.split(",") if t.strip()]
        bad = [t for t in items if t not in choices]
        if bad or not items:
            raise argparse.ArgumentTypeError(f"choose from {', '.join(choices)}")
        return tuple(items)
    return parse


def parse_p_prior(text: str):
    """``poisson:RATE`` or ``uniform``."""
    kind, _, rate = text.partition(":")
    if kind == "uniform" and not rate:
        return "uniform", 3.0
    if kind == "poisson":
        try:
            value = float(rate) if rate else 3.0
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad Poisson rate {rate!r}") from None
        if value <= 0:
            raise argparse.ArgumentTypeError("Poisson rate must be positive")
        return "poisson", value
    raise argparse.ArgumentTypeError("expected poisson:RATE or uniform")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rkhs-rj", description="Trans-dimensional Bayesian RKHS functional regression")
    ap.add_argument("--problem", choices=[p.value for p in Problem], default="linear")
    ap.add_argument("--scenario", choices=[s.value for s in Scenario], default="rkhs")
    ap.add_argument("--kernel", choices=[k.value for k in Kernel], default="bm")
    ap.add_argument("--data", metavar="PATH", help="CSV dataset (header y,t_1,...,t_m); split 2/3 train")
    ap.add_argument("--n-train", type=int, default=200)
    ap.add_argument("--n-test", type=int, default=100)
    ap.add_argument("--grid-size", type=int, default=100)
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0, help="master seed")
    ap.add_argument("--walkers", type=int, default=64)
    ap.add_argument("--temps", type=int, default=10)
    ap.add_argument("--iters", type=int, default=5000)
    ap.add_argument("--burn", type=int, default=4000)
    ap.add_argument("--p-prior", type=parse_p_prior, default=("poisson", 3.0), metavar="{poisson:RATE|uniform}")
    ap.add_argument("--p-max", type=int, default=10)
    ap.add_argument("--eta2", type=float, default=25.0)
    ap.add_argument("--multiple-try", type=int, default=None, metavar="N",
                    help="tries per birth (default 1, or 2 with the uniform p prior)")
    ap.add_argument("--methods", type=_list(METHODS), default=METHODS)
    ap.add_argument("--summaries", type=_list(SUMMARIES + ("mean",)), default=SUMMARIES)
    ap.add_argument("--predictive-mean", action="store_true",
                    help="use predictive means instead of one draw per sample (linear one-stage methods)")
    ap.add_argument("--out", metavar="DIR", default="results")
    ap.add_argument("--emit-plot-data", action="store_true")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args) -> ExperimentConfig:
    p_prior, rate = args.p_prior
    n_try = args.multiple_try if args.multiple_try is not None else (2 if p_prior == "uniform" else 1)
    sampler = SamplerConfig(n_walkers=args.walkers, n_temps=args.temps, n_iters=args.iters, n_burn=args.burn,
                            multiple_try=n_try, seed=args.seed)
    return ExperimentConfig(
        problem=args.problem, scenario=args.scenario, kernel=KernelSpec(args.kernel), data_path=args.data,
        n_train=args.n_train, n_test=args.n_test, grid_size=args.grid_size, reps=args.reps, sampler=sampler,
        prior=PriorConfig(p_prior, rate, args.p_max, args.eta2), methods=args.methods,
        summaries=args.summaries, out_dir=args.out, master_seed=args.seed,
        emit_plot_data=args.emit_plot_data, predictive_mean=args.predictive_mean,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = run_experiment(cfg)
    for row in result.rows:
        if row[3] == "mean":
            sd = next(r[6] for r in result.rows if r[1:3] == row[1:3] and r[3] == "std")
            label = f"{row[1]}_{row[2]}"
            print(f"{row[0]:<28} {label:<14} {row[5]} {row[6]:.3f} ({sd:.3f})")
    for o in result.failed:
        print(f"repetition {o.rep} failed: {o.error}", file=sys.stderr)
    return 1 if result.failed else 0


if __name__ == "__main__":
    sys.exit(main())
