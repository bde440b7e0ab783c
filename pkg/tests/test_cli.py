import argparse
import subprocess
import sys

import numpy as np
import pytest

from rkhs_rj.cli import build_parser, config_from_args, main, parse_p_prior

TINY = ["--walkers", "8", "--temps", "2", "--iters", "200", "--burn", "100", "--n-train", "40", "--n-test", "20"]


class TestParsing:
    def test_defaults(self):
        cfg = config_from_args(build_parser().parse_args([]))
        assert cfg.sampler.n_walkers == 64 and cfg.sampler.n_temps == 10
        assert cfg.sampler.n_iters == 5000 and cfg.sampler.n_burn == 4000
        assert cfg.sampler.multiple_try == 1
        assert cfg.reps == 10 and cfg.n_train == 200 and cfg.n_test == 100
        assert cfg.prior.p_prior == "poisson" and cfg.prior.rate == 3.0 and cfg.prior.p_max == 10
        assert cfg.prior.eta2 == 25.0

    def test_uniform_prior_turns_on_multiple_try(self):
        cfg = config_from_args(build_parser().parse_args(["--p-prior", "uniform"]))
        assert cfg.sampler.multiple_try == 2 and cfg.prior.p_prior == "uniform"
        cfg = config_from_args(build_parser().parse_args(["--p-prior", "uniform", "--multiple-try", "1"]))
        assert cfg.sampler.multiple_try == 1

    def test_p_prior_values(self):
        assert parse_p_prior("poisson:2.5") == ("poisson", 2.5)
        assert parse_p_prior("uniform") == ("uniform", 3.0)
        for bad in ("poisson:-1", "poisson:x", "geometric", "uniform:3"):
            with pytest.raises(argparse.ArgumentTypeError):
                parse_p_prior(bad)

    def test_method_lists(self):
        args = build_parser().parse_args(["--methods", "w-pp,map_vs", "--summaries", "median"])
        assert args.methods == ("w_pp", "map_vs") and args.summaries == ("median",)
        with pytest.raises(SystemExit):
            build_parser().parse_args(["--methods", "lasso"])

    def test_bad_config_exit_code(self, tmp_path):
        assert main(["--reps", "0", "--out", str(tmp_path)]) == 2


class TestMain:
    def test_tiny_run(self, tmp_path, capsys):
        code = main(TINY + ["--reps", "2", "--methods", "w_pp", "--summaries", "median",
                            "--out", str(tmp_path), "--emit-plot-data"])
        assert code == 0
        assert "w_pp_median" in capsys.readouterr().out
        assert (tmp_path / "results.csv").exists()
        assert (tmp_path / "plot_data" / "rep_1" / "p_trace.csv").exists()

    def test_failure_exit_code(self, tmp_path, capsys):
        path = tmp_path / "const.csv"
        rng = np.random.default_rng(0)
        lines = ["y,0,1,2,3"] + ["2.0," + ",".join(repr(float(v)) for v in rng.normal(size=4)) for _ in range(12)]
        path.write_text("\n".join(lines) + "\n")
        code = main(TINY + ["--reps", "1", "--data", str(path), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "failed" in capsys.readouterr().err

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "rkhs_rj", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0 and "--emit-plot-data" in proc.stdout
