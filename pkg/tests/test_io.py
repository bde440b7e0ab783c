import warnings

import numpy as np
import pytest

from rkhs_rj.data import FunctionalDataset, KernelSpec, Problem, ScenarioSpec, generate_dataset
from rkhs_rj.io import (
    DatasetFormatError,
    ScalingWarning,
    fit_scaling,
    load_csv_dataset,
    scale_fit_apply,
    write_csv_dataset,
)
from rkhs_rj.predict import fit_ridge


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestCsv:
    def test_small_file(self, tmp_path):
        ds = load_csv_dataset(write(tmp_path, "y,0,0.5,1\n1.0,0,1,2\n2.0,1,1,1\n3.5,0,0,-1\n"))
        assert ds.X.shape == (3, 3) and ds.n == 3
        np.testing.assert_array_equal(ds.y, [1.0, 2.0, 3.5])

    def test_grid_normalised(self, tmp_path):
        ds = load_csv_dataset(write(tmp_path, "y,10,20,30\n1,0,0,0\n"))
        np.testing.assert_array_equal(ds.grid, [0.0, 0.5, 1.0])

    def test_round_trip_bit_identical(self, tmp_path):
        ds = generate_dataset(ScenarioSpec("rkhs", KernelSpec("ou"), n=7, seed=0))
        path = tmp_path / "rt.csv"
        write_csv_dataset(ds, path)
        back = load_csv_dataset(path)
        np.testing.assert_array_equal(back.X, ds.X)
        np.testing.assert_array_equal(back.y, ds.y)
        np.testing.assert_array_equal(back.grid, ds.grid)

    def test_logistic_round_trip(self, tmp_path):
        ds = generate_dataset(ScenarioSpec("rkhs", KernelSpec("bm"), n=5, problem="logistic", seed=0))
        write_csv_dataset(ds, tmp_path / "l.csv")
        assert load_csv_dataset(tmp_path / "l.csv", "logistic").problem is Problem.LOGISTIC

    def test_ragged_row_names_line(self, tmp_path):
        with pytest.raises(DatasetFormatError, match=":3:"):
            load_csv_dataset(write(tmp_path, "y,0,1\n1,2,3\n1,2\n"))

    def test_non_monotone_grid(self, tmp_path):
        with pytest.raises(DatasetFormatError, match=":1:"):
            load_csv_dataset(write(tmp_path, "y,0,1,0.5\n1,2,3,4\n"))

    def test_non_binary_logistic(self, tmp_path):
        with pytest.raises(DatasetFormatError, match=":4:"):
            load_csv_dataset(write(tmp_path, "y,0,1\n1,2,3\n0,2,3\n0.5,1,1\n"), "logistic")

    def test_bad_number_and_header(self, tmp_path):
        with pytest.raises(DatasetFormatError, match=":2:"):
            load_csv_dataset(write(tmp_path, "y,0,1\n1,abc,3\n"))
        with pytest.raises(DatasetFormatError, match=":1:"):
            load_csv_dataset(write(tmp_path, "x,0,1\n1,2,3\n"))
        with pytest.raises(DatasetFormatError):
            load_csv_dataset(write(tmp_path, ""))


def _dataset(problem=Problem.LINEAR, n=50, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 6)) * [0.5, 1.0, 2.0, 3.0, 0.1, 1.0]
    y = X @ rng.normal(size=6) + rng.normal(size=n)
    if problem is Problem.LOGISTIC:
        y = (y > 0).astype(float)
    return FunctionalDataset(np.linspace(0, 1, 6), X, y, problem)


class TestScaling:
    def test_unit_sd_is_near_identity(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(200, 4))
        X /= X.std(axis=0)
        y = rng.normal(size=200)
        y /= y.std()
        state = fit_scaling(FunctionalDataset(np.linspace(0, 1, 4), X, y))
        np.testing.assert_allclose(state.x_factor, 1.0, rtol=1e-12)
        assert state.y_factor == pytest.approx(1.0, rel=1e-12)

    def test_logistic_target(self):
        X = np.column_stack([np.array([-2.0, 2.0] * 10), np.ones(20) * np.arange(20)])
        ds = FunctionalDataset(np.array([0.0, 1.0]), X, np.array([0.0, 1.0] * 10), Problem.LOGISTIC)
        state = fit_scaling(ds)
        assert state.x_factor[0] == pytest.approx(0.25)
        assert state.y_factor == 1.0
        np.testing.assert_allclose(state.apply(ds).X.std(axis=0), 0.5)

    def test_train_only_factors(self):
        tr, te = _dataset(seed=2), _dataset(seed=3)
        s_tr, s_te, state = scale_fit_apply(tr, te)
        np.testing.assert_allclose(s_tr.X.std(axis=0), 1.0)
        np.testing.assert_allclose(s_te.X, te.X * (1.0 / tr.X.std(axis=0)))
        assert s_tr.y.std() == pytest.approx(1.0)

    def test_zero_variance_column(self):
        ds = _dataset()
        X = ds.X.copy()
        X[:, 0] = 0.0
        with pytest.warns(ScalingWarning):
            state = fit_scaling(FunctionalDataset(ds.grid, X, ds.y))
        assert state.x_factor[0] == 1.0
        assert np.all(state.x_factor > 0)

    def test_response_round_trip(self):
        state = fit_scaling(_dataset())
        y = np.random.default_rng(4).normal(10, 30, 500)
        np.testing.assert_allclose(state.invert_response(state.forward_response(y)), y, rtol=1e-12, atol=1e-12)

    def test_ridge_agrees_across_scalings(self):
        tr, te = _dataset(n=80, seed=5), _dataset(n=30, seed=6)
        s_tr, s_te, state = scale_fit_apply(tr, te)
        raw = fit_ridge(tr.X, tr.y, 0.5).predict(te.X)
        # ridge standardises its features and is linear in y, so the fits match after unscaling
        scaled = state.invert_response(fit_ridge(s_tr.X, s_tr.y, 0.5).predict(s_te.X))
        np.testing.assert_allclose(scaled, raw, atol=1e-8)

    def test_no_warning_on_clean_data(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            fit_scaling(_dataset())
