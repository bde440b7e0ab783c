"""Dataset CSV format and train-based scaling.

CSV layout: a header ``y,t_1,...,t_m`` whose ``t_j`` are the grid values,
then one row per trajectory: the response followed by the ``m`` trajectory
values.  The grid is mapped affinely onto [0, 1] when loading.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import FunctionalDataset, Problem

logger = logging.getLogger(__name__)

TARGET_SD = {Problem.LINEAR: 1.0, Problem.LOGISTIC: 0.5}


class DatasetFormatError(ValueError):
    pass


class ScalingWarning(UserWarning):
    pass


def _parse_floats(cells, path, lineno):
    try:
        return [float(c) for c in cells]
    except ValueError as exc:
        raise DatasetFormatError(f"{path}:{lineno}: {exc}") from None


def load_csv_dataset(path, problem=Problem.LINEAR) -> FunctionalDataset:
    path = Path(path)
    problem = Problem(problem)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetFormatError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2 or header[0].strip() != "y":
        raise DatasetFormatError(f"{path}:1: header must be 'y,t_1,...,t_m'")
    grid = np.array(_parse_floats(header[1:], path, 1))
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise DatasetFormatError(f"{path}:1: grid values must be strictly increasing")
    if grid.size == 1:
        grid = np.zeros(1)
    else:
        grid = (grid - grid[0]) / (grid[-1] - grid[0])
    ys, X = [], []
    for lineno, cells in enumerate(rows[1:], start=2):
        if not cells:
            continue
        if len(cells) != grid.size + 1:
            raise DatasetFormatError(f"{path}:{lineno}: expected {grid.size + 1} fields, got {len(cells)}")
        values = _parse_floats(cells, path, lineno)
        if problem is Problem.LOGISTIC and values[0] not in (0.0, 1.0):
            raise DatasetFormatError(f"{path}:{lineno}: logistic response must be 0 or 1, got {cells[0]}")
        ys.append(values[0])
        X.append(values[1:])
    X = np.array(X, dtype=float).reshape(len(ys), grid.size)
    return FunctionalDataset(grid, X, np.array(ys, dtype=float), problem)


def write_csv_dataset(dataset: FunctionalDataset, path) -> None:
    """Write with ``repr`` floats so a reload reproduces every value exactly."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"] + [repr(float(t)) for t in dataset.grid])
        for yi, xi in zip(dataset.y, dataset.X):
            w.writerow([repr(float(yi))] + [repr(float(v)) for v in xi])


@dataclass
class ScalingState:
    x_factor: np.ndarray  # multiplies each regressor column
    y_factor: float  # multiplies the response (1.0 for logistic)
    target_sd: float

    def apply(self, dataset: FunctionalDataset) -> FunctionalDataset:
        y = dataset.y * self.y_factor if dataset.problem is Problem.LINEAR else dataset.y
        return FunctionalDataset(dataset.grid, dataset.X * self.x_factor, y, dataset.problem)

    def invert_response(self, y_scaled):
        return np.asarray(y_scaled, dtype=float) / self.y_factor

    def forward_response(self, y):
        return np.asarray(y, dtype=float) * self.y_factor


def fit_scaling(train: FunctionalDataset) -> ScalingState:
    """Per-column factors bringing training sd to the target; linear responses to unit sd (no centring)."""
    target = TARGET_SD[train.problem]
    sd = train.X.std(axis=0)
    zero = sd == 0.0
    if zero.any():
        # expected for BM-type trajectories, which are exactly 0 at t = 0
        warnings.warn(f"{int(zero.sum())} zero-variance regressor column(s) left unscaled", ScalingWarning)
    factor = np.where(zero, 1.0, target / np.where(zero, 1.0, sd))
    y_factor = 1.0
    if train.problem is Problem.LINEAR:
        sdy = float(train.y.std())
        if sdy == 0.0:
            warnings.warn("training response has zero variance; leaving it unscaled", ScalingWarning)
        else:
            y_factor = 1.0 / sdy
    return ScalingState(factor, y_factor, target)


def scale_fit_apply(train: FunctionalDataset, test: FunctionalDataset):
    state = fit_scaling(train)
    return state.apply(train), state.apply(test), state
