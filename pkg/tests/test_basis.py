"""Spline and design-matrix construction for pooled hazard models."""

import numpy as np
import pandas as pd
import pytest

from dtreval import DayDummies, NaturalCubicSpline, spline_from_quantiles
from dtreval.basis import regime_time_design


def test_spline_full_rank_with_intercept():
    days = np.arange(0, 11)
    spline = spline_from_quantiles(days, 3, (0.0, 10.0))
    X = np.column_stack([np.ones(len(days)), spline.evaluate(days)])
    assert np.linalg.matrix_rank(X) == X.shape[1]
    assert len(spline.column_names()) == spline.n_basis


def test_spline_linear_tails():
    # Natural cubic splines are linear beyond the boundary knots: second
    # differences vanish outside [0, 10].
    spline = NaturalCubicSpline(knots=(2.0, 5.0, 8.0), boundary=(0.0, 10.0))
    right = np.array([11.0, 12.0, 13.0, 14.0])
    vals = spline.evaluate(right)
    second = np.diff(vals, n=2, axis=0)
    assert np.max(np.abs(second)) < 1e-9


def test_day_dummies_drop_reference():
    basis = DayDummies(horizon=4)
    X = basis.evaluate(np.array([1, 2, 3, 4, 2]))
    assert X.shape == (5, 3)  # reference day contributes no column
    assert X[0].tolist() == [0, 0, 0]
    assert X[4].tolist() == [1, 0, 0]
    assert basis.column_names() == ["day2", "day3", "day4"]


def test_saturated_design_orthogonal_cells():
    rids = np.array(["a", "a", "b", "b", "b"])
    days = np.array([1, 2, 1, 1, 2])
    X, names = regime_time_design(rids, days, ("a", "b"), time_basis=None, saturated=True)
    assert X.shape == (5, 4)
    # Each row lies in exactly one cell.
    assert (X.sum(axis=1) == 1).all()
    assert (X.T @ X == np.diag(np.diag(X.T @ X))).all()
    assert names == ["cell[a,1]", "cell[a,2]", "cell[b,1]", "cell[b,2]"]


def test_saturated_design_v_interactions_stay_orthogonal():
    rids = np.array(["a", "a", "b", "b"])
    days = np.array([1, 2, 1, 2])
    v = pd.DataFrame({"frail": [1.0, 0.0, 1.0, 1.0]})
    X, names = regime_time_design(rids, days, ("a", "b"), None, v_frame=v, saturated=True)
    assert X.shape == (4, 8)
    assert names[:2] == ["cell[a,1]", "cell[a,1]:frail"]
    # V columns are nonzero only inside their own cell.
    for j, name in enumerate(names):
        if ":frail" in name:
            cell = names.index(name.split(":")[0])
            assert (np.abs(X[:, j]) <= X[:, cell]).all()


def test_unsaturated_design_names_and_rank():
    rids = np.repeat(["a", "b", "c"], 11)
    days = np.tile(np.arange(11), 3)
    spline = spline_from_quantiles(np.arange(11), 3, (0.0, 10.0))
    X, names = regime_time_design(rids, days, ("a", "b", "c"), spline)
    assert names[0] == "intercept"
    assert "regime[b]" in names and "regime[c]" in names
    assert "regime[a]" not in names  # first regime is the reference level
    assert np.linalg.matrix_rank(X) == X.shape[1]
