# smoke_tests/test_5_selection.py
"""
Smoke Test 5: Smoothing-parameter selection (grid search and Nelder-Mead)

python -m hazsurf.smoke_tests.test_5_selection
"""

import sys
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from ..core.config import Criterion, SelectionConfig, SelectionMethod
from ..core.errors import ConvergenceError, SearchError
from ..services.estimator_service import fit_at_rho
from ..services.selection_service import (
    SelectionService,
    grid_points,
    select_rho_grid,
    select_rho_numeric,
)
from . import random_binned, run_tests, unit_spec


def _quadratic_fit_fn(center=(1.3, -0.7), floor=5.0):
    def fit(lu, ls):
        value = (lu - center[0]) ** 2 + 2.0 * (ls - center[1]) ** 2 + floor
        return SimpleNamespace(
            aic=value, bic=value + 1.0, ed=3.0, deviance=value - 6.0,
            log10_rho_u=lu, log10_rho_s=ls, warnings=[],
        )
    return fit


def test_grid_points_order():
    assert grid_points([0, 1], [5, 6, 7]) == [
        (0.0, 5.0), (0.0, 6.0), (0.0, 7.0), (1.0, 5.0), (1.0, 6.0), (1.0, 7.0),
    ]
    with pytest.raises(SearchError):
        grid_points([], [1.0])


def test_singleton_grid_returns_that_fit():
    binned = random_binned(4)
    spec = unit_spec(nseg=3)
    model = select_rho_grid(binned, spec, [0.5], [1.0])
    direct = fit_at_rho(binned, spec, 0.5, 1.0)
    assert (model.log10_rho_u, model.log10_rho_s) == (0.5, 1.0)
    assert model.aic == pytest.approx(direct.aic, rel=1e-12)
    assert model.selection.n_evaluations == 1


def test_grid_table_is_reproducible_and_minimal():
    binned = random_binned(5)
    spec = unit_spec(nseg=3)
    a = select_rho_grid(binned, spec, [-1.0, 1.0, 3.0], [0.0, 2.0], criterion="bic")
    b = select_rho_grid(binned, spec, [-1.0, 1.0, 3.0], [0.0, 2.0], criterion="bic")
    pd.testing.assert_frame_equal(a.selection.to_frame(), b.selection.to_frame())
    table = a.selection.to_frame()
    assert len(table) == 6
    assert a.bic == pytest.approx(table["bic"].min())


def test_grid_ties_keep_first_point():
    def flat(lu, ls):
        return SimpleNamespace(aic=1.0, bic=1.0, ed=1.0, deviance=1.0, log10_rho_u=lu, log10_rho_s=ls)
    model = select_rho_grid(None, None, [2.0, 1.0], [4.0, 3.0], fit_fn=flat)
    assert (model.log10_rho_u, model.log10_rho_s) == (2.0, 4.0)


def test_grid_records_failed_points():
    inner = _quadratic_fit_fn()

    def sometimes(lu, ls):
        if lu > 2:
            raise ConvergenceError("forced", last_deviance=1.0, iterations=3)
        return inner(lu, ls)

    model = select_rho_grid(None, None, [1.0, 3.0], [-1.0], fit_fn=sometimes)
    table = model.selection.to_frame()
    assert table["error"].tolist()[0] == ""
    assert "forced" in table["error"].tolist()[1]
    assert np.isnan(table["aic"].iloc[1])


def test_all_failures_raise_search_error():
    def never(lu, ls):
        raise ConvergenceError("forced", iterations=1)
    with pytest.raises(SearchError):
        select_rho_grid(None, None, [0.0, 1.0], [0.0], fit_fn=never)
    with pytest.raises(SearchError):
        select_rho_numeric(None, None, [0.0, 0.0], fit_fn=never)


def test_numeric_finds_quadratic_minimum():
    model = select_rho_numeric(None, None, [0.0, 0.0], fit_fn=_quadratic_fit_fn())
    assert model.log10_rho_u == pytest.approx(1.3, abs=1e-2)
    assert model.log10_rho_s == pytest.approx(-0.7, abs=1e-2)
    assert model.selection.converged
    assert not getattr(model, "optimizer_capped", False)


def test_numeric_uses_requested_criterion():
    model = select_rho_numeric(None, None, [0.0, 0.0], criterion="bic", fit_fn=_quadratic_fit_fn())
    assert model.bic == pytest.approx(6.0, abs=1e-3)
    assert model.selection.criterion == "bic"


def test_numeric_cap_returns_best_with_warning():
    model = select_rho_numeric(None, None, [0.0, 0.0], max_evaluations=5, fit_fn=_quadratic_fit_fn())
    assert model.optimizer_capped
    assert model.warnings and "without converging" in model.warnings[-1]
    table = model.selection.to_frame()
    assert model.aic == pytest.approx(table["aic"].min())


def test_numeric_rejects_bad_start():
    with pytest.raises(SearchError):
        select_rho_numeric(None, None, [0.0], fit_fn=_quadratic_fit_fn())
    with pytest.raises(SearchError):
        select_rho_numeric(None, None, [0.0, np.nan], fit_fn=_quadratic_fit_fn())


def test_numeric_on_data_beats_its_start():
    binned = random_binned(9, n_u=8, n_s=8)
    spec = unit_spec(nseg=3)
    model = select_rho_numeric(binned, spec, [2.0, 2.0])
    start = fit_at_rho(binned, spec, 2.0, 2.0)
    assert model.aic <= start.aic + 1e-9
    assert model.selection.method == "numeric"


def test_service_dispatches_on_method():
    binned = random_binned(10)
    spec = unit_spec(nseg=3)
    grid_cfg = SelectionConfig(method=SelectionMethod.GRID, criterion=Criterion.BIC,
                               grid_u=[0.0, 1.0], grid_s=[0.0])
    model = SelectionService(grid_cfg).select(binned, spec)
    assert model.selection.method == "grid"
    assert model.selection.n_evaluations == 2

    numeric_cfg = SelectionConfig(start=[1.0, 1.0], max_evaluations=30)
    model = SelectionService(numeric_cfg).select(binned, spec)
    assert model.selection.method == "numeric"
    assert model.selection.n_evaluations <= 35


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_") and callable(v)]
    return run_tests("Smoothing selection", tests)


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
