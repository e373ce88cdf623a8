# smoke_tests/test_11_rotterdam.py
"""
Smoke Test 11: Rotterdam breast cancer data

The preparation step is checked on a handful of made-up rows. The full-data
checks need the exported table:

    HAZSURF_ROTTERDAM_CSV=rotterdam.csv python -m hazsurf.smoke_tests.test_11_rotterdam
"""

import functools
import os
import sys

import numpy as np
import pandas as pd
import pytest

from ..core.config import get_rotterdam_competing_config, get_rotterdam_death_config
from ..engine import HazardEngine
from ..real_life_samples.rotterdam.prepare_rotterdam import prepare_rotterdam
from ..services.binning_service import records_from_frame
from ..services.estimator_service import coefficient_se
from ..services.surface_service import evaluate_surface
from . import run_tests

ROTTERDAM_CSV = os.getenv("HAZSURF_ROTTERDAM_CSV")


def _raw() -> pd.DataFrame:
    return pd.DataFrame({
        "pid": [1, 2, 3, 4],
        "age": [50, 61, 45, 70],
        "grade": [2, 3, 3, 2],
        "rtime": [730.5, 1000, 2000, 3000],
        "recur": [1, 0, 0, 0],
        "dtime": [1461, 3000, 2000, 3000],
        "death": [1, 1, 0, 1],
    })


def _full() -> pd.DataFrame:
    if not ROTTERDAM_CSV:
        pytest.skip("HAZSURF_ROTTERDAM_CSV not set")
    return prepare_rotterdam(pd.read_csv(ROTTERDAM_CSV))


def test_preparation_on_small_table():
    d = prepare_rotterdam(_raw())
    assert d["first_event"].tolist() == ["recurrence", "censored", "censored", "death"]
    # recurrence censored before death: death censored at the recurrence time
    assert d.loc[1, "death"] == 0 and d.loc[1, "dtime"] == 1000
    assert d.loc[0, "rtimey"] == pytest.approx(2.0)
    assert d.loc[0, "rage"] == pytest.approx(52.0)
    assert d["first_event_any"].tolist() == [1, 0, 0, 1]
    assert d["event_recurrence"].tolist() == [1, 0, 0, 0]
    assert d["event_death"].tolist() == [0, 0, 0, 1]
    np.testing.assert_allclose(d["fetimey"], np.minimum(d["rtimey"], d["dtimey"]))


def test_preparation_requires_columns():
    with pytest.raises(ValueError):
        prepare_rotterdam(_raw().drop(columns="recur"))


def test_death_binning_summary():
    frame = _full()
    config = get_rotterdam_death_config()
    engine = HazardEngine(config)
    binned = engine.prepare(records_from_frame(frame.astype(str), config.columns))
    assert (binned.grid.n_u, binned.grid.n_s) == (66, 39)
    assert binned.total_events == 1229
    assert binned.total_exposure == pytest.approx(21194.75, abs=0.01)
    assert binned.covariate_names == ["grade_3"]


@functools.lru_cache(maxsize=None)
def _death_fit():
    frame = _full()
    config = get_rotterdam_death_config()
    engine = HazardEngine(config)
    model = engine.fit(engine.prepare(records_from_frame(frame.astype(str), config.columns)))
    return engine, model


@functools.lru_cache(maxsize=None)
def _competing_fits():
    frame = _full()
    config = get_rotterdam_competing_config()
    engine = HazardEngine(config)
    by_cause = {}
    for cause in config.columns.causes:
        config.columns.event = f"event_{cause}"
        by_cause[cause] = engine.fit(engine.prepare(records_from_frame(frame.astype(str), config.columns)))
    return engine, by_cause


def _at(values: np.ndarray, x: float) -> int:
    return int(np.argmin(np.abs(values - x)))


def test_death_fit_matches_published_summary():
    engine, model = _death_fit()
    assert model.c_u == 15 and model.c_s == 10
    assert abs(model.log10_rho_u - 2.580813) < 0.15
    assert abs(model.log10_rho_s - (-0.5666426)) < 0.15
    assert model.beta[0] == pytest.approx(0.5083305, abs=0.01)
    se = coefficient_se(model)
    assert se.se_beta[0] == pytest.approx(0.07134667, abs=0.005)
    table = se.covariates
    assert table.hr[0] == pytest.approx(1.662513, abs=0.02)
    published_beta, published_se = 0.5083305, 0.07134667
    assert table.lower[0] == pytest.approx(np.exp(published_beta - 1.96 * published_se), abs=0.02)
    assert table.upper[0] == pytest.approx(np.exp(published_beta + 1.96 * published_se), abs=0.02)
    # the published interval is the symmetric one, HR ± z se HR
    half = 1.96 * se.se_beta[0] * table.hr[0]
    assert table.hr[0] - half == pytest.approx(1.430028, abs=0.02)
    assert table.hr[0] + half == pytest.approx(1.894998, abs=0.02)
    assert model.ed == pytest.approx(11.57828, abs=0.1)
    assert model.aic == pytest.approx(11001.32, abs=2.0)
    # either sample-size convention may be the published one
    assert min(abs(model.bic_events - 11101.93), abs(model.bic_cells - 11101.93)) <= 2.0
    assert np.all(np.isfinite(engine.surfaces(model).hazard))


def test_predictions_match_published_listing():
    engine, model = _death_fit()
    newdata = pd.DataFrame({
        "age": [40, 50, 60, 40, 50, 60],
        "dtimey": [0.0, 0.0, 0.0, 0.1, 0.1, 0.1],
        "grade_3": [1, 1, 1, 1, 1, 1],
    })
    got = engine.predict(model, newdata)
    expected = {
        "hazard": [0.017, 0.020, 0.025, 0.018, 0.021, 0.026],
        "cumhazard": [0.002, 0.002, 0.002, 0.004, 0.004, 0.005],
        "se_hazard": [0.003] * 6,
        "survival": [0.998, 0.998, 0.998, 0.996, 0.996, 0.995],
        "basehazard": [0.010, 0.012, 0.015, 0.011, 0.013, 0.016],
        "se_basehazard": [0.002] * 6,
    }
    for column, values in expected.items():
        tol = 0.002 if column == "cumhazard" else 0.001
        np.testing.assert_allclose(got[column].round(3), values, atol=tol + 1e-9, err_msg=column)


def test_refined_hazard_surface_shape():
    _, model = _death_fit()
    u = np.arange(24.0, 90.0 + 1e-9, 0.2)
    s = np.arange(0.0, 19.5 + 1e-9, 0.1)
    hazard = evaluate_surface(model, u, s).hazard
    slope = np.diff(hazard, axis=1)
    early = s[1:] <= 4.0
    late = (s[1:] > 6.0) & (s[1:] <= 10.0)
    # rises over the first years since surgery at every age
    for age in (30.0, 40.0, 50.0, 60.0, 70.0):
        assert slope[_at(u, age), early].mean() > 0.0
    # declines afterwards before age 50 only
    for age in (30.0, 40.0, 45.0):
        assert slope[_at(u, age), late].mean() < 0.0
    for age in (55.0, 60.0, 65.0):
        assert slope[_at(u, age), late].mean() >= 0.0


def test_competing_first_events():
    frame = _full()
    counts = frame["first_event"].value_counts()
    assert set(counts.index) <= {"recurrence", "death", "censored"}
    engine, by_cause = _competing_fits()
    cif = engine.cif(by_cause)
    total = cif.cif["recurrence"] + cif.cif["death"] + cif.survival
    assert np.all(total <= 1.0 + 1e-2)
    assert np.all(np.diff(cif.cif["death"], axis=1) >= -1e-12)


def test_refined_cumulative_incidence_shape():
    engine, by_cause = _competing_fits()
    cif = engine.cif(by_cause)
    u, s = cif.u_values, cif.s_values
    assert np.allclose(np.diff(u), 0.2) and np.allclose(np.diff(s), 0.1)
    j = _at(s, 10.0)
    young, old = _at(u, 40.0), _at(u, 65.0)
    death, recurrence = cif.cif["death"], cif.cif["recurrence"]
    # death without recurrence accumulates faster from age 50 on
    assert np.diff(death[old, : j + 1]).mean() > np.diff(death[young, : j + 1]).mean()
    assert death[old, j] > death[young, j]
    # recurrence changes less across age than death does
    assert abs(recurrence[old, j] - recurrence[young, j]) < death[old, j] - death[young, j]


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_") and callable(v)]
    return run_tests("Rotterdam data", tests)


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
