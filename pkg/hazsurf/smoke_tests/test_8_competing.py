# smoke_tests/test_8_competing.py
"""
Smoke Test 8: Competing risks, cumulative incidence and bootstrap bands

python -m hazsurf.smoke_tests.test_8_competing
"""

import sys

import numpy as np
import pytest

from ..core.config import BootstrapConfig
from ..core.entities import IndividualRecord
from ..core.errors import AlignmentError, BootstrapError, InvalidSpecError
from ..models import CauseSurface, SurfaceGrid
from ..services.binning_service import bin_records, make_grid
from ..services.competing_service import (
    CompetingService,
    bootstrap_cif,
    check_dropped,
    cuminc,
    draw_indices,
    overall_survival,
    prepare_bootstrap,
)
from ..services.estimator_service import fit_at_rho
from . import run_tests, unit_spec


def _constant(cause: str, hazard: float, s, u=(0.0, 1.0)) -> CauseSurface:
    shape = (len(u), len(s))
    with np.errstate(divide="ignore"):
        log = np.full(shape, np.log(hazard))
    return CauseSurface(cause, SurfaceGrid(
        u_values=np.asarray(u, dtype=float), s_values=np.asarray(s, dtype=float),
        loghazard=log, hazard=np.full(shape, hazard),
        se_loghazard=np.zeros(shape), se_hazard=np.zeros(shape),
    ))


def _competing_records(n: int, seed: int):
    """Same individuals twice, once per cause, with that cause's event indicator"""
    rng = np.random.default_rng(seed)
    by_cause = {"relapse": [], "death": []}
    for _ in range(n):
        u = float(rng.uniform(0.0, 10.0))
        t1 = rng.exponential(1 / 0.15)
        t2 = rng.exponential(1 / 0.10)
        t = float(min(t1, t2, 5.0))
        by_cause["relapse"].append(IndividualRecord(u=u, s_out=t, event=int(t1 < min(t2, 5.0))))
        by_cause["death"].append(IndividualRecord(u=u, s_out=t, event=int(t2 < min(t1, 5.0))))
    return by_cause


def _covariate_setting(n: int = 300, seed: int = 3):
    """Relapse hazard multiplied by e when x = 1; both causes modelled with x"""
    rng = np.random.default_rng(seed)
    records = {"relapse": [], "death": []}
    for _ in range(n):
        u = float(rng.uniform(0.0, 10.0))
        x = float(rng.integers(0, 2))
        t1 = rng.exponential(1 / (0.15 * np.exp(1.0 * x)))
        t2 = rng.exponential(1 / 0.10)
        t = float(min(t1, t2, 5.0))
        records["relapse"].append(IndividualRecord(u=u, s_out=t, event=int(t1 < min(t2, 5.0)), covariates={"x": x}))
        records["death"].append(IndividualRecord(u=u, s_out=t, event=int(t2 < min(t1, 5.0)), covariates={"x": x}))
    grid = make_grid(0.0, 10.0, 2.0, 0.0, 5.0, 1.0)
    spec = unit_spec(nseg=2, bdeg=2, has_covariates=True, grid=grid)
    models = {
        c: fit_at_rho(bin_records(recs, grid, individual=True, covariate_names=["x"]), spec, 1.0, 1.0)
        for c, recs in records.items()
    }
    return records, grid, models, grid.midpoints_u, 0.5 * np.arange(11)


def _setting(n: int = 300, seed: int = 1):
    records = _competing_records(n, seed)
    grid = make_grid(0.0, 10.0, 2.0, 0.0, 5.0, 1.0)
    spec = unit_spec(nseg=2, bdeg=2, grid=grid)
    specs = {c: spec for c in records}
    rhos = {c: (1.0, 1.0) for c in records}
    u_grid = grid.midpoints_u
    s_grid = 0.5 * np.arange(11)
    return records, grid, specs, rhos, u_grid, s_grid


def test_constant_hazards_closed_form():
    ds = 0.1
    s = ds * np.arange(11)
    result = cuminc([_constant("a", 0.2, s), _constant("b", 0.3, s)])
    q = np.exp(-0.5 * ds)
    j = np.arange(11)
    np.testing.assert_allclose(result.cif["a"][0], 0.2 * ds * (1 - q ** (j + 1)) / (1 - q), rtol=1e-12)
    np.testing.assert_allclose(result.cif["b"][1], 0.3 * ds * (1 - q ** (j + 1)) / (1 - q), rtol=1e-12)
    np.testing.assert_allclose(result.survival[0], np.exp(-0.5 * ds * (j + 1)), rtol=1e-12)
    np.testing.assert_allclose(result.cif["a"][:, 0], 0.2 * ds)


def test_matches_continuous_closed_form_within_two_steps():
    ds = 0.01
    s = ds * np.arange(301)
    result = cuminc([_constant("a", 0.2, s), _constant("b", 0.3, s)])
    exact = 0.2 / 0.5 * (1.0 - np.exp(-0.5 * s))
    assert np.max(np.abs(result.cif["a"][0] - exact)) <= 2 * ds
    total = result.cif["a"] + result.cif["b"] + result.survival
    assert np.max(np.abs(total - 1.0)) <= 2 * ds


def test_incidence_and_survival_nearly_sum_to_one():
    s = 0.01 * np.arange(101)
    result = cuminc([_constant("a", 0.2, s), _constant("b", 0.3, s)])
    total = result.cif["a"] + result.cif["b"] + result.survival
    assert np.max(np.abs(total - 1.0)) < 5e-3
    for cif in result.cif.values():
        assert np.all(np.diff(cif, axis=1) >= 0) and np.all((cif >= 0) & (cif <= 1))
    np.testing.assert_allclose(overall_survival([_constant("a", 0.2, s), _constant("b", 0.3, s)]),
                               result.survival)


def test_zero_hazard_cause_has_zero_incidence():
    s = 0.1 * np.arange(6)
    result = cuminc([_constant("none", 0.0, s), _constant("b", 0.3, s)])
    np.testing.assert_array_equal(result.cif["none"], 0.0)


def test_cause_order_is_kept():
    s = 0.1 * np.arange(6)
    ab = cuminc([_constant("a", 0.2, s), _constant("b", 0.3, s)])
    ba = cuminc([_constant("b", 0.3, s), _constant("a", 0.2, s)])
    assert ab.causes == ["a", "b"] and ba.causes == ["b", "a"]
    np.testing.assert_allclose(ab.cif["a"], ba.cif["a"])


def test_alignment_errors():
    s = 0.1 * np.arange(6)
    with pytest.raises(AlignmentError):
        cuminc([])
    with pytest.raises(AlignmentError):
        cuminc([_constant("a", 0.2, s), _constant("a", 0.3, s)])
    with pytest.raises(AlignmentError):
        cuminc([_constant("a", 0.2, s), _constant("b", 0.3, 0.2 * np.arange(6))])
    with pytest.raises(AlignmentError):
        cuminc([_constant("a", 0.2, [0.0]), _constant("b", 0.3, [0.0])])
    with pytest.raises(AlignmentError):
        cuminc([_constant("a", 0.2, s)], ds=0.5)
    single = cuminc([_constant("a", 0.2, [0.0]), _constant("b", 0.3, [0.0])], ds=0.1)
    assert single.cif["a"][0, 0] == pytest.approx(0.02)


def test_service_needs_two_aligned_models():
    records, grid, specs, rhos, u_grid, s_grid = _setting(200)
    one = {"relapse": fit_at_rho(bin_records(records["relapse"], grid), specs["relapse"], 1.0, 1.0)}
    with pytest.raises(AlignmentError):
        CompetingService().cif(one, u_grid, s_grid)

    other_grid = make_grid(0.0, 10.0, 1.0, 0.0, 5.0, 1.0)
    models = dict(one)
    models["death"] = fit_at_rho(bin_records(records["death"], other_grid), unit_spec(2, 2, grid=other_grid), 1.0, 1.0)
    with pytest.raises(AlignmentError):
        CompetingService().cif(models, u_grid, s_grid)

    models["death"] = fit_at_rho(bin_records(records["death"], grid), specs["death"], 1.0, 1.0)
    result = CompetingService().cif(models, u_grid, s_grid)
    assert result.causes == ["relapse", "death"]
    assert result.cif["relapse"].shape == (len(u_grid), len(s_grid))


def test_draw_indices_deterministic():
    a = draw_indices(50, 5, seed=3)
    b = draw_indices(50, 5, seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert all(x.min() >= 0 and x.max() < 50 for x in a)


def test_bootstrap_is_reproducible_with_seed():
    records, grid, specs, rhos, u_grid, s_grid = _setting(150)
    a = bootstrap_cif(records, grid, specs, rhos, u_grid, s_grid, n_reps=5, seed=11)
    b = bootstrap_cif(records, grid, specs, rhos, u_grid, s_grid, n_reps=5, seed=11)
    for cause in a.causes:
        np.testing.assert_array_equal(a.lower[cause], b.lower[cause])
        np.testing.assert_array_equal(a.upper[cause], b.upper[cause])
    assert a.metadata["seed"] == 11 and a.metadata["band"] == "percentile"
    assert a.n_reps == 5 and a.n_dropped == 0 and a.has_bands


def test_identity_resampler_gives_zero_width():
    records, grid, specs, rhos, u_grid, s_grid = _setting(150)
    result = bootstrap_cif(records, grid, specs, rhos, u_grid, s_grid, n_reps=3,
                           resampler=lambda rep, n: np.arange(n))
    for cause in result.causes:
        np.testing.assert_allclose(result.lower[cause], result.cif[cause], atol=1e-12)
        np.testing.assert_allclose(result.upper[cause], result.cif[cause], atol=1e-12)


def test_bands_bracket_the_point_estimate():
    records, grid, specs, rhos, u_grid, s_grid = _setting(300, seed=5)
    result = bootstrap_cif(records, grid, specs, rhos, u_grid, s_grid, n_reps=100, seed=2)
    for cause in result.causes:
        lower, upper, point = result.lower[cause], result.upper[cause], result.cif[cause]
        assert np.all(lower <= upper)
        inside = (point >= lower - 1e-12) & (point <= upper + 1e-12)
        assert inside.mean() > 0.9
        assert np.all(upper[:, -1] - lower[:, -1] > 0)


def test_bands_cover_the_true_incidence():
    records = _competing_records(400, seed=13)
    grid = make_grid(0.0, 10.0, 2.0, 0.0, 5.0, 1.0)
    spec = unit_spec(nseg=2, bdeg=2, grid=grid)
    specs = {c: spec for c in records}
    rhos = {c: (3.0, 3.0) for c in records}
    ds = 0.05
    s_grid = ds * np.arange(81)
    result = bootstrap_cif(records, grid, specs, rhos, grid.midpoints_u, s_grid, n_reps=200, seed=4)
    total = 0.25
    for cause, rate in (("relapse", 0.15), ("death", 0.10)):
        truth = rate / total * (1.0 - np.exp(-total * (s_grid + ds)))
        covered = (result.lower[cause] <= truth) & (truth <= result.upper[cause])
        assert covered.mean() >= 0.9, f"{cause}: {covered.mean():.2f}"


def test_bootstrap_point_is_the_model_cif_with_covariates():
    records, grid, models, u_grid, s_grid = _covariate_setting()
    service = CompetingService(BootstrapConfig(n_reps=3))
    result = service.bootstrap(records, models, u_grid, s_grid, seed=1, covariates=["x"])
    expected = service.cif(models, u_grid, s_grid)
    for cause in expected.causes:
        np.testing.assert_array_equal(result.cif[cause], expected.cif[cause])
    np.testing.assert_array_equal(result.survival, expected.survival)


def test_covariate_refits_are_centred_on_the_model():
    records, grid, models, u_grid, s_grid = _covariate_setting()
    specs = {c: m.spec for c, m in models.items()}
    rhos = {c: (m.log10_rho_u, m.log10_rho_s) for c, m in models.items()}
    result = bootstrap_cif(records, grid, specs, rhos, u_grid, s_grid, n_reps=2,
                           resampler=lambda rep, n: np.arange(n), covariates=["x"], models=models)
    for cause in result.causes:
        np.testing.assert_allclose(result.lower[cause], result.cif[cause], rtol=0, atol=1e-8)
        np.testing.assert_allclose(result.upper[cause], result.cif[cause], rtol=0, atol=1e-8)


def test_covariate_models_need_matching_columns():
    records, grid, models, u_grid, s_grid = _covariate_setting(100)
    specs = {c: m.spec for c, m in models.items()}
    rhos = {c: (1.0, 1.0) for c in models}
    with pytest.raises(AlignmentError):
        bootstrap_cif(records, grid, specs, rhos, u_grid, s_grid, n_reps=2, models=models)
    with pytest.raises(AlignmentError):
        bootstrap_cif(records, grid, specs, rhos, u_grid, s_grid, n_reps=2,
                      covariates=["x"], factors=["x"], models=models)


def test_bootstrap_argument_checks():
    records, grid, specs, rhos, *_ = _setting(50)
    with pytest.raises(InvalidSpecError):
        prepare_bootstrap(records, specs, rhos, n_reps=1)
    uneven = {"relapse": records["relapse"], "death": records["death"][:-1]}
    with pytest.raises(AlignmentError):
        prepare_bootstrap(uneven, specs, rhos, n_reps=10)
    with pytest.raises(AlignmentError):
        prepare_bootstrap(records, {"relapse": specs["relapse"]}, rhos, n_reps=10)


def test_dropped_replicate_limit():
    check_dropped(1, 10, 0.10)
    with pytest.raises(BootstrapError):
        check_dropped(2, 10, 0.10)


def test_service_bootstrap_uses_config():
    records, grid, specs, rhos, u_grid, s_grid = _setting(150)
    models = {c: fit_at_rho(bin_records(records[c], grid), specs[c], 1.0, 1.0) for c in records}
    service = CompetingService(BootstrapConfig(n_reps=4, level=0.8))
    result = service.bootstrap(records, models, u_grid, s_grid, seed=7)
    assert result.level == 0.8 and result.n_reps == 4


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_") and callable(v)]
    return run_tests("Competing risks", tests)


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
