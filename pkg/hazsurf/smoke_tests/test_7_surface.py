# smoke_tests/test_7_surface.py
"""
Smoke Test 7: Surfaces, masking, cumulation, slices and point predictions

python -m hazsurf.smoke_tests.test_7_surface
"""

import dataclasses
import sys

import numpy as np
import pytest

from ..core.config import SurfaceConfig
from ..core.errors import InvalidGridError, SchemaError
from ..models import SurfaceGrid
from ..services.basis_service import bspline_basis
from ..services.binning_service import bin_records, make_grid
from ..services.estimator_service import fit_at_rho
from ..services.surface_service import (
    SurfaceService,
    cumulate,
    evaluate_surface,
    mask_surface,
    predict_rows,
    slices,
    to_ts_plane,
)
from . import random_binned, run_tests, simulate_records, unit_spec


def _model(seed: int = 3):
    return fit_at_rho(random_binned(seed), unit_spec(nseg=3), 0.0, 0.5)


def _covariate_model():
    grid = make_grid(0.0, 10.0, 1.0, 0.0, 5.0, 0.5)
    binned = bin_records(simulate_records(300, seed=21, covariate_effect=0.6), grid, covariate_names=["x"])
    return fit_at_rho(binned, unit_spec(nseg=3, has_covariates=True, grid=grid), 1.0, 1.0)


def _flat_surface(u, s, hazard=2.0):
    shape = (len(u), len(s))
    return SurfaceGrid(
        u_values=np.asarray(u, dtype=float), s_values=np.asarray(s, dtype=float),
        loghazard=np.full(shape, np.log(hazard)), hazard=np.full(shape, hazard),
        se_loghazard=np.full(shape, 0.1), se_hazard=np.full(shape, 0.1 * hazard),
    )


def test_midpoint_surface_matches_fitted_eta():
    model = _model()
    surface = evaluate_surface(model, model.grid.midpoints_u, model.grid.midpoints_s)
    np.testing.assert_allclose(surface.loghazard, model.eta, atol=1e-12)
    np.testing.assert_allclose(surface.se_hazard, surface.hazard * surface.se_loghazard)


def test_zero_coefficients_give_unit_hazard():
    model = _model()
    zero = dataclasses.replace(model, A=np.zeros_like(model.A))
    surface = evaluate_surface(zero, [0.1, 0.5], [0.2, 0.7, 0.9])
    np.testing.assert_allclose(surface.hazard, 1.0)


def test_standard_errors_match_tensor_rows():
    model = _model(4)
    u, s = np.array([0.05, 0.4, 0.93]), np.array([0.0, 0.33, 1.0])
    surface = evaluate_surface(model, u, s)
    Bu = bspline_basis(model.spec.basis_u, u)
    Bs = bspline_basis(model.spec.basis_s, s)
    k = model.c_u * model.c_s
    for i in range(3):
        for j in range(3):
            x = np.kron(Bs[j], Bu[i])
            assert surface.se_loghazard[i, j] == pytest.approx(np.sqrt(x @ model.V[:k, :k] @ x), rel=1e-9)


def test_ts_plane_and_triangle_mask():
    surface = _flat_surface([0.0, 0.5, 1.0], [0.0, 0.5, 1.0])
    ts = to_ts_plane(surface, t_max=1.0)
    assert ts.plane == "ts"
    np.testing.assert_allclose(ts.t, [[0.0, 0.5, 1.0], [0.5, 1.0, 1.5], [1.0, 1.5, 2.0]])
    assert int(ts.present.sum()) == 6
    np.testing.assert_allclose(ts.hazard, surface.hazard)
    with pytest.raises(InvalidGridError):
        to_ts_plane(ts)


def test_cut_extrapolated_uses_data_support():
    surface = _flat_surface([0.5, 1.5], [0.0, 0.5, 1.0])
    with pytest.raises(InvalidGridError):
        mask_surface(surface, cut_extrapolated=True)
    surface.support_edges_u = np.array([0.0, 1.0, 2.0])
    surface.support_s = np.array([0.5, np.nan])
    masked = mask_surface(surface, cut_extrapolated=True)
    np.testing.assert_array_equal(masked.present, [[True, True, False], [False, False, False]])
    assert surface.present.all()


def test_cumulate_constant_hazard():
    s = np.round(np.arange(11) * 0.1, 10)
    surface = cumulate(_flat_surface([0.0, 1.0], s, hazard=2.0))
    np.testing.assert_allclose(surface.cumhazard[0], 0.2 * np.arange(1, 12), atol=1e-12)
    np.testing.assert_allclose(surface.survival, np.exp(-surface.cumhazard))
    np.testing.assert_allclose(surface.cumhazard[0], surface.cumhazard[1])


def test_cumulate_grid_checks():
    with pytest.raises(InvalidGridError):
        cumulate(_flat_surface([0.0], [0.0, 0.1, 0.3]))
    with pytest.raises(InvalidGridError):
        cumulate(_flat_surface([0.0], [0.0, 0.1, 0.2]), ds=0.5)
    model = _model()
    with pytest.raises(InvalidGridError):
        cumulate(model, [0.5], [0.1, 0.2, 0.3])
    with pytest.raises(InvalidGridError):
        cumulate(model)


def test_cumulation_error_halves_with_step():
    model = _model(5)
    totals = []
    for ds in (0.1, 0.05, 0.025):
        n = int(round(1.0 / ds))
        s = ds * np.arange(n + 1)
        totals.append(cumulate(model, [0.5], s, ds=ds).cumhazard[0, -1])
    ratio = abs(totals[2] - totals[1]) / abs(totals[1] - totals[0])
    assert 0.4 < ratio < 0.6


def test_slices_on_grid_lines_and_between():
    model = _model(6)
    u = np.linspace(0.0, 1.0, 5)
    s = np.linspace(0.0, 1.0, 6)
    surface = evaluate_surface(model, u, s)

    [on_line] = slices(surface, "u", [0.5])
    np.testing.assert_allclose(on_line.hazard, surface.hazard[2])
    np.testing.assert_allclose(on_line.free_values, s)
    assert not on_line.interpolated
    assert np.all(on_line.lower < on_line.hazard) and np.all(on_line.hazard < on_line.upper)

    [exact] = slices(surface, "s", [0.3], model=model)
    np.testing.assert_allclose(exact.hazard, evaluate_surface(model, u, [0.3]).hazard[:, 0])

    [approx] = slices(surface, "s", [0.3])
    assert approx.interpolated

    [linear] = slices(surface, "u", [0.25], band="linear")
    np.testing.assert_allclose(linear.upper - linear.hazard, linear.hazard - linear.lower)
    assert list(linear.to_frame().columns) == ["u", "s", "hazard", "se_hazard", "lower", "upper"]


def test_slice_errors():
    surface = _flat_surface([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(InvalidGridError):
        slices(surface, "u", [1.5])
    with pytest.raises(InvalidGridError):
        slices(surface, "t", [0.5])
    with pytest.raises(InvalidGridError):
        slices(surface, "u", [0.5], band="wide")


def test_predict_baseline_and_proportional_hazards():
    model = _covariate_model()
    rows = [{"u": 2.5, "s": 1.0, "x": 0.0}, {"u": 2.5, "s": 1.0, "x": 1.0}]
    base, treated = predict_rows(model, rows)
    expected = evaluate_surface(model, [2.5], [1.0]).hazard[0, 0]
    assert base.hazard == pytest.approx(expected, rel=1e-10)
    assert base.basehazard == pytest.approx(base.hazard)
    assert treated.hazard / base.hazard == pytest.approx(np.exp(model.beta[0]), rel=1e-10)
    assert treated.cumhazard / base.cumhazard == pytest.approx(np.exp(model.beta[0]), rel=1e-10)
    assert treated.survival == pytest.approx(np.exp(-treated.cumhazard))


def test_predicted_cumhazard_matches_cumulated_surface():
    model = _model(7)
    s_grid = 0.1 * np.arange(11)
    surface = cumulate(model, [0.35], s_grid, ds=0.1)
    rows = [{"u": 0.35, "s": float(v)} for v in (0.0, 0.3, 0.7, 1.0)]
    predicted = predict_rows(model, rows, ds=0.1)
    np.testing.assert_allclose([p.cumhazard for p in predicted], surface.cumhazard[0, [0, 3, 7, 10]], rtol=1e-10)


def test_predict_errors_and_empty_input():
    model = _covariate_model()
    assert predict_rows(model, []) == []
    with pytest.raises(SchemaError):
        predict_rows(model, [{"u": 1.0, "s": 1.0, "x": 0.0, "age": 50.0}])
    with pytest.raises(SchemaError):
        predict_rows(model, [{"u": 1.0, "s": 1.0}])
    with pytest.raises(InvalidGridError):
        predict_rows(model, [{"u": 1.0, "s": 1.0, "x": 0.0}], ds=0.0)


def test_service_grids_and_surfaces():
    model = _model(8)
    u, s = SurfaceService().plot_grid(model)
    np.testing.assert_allclose(u, model.grid.midpoints_u)
    service = SurfaceService(SurfaceConfig(du=0.25, ds=0.1, t_max=1.0, slice_direction="u", slice_at=[0.5]))
    u, s = service.plot_grid(model)
    np.testing.assert_allclose(u, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert len(s) == 11
    surface = service.surfaces(model)
    assert surface.cumhazard is not None
    assert not surface.present[-1, -1] and surface.present[0, 0]
    assert list(service.slice_set(model, surface)) == ["u"]
    assert SurfaceService().slice_set(model, surface) == {}


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_") and callable(v)]
    return run_tests("Surfaces and predictions", tests)


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
