# hazsurf/services/selection_service.py
"""Choice of the smoothing parameters by grid search or Nelder-Mead on AIC / BIC"""

import itertools
import logging
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from ..core.config import SelectionConfig, SelectionMethod
from ..core.entities import BinnedData, ModelSpec
from ..core.errors import FitError, SearchError
from ..models import FittedModel, SelectionTrace
from .estimator_service import MAX_ITER, fit_at_rho

logger = logging.getLogger(__name__)

# fit_fn(log10_rho_u, log10_rho_s) -> fitted model
FitFn = Callable[[float, float], Any]


def _criterion_value(model: Any, criterion: str) -> float:
    value = float(getattr(model, criterion))
    return value if np.isfinite(value) else np.inf


def _default_fit_fn(binned: BinnedData, spec: ModelSpec, bic_sample_size: str,
                    max_iter: int) -> FitFn:
    def fit(log10_rho_u: float, log10_rho_s: float) -> FittedModel:
        return fit_at_rho(binned, spec, log10_rho_u, log10_rho_s,
                          bic_sample_size=bic_sample_size, max_iter=max_iter)
    return fit


def grid_points(grid_u: Sequence[float], grid_s: Sequence[float]) -> List[Tuple[float, float]]:
    """All (log10 rho_u, log10 rho_s) pairs, rho_s varying fastest"""
    if len(grid_u) == 0 or len(grid_s) == 0:
        raise SearchError("smoothing-parameter grids must not be empty")
    return [(float(a), float(b)) for a, b in itertools.product(grid_u, grid_s)]


def reduce_grid(points: Sequence[Tuple[float, float]], outcomes: Sequence[Tuple[Any, Optional[str]]],
                criterion: str) -> Any:
    """
    Pick the best fit among grid outcomes.

    ``outcomes`` holds one (model, error) pair per point, in point order;
    failed points carry model None and are recorded in the table only.
    """
    trace = SelectionTrace(method="grid", criterion=criterion)
    best, best_value = None, np.inf
    for (lu, ls), (model, error) in zip(points, outcomes):
        if model is None:
            trace.add(lu, ls, error=error or "failed")
            continue
        trace.add(lu, ls, model)
        value = _criterion_value(model, criterion)
        if value < best_value:
            best, best_value = model, value

    if best is None:
        raise SearchError(f"all {len(points)} smoothing-parameter candidates failed")
    best.selection = trace
    logger.info(
        f"Grid search: {criterion} {best_value:.7g} at log10 rho = "
        f"({best.log10_rho_u:.4g}, {best.log10_rho_s:.4g})"
    )
    return best


def evaluate_point(fit_fn: FitFn, log10_rho_u: float, log10_rho_s: float) -> Tuple[Any, Optional[str]]:
    try:
        return fit_fn(log10_rho_u, log10_rho_s), None
    except FitError as e:
        logger.debug(f"Fit failed at ({log10_rho_u}, {log10_rho_s}): {e}")
        return None, str(e)


def select_rho_grid(binned: BinnedData, spec: ModelSpec, grid_u: Sequence[float],
                    grid_s: Sequence[float], criterion: str = "aic",
                    bic_sample_size: str = "cells", max_iter: int = MAX_ITER,
                    fit_fn: Optional[FitFn] = None) -> FittedModel:
    """Fit at every pair of the two grids and keep the one minimizing the criterion"""
    fit_fn = fit_fn or _default_fit_fn(binned, spec, bic_sample_size, max_iter)
    points = grid_points(grid_u, grid_s)
    outcomes = [evaluate_point(fit_fn, lu, ls) for lu, ls in points]
    return reduce_grid(points, outcomes, criterion)


def select_rho_numeric(binned: BinnedData, spec: ModelSpec, start: Sequence[float],
                       criterion: str = "aic", bic_sample_size: str = "cells",
                       max_evaluations: int = 200, tolerance: float = 1e-4,
                       max_iter: int = MAX_ITER, fit_fn: Optional[FitFn] = None) -> FittedModel:
    """
    Nelder-Mead over (log10 rho_u, log10 rho_s).

    Failed fits score +inf. The best model seen is returned; when the
    evaluation cap stops the search it carries ``optimizer_capped`` and a
    warning.
    """
    x0 = np.asarray(start, dtype=float)
    if x0.shape != (2,) or not np.all(np.isfinite(x0)):
        raise SearchError(f"start must be two finite log10 values, got {start!r}")

    warm: dict = {"theta": None}
    if fit_fn is None:
        def fit_fn(lu: float, ls: float) -> FittedModel:
            return fit_at_rho(binned, spec, lu, ls, bic_sample_size=bic_sample_size,
                              max_iter=max_iter, theta_start=warm["theta"])

    trace = SelectionTrace(method="numeric", criterion=criterion)
    cache: dict = {}
    best: dict = {"model": None, "value": np.inf}

    def objective(x: np.ndarray) -> float:
        key = (round(float(x[0]), 12), round(float(x[1]), 12))
        if key in cache:
            return cache[key]
        model, error = evaluate_point(fit_fn, key[0], key[1])
        trace.add(key[0], key[1], model, error)
        value = np.inf if model is None else _criterion_value(model, criterion)
        cache[key] = value
        logger.debug(f"{criterion}({key[0]:.5f}, {key[1]:.5f}) = {value:.10g}")
        if value < best["value"]:
            best.update(model=model, value=value)
            if isinstance(model, FittedModel):
                warm["theta"] = model.theta
        return value

    simplex = np.array([x0, x0 + [1.0, 0.0], x0 + [0.0, 1.0]])
    result = optimize.minimize(
        objective, x0, method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": tolerance,
            "fatol": tolerance,
            "maxfev": max_evaluations,
        },
    )

    model = best["model"]
    if model is None:
        raise SearchError(f"every fit failed during the search ({trace.n_evaluations} evaluations)")

    capped = not result.success
    trace.converged = not capped
    model.selection = trace
    if capped:
        message = (
            f"smoothing search stopped after {trace.n_evaluations} evaluations "
            f"without converging; best {criterion} so far returned"
        )
        logger.warning(message)
        model.optimizer_capped = True
        model.warnings = list(getattr(model, "warnings", [])) + [message]
    logger.info(
        f"Numeric search: {criterion} {best['value']:.7g} at log10 rho = "
        f"({model.log10_rho_u:.6g}, {model.log10_rho_s:.6g}) after {trace.n_evaluations} fits"
    )
    return model


class SelectionService:
    """Runs the configured selection method, sequentially or through Prefect"""

    def __init__(self, config: Optional[SelectionConfig] = None):
        self.config = config or SelectionConfig()

    def select(self, binned: BinnedData, spec: ModelSpec) -> FittedModel:
        cfg = self.config
        criterion = cfg.criterion.value
        sample_size = cfg.bic_sample_size.value
        if cfg.method == SelectionMethod.GRID:
            if cfg.concurrent:
                from ..flows.selection_flow import grid_search_flow
                return grid_search_flow(binned, spec, list(cfg.grid_u), list(cfg.grid_s),
                                        criterion, sample_size, cfg.max_iter)
            return select_rho_grid(binned, spec, cfg.grid_u, cfg.grid_s, criterion,
                                   bic_sample_size=sample_size, max_iter=cfg.max_iter)
        return select_rho_numeric(
            binned, spec, cfg.start, criterion,
            bic_sample_size=sample_size,
            max_evaluations=cfg.max_evaluations,
            tolerance=cfg.tolerance,
            max_iter=cfg.max_iter,
        )
