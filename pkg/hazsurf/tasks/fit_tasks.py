# hazsurf/tasks/fit_tasks.py
"""Fitting tasks using Prefect"""

from typing import Any, Optional, Tuple

from prefect import get_run_logger, task
from prefect.cache_policies import NONE

from ..core.entities import BinnedData, ModelSpec
from ..services.estimator_service import MAX_ITER, fit_at_rho
from ..services.selection_service import evaluate_point


@task(
    name="fit-grid-cell",
    description="Fit the hazard model at one (rho_u, rho_s) pair",
    tags=["fit", "selection"],
    cache_policy=NONE,
)
def fit_grid_cell_task(
    binned: BinnedData,
    spec: ModelSpec,
    log10_rho_u: float,
    log10_rho_s: float,
    bic_sample_size: str = "cells",
    max_iter: int = MAX_ITER,
) -> Tuple[Optional[Any], Optional[str]]:
    """
    Fit at one grid point

    Returns:
        (model, None) on success, (None, error message) when the fit failed
    """
    logger = get_run_logger()

    def fit(lu: float, ls: float):
        return fit_at_rho(binned, spec, lu, ls, bic_sample_size=bic_sample_size, max_iter=max_iter)

    model, error = evaluate_point(fit, log10_rho_u, log10_rho_s)
    if model is None:
        logger.warning(f"Fit at log10 rho ({log10_rho_u}, {log10_rho_s}) failed: {error}")
    else:
        logger.debug(
            f"Fit at log10 rho ({log10_rho_u}, {log10_rho_s}): "
            f"aic={model.aic:.6g} bic={model.bic:.6g} ed={model.ed:.4g}"
        )
    return model, error
