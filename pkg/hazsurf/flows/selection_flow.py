# hazsurf/flows/selection_flow.py
"""Concurrent smoothing-parameter grid search"""

import time
from typing import List

from prefect import flow, get_run_logger

from ..core.entities import BinnedData, ModelSpec
from ..models import FittedModel
from ..services.estimator_service import MAX_ITER
from ..services.selection_service import grid_points, reduce_grid
from ..tasks.fit_tasks import fit_grid_cell_task


@flow(
    name="hazsurf-grid-search",
    description="Fit every (rho_u, rho_s) pair concurrently and keep the best",
    version="1.0",
    validate_parameters=False,
)
def grid_search_flow(
    binned: BinnedData,
    spec: ModelSpec,
    grid_u: List[float],
    grid_s: List[float],
    criterion: str = "aic",
    bic_sample_size: str = "cells",
    max_iter: int = MAX_ITER,
) -> FittedModel:
    """
    Grid search with one task per grid point

    Outcomes are reduced in grid order, so the result equals the
    sequential select_rho_grid.
    """
    logger = get_run_logger()
    start = time.time()
    points = grid_points(grid_u, grid_s)
    logger.info(f"Submitting {len(points)} grid fits")

    futures = [
        fit_grid_cell_task.submit(binned, spec, lu, ls, bic_sample_size, max_iter)
        for lu, ls in points
    ]
    outcomes = [f.result() for f in futures]
    failed = sum(1 for model, _ in outcomes if model is None)
    if failed:
        logger.warning(f"{failed} of {len(points)} grid fits failed")

    best = reduce_grid(points, outcomes, criterion)
    logger.info(f"Grid search finished in {time.time() - start:.2f}s")
    return best
