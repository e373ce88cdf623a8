# hazsurf/tasks/bootstrap_tasks.py
"""Bootstrap tasks using Prefect"""

from typing import Dict, Mapping, Optional, Tuple

import numpy as np
from prefect import get_run_logger, task
from prefect.cache_policies import NONE

from ..core.entities import BinnedData, ModelSpec
from ..core.errors import FitError
from ..services.competing_service import run_replicate


@task(
    name="bootstrap-replicate",
    description="Refit every cause on one resample and return its CIFs",
    tags=["bootstrap", "competing"],
    cache_policy=NONE,
)
def bootstrap_replicate_task(
    replicate: int,
    indices: np.ndarray,
    cause_binned: Mapping[str, BinnedData],
    specs: Mapping[str, ModelSpec],
    rhos: Mapping[str, Tuple[float, float]],
    u_grid: np.ndarray,
    s_grid: np.ndarray,
) -> Optional[Dict[str, np.ndarray]]:
    """
    One bootstrap replicate

    Returns:
        CIF matrix per cause, or None when a refit failed
    """
    logger = get_run_logger()
    try:
        cif = run_replicate(indices, cause_binned, specs, rhos, u_grid, s_grid)
    except FitError as e:
        logger.warning(f"Bootstrap replicate {replicate} dropped: {e}")
        return None
    logger.debug(f"Bootstrap replicate {replicate} done")
    return cif
