# hazsurf/tasks/__init__.py
"""Prefect tasks for hazsurf"""

from .fit_tasks import fit_grid_cell_task
from .bootstrap_tasks import bootstrap_replicate_task

__all__ = [
    "fit_grid_cell_task",
    "bootstrap_replicate_task",
]
