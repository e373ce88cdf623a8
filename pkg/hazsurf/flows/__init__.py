# hazsurf/flows/__init__.py
"""Prefect flows for hazsurf"""

from .selection_flow import grid_search_flow
from .bootstrap_flow import bootstrap_flow

__all__ = [
    "grid_search_flow",
    "bootstrap_flow",
]
