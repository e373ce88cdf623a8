# hazsurf/services/__init__.py
"""Service layer for hazsurf - numerical building blocks of the hazard pipeline"""

from typing import Optional

from ..core.config import RunConfig
from .basis_service import BasisService
from .binning_service import BinningService
from .competing_service import CompetingService
from .selection_service import SelectionService
from .surface_service import SurfaceService


class ServiceRegistry:
    """
    Central registry for the services used by one run.

    Services are created on first access from the matching section of the
    run configuration.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self._binning: Optional[BinningService] = None
        self._basis: Optional[BasisService] = None
        self._selection: Optional[SelectionService] = None
        self._surface: Optional[SurfaceService] = None
        self._competing: Optional[CompetingService] = None

    @property
    def binning(self) -> BinningService:
        if self._binning is None:
            self._binning = BinningService(self.config.binning, self.config.columns)
        return self._binning

    @property
    def basis(self) -> BasisService:
        if self._basis is None:
            self._basis = BasisService(self.config.spline)
        return self._basis

    @property
    def selection(self) -> SelectionService:
        if self._selection is None:
            self._selection = SelectionService(self.config.selection)
        return self._selection

    @property
    def surface(self) -> SurfaceService:
        if self._surface is None:
            self._surface = SurfaceService(self.config.surface)
        return self._surface

    @property
    def competing(self) -> CompetingService:
        if self._competing is None:
            self._competing = CompetingService(self.config.bootstrap)
        return self._competing


__all__ = [
    "ServiceRegistry",
    "BasisService",
    "BinningService",
    "SelectionService",
    "SurfaceService",
    "CompetingService",
]
