# hazsurf/__init__.py

"""hazsurf - smooth hazard surfaces over two time scales with P-splines"""
__version__ = "0.1.0"

from .hazsurf import HazSurf
from .engine import HazardEngine
from .core.config import (
    RunConfig,
    get_default_config,
    get_development_config,
    get_rotterdam_competing_config,
    get_rotterdam_death_config,
)
from .core.entities import BinGrid, BinnedData, IndividualRecord, MarginalBasis, ModelSpec, PenaltySpec
from .models import CifSet, FittedHazard1D, FittedModel, SurfaceGrid
from .services.basis_service import bspline_basis, difference_matrix, penalty_2d
from .services.binning_service import bin_records, make_grid, summarize
from .services.estimator_service import coefficient_se, fit_1ts, fit_at_rho, penalized_score, summarize_fit
from .services.selection_service import select_rho_grid, select_rho_numeric
from .services.surface_service import cumulate, evaluate_surface, predict_rows, slices, to_ts_plane
from .services.competing_service import bootstrap_cif, cuminc


__all__ = [
    "HazSurf", "HazardEngine", "RunConfig",
    "get_default_config", "get_development_config",
    "get_rotterdam_death_config", "get_rotterdam_competing_config",
    "BinGrid", "BinnedData", "IndividualRecord", "MarginalBasis", "ModelSpec", "PenaltySpec",
    "CifSet", "FittedHazard1D", "FittedModel", "SurfaceGrid",
    "bspline_basis", "difference_matrix", "penalty_2d",
    "bin_records", "make_grid", "summarize",
    "fit_at_rho", "fit_1ts", "coefficient_se", "penalized_score", "summarize_fit",
    "select_rho_grid", "select_rho_numeric",
    "evaluate_surface", "cumulate", "to_ts_plane", "slices", "predict_rows",
    "cuminc", "bootstrap_cif",
]
