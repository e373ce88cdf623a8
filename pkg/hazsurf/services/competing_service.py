# hazsurf/services/competing_service.py
"""Competing risks: overall survival, cumulative incidence, bootstrap bands"""

import logging
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..core.config import BootstrapConfig
from ..core.entities import BinGrid, BinnedData, IndividualRecord, ModelSpec
from ..core.errors import AlignmentError, BootstrapError, FitError, InvalidSpecError
from ..models import CauseSurface, CifSet, FittedModel
from .binning_service import bin_records, resample_binned
from .estimator_service import MAX_ITER, fit_at_rho
from .surface_service import uniform_step, cumulate, evaluate_surface

logger = logging.getLogger(__name__)

# resampler(replicate, n) -> indices of the n individuals drawn
Resampler = Callable[[int, int], np.ndarray]


def _check_aligned(cause_surfaces: Sequence[CauseSurface]) -> None:
    if not cause_surfaces:
        raise AlignmentError("at least one cause surface is required")
    names = [c.cause for c in cause_surfaces]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise AlignmentError(f"duplicate cause name(s): {', '.join(duplicates)}")
    first = cause_surfaces[0].surface
    for other in cause_surfaces[1:]:
        g = other.surface
        if (g.u_values.shape != first.u_values.shape or g.s_values.shape != first.s_values.shape
                or not np.allclose(g.u_values, first.u_values, rtol=0, atol=1e-12)
                or not np.allclose(g.s_values, first.s_values, rtol=0, atol=1e-12)):
            raise AlignmentError(
                f"cause '{other.cause}' is evaluated on a different grid than '{cause_surfaces[0].cause}'"
            )


def _cumulated(cause: CauseSurface):
    return cause.surface if cause.surface.cumhazard is not None else cumulate(cause.surface)


def overall_survival(cause_surfaces: Sequence[CauseSurface]) -> np.ndarray:
    """S(u, s) = exp(-sum_k Lambda_k(u, s))"""
    _check_aligned(cause_surfaces)
    total = sum(_cumulated(c).cumhazard for c in cause_surfaces)
    return np.exp(-total)


def cuminc(cause_surfaces: Sequence[CauseSurface], ds: Optional[float] = None) -> CifSet:
    """
    CIF_k(u, s_j) = sum_{m <= j} lambda_k(u, s_m) S(u, s_{m-1}) ds, with S before
    the first cell equal to one.
    """
    _check_aligned(cause_surfaces)
    first = cause_surfaces[0].surface
    step = uniform_step(first.s_values, "s") if len(first.s_values) > 1 else ds
    if step is None:
        raise AlignmentError("a single-column grid needs an explicit ds")
    if ds is not None and abs(ds - step) > 1e-6 * step:
        raise AlignmentError(f"ds {ds} does not match the grid step {step}")
    ds = step

    cumulated = [cumulate(c.surface, ds=ds) if c.surface.cumhazard is None else c.surface
                 for c in cause_surfaces]
    survival = np.exp(-sum(g.cumhazard for g in cumulated))
    lagged = np.hstack([np.ones((survival.shape[0], 1)), survival[:, :-1]])
    cif = {
        c.cause: np.cumsum(g.hazard * lagged * ds, axis=1)
        for c, g in zip(cause_surfaces, cumulated)
    }
    return CifSet(
        causes=[c.cause for c in cause_surfaces],
        u_values=first.u_values.copy(),
        s_values=first.s_values.copy(),
        survival=survival,
        cif=cif,
    )


def cause_surfaces_from_models(models: Mapping[str, FittedModel], u_grid, s_grid) -> List[CauseSurface]:
    """Baseline hazard surfaces of each cause-specific model on one shared grid"""
    items = list(models.items())
    if len(items) > 1:
        reference = items[0][1]
        for cause, model in items[1:]:
            if not model.grid.same_as(reference.grid):
                raise AlignmentError(f"model for '{cause}' was fitted on different bins")
    return [
        CauseSurface(cause=cause, surface=cumulate(evaluate_surface(model, u_grid, s_grid)))
        for cause, model in items
    ]


def draw_indices(n: int, n_reps: int, seed: Optional[int]) -> List[np.ndarray]:
    """Resampling indices for every replicate, drawn up front from one generator"""
    rng = np.random.default_rng(seed)
    return [rng.integers(0, n, size=n) for _ in range(n_reps)]


def bin_causes(cause_records: Mapping[str, Sequence[IndividualRecord]], grid: BinGrid,
               specs: Mapping[str, ModelSpec], covariates: Sequence[str] = (),
               factors: Sequence[str] = (),
               models: Optional[Mapping[str, FittedModel]] = None) -> Dict[str, BinnedData]:
    """
    Per-individual binned data for every cause, with the covariate design of
    the full data for causes whose model has covariates.
    """
    out = {}
    for cause, records in cause_records.items():
        names = list(covariates) if specs[cause].has_covariates else []
        binned = bin_records(records, grid, individual=True, covariate_names=names, factors=factors)
        if models is not None and binned.covariate_names != list(models[cause].covariate_names):
            raise AlignmentError(
                f"covariates of the '{cause}' records ({', '.join(binned.covariate_names) or 'none'}) "
                f"do not match its model ({', '.join(models[cause].covariate_names) or 'none'})"
            )
        out[cause] = binned
    return out


def _baseline_cif(cause_binned: Mapping[str, BinnedData], specs: Mapping[str, ModelSpec],
                  rhos: Mapping[str, Tuple[float, float]], u_grid, s_grid, max_iter: int) -> CifSet:
    surfaces = []
    for cause, binned in cause_binned.items():
        lu, ls = rhos[cause]
        model = fit_at_rho(binned, specs[cause], lu, ls, max_iter=max_iter)
        surfaces.append(CauseSurface(cause, cumulate(evaluate_surface(model, u_grid, s_grid))))
    return cuminc(surfaces)


def run_replicate(indices: np.ndarray, cause_binned: Mapping[str, BinnedData],
                  specs: Mapping[str, ModelSpec], rhos: Mapping[str, Tuple[float, float]],
                  u_grid, s_grid, max_iter: int = MAX_ITER) -> Dict[str, np.ndarray]:
    """Refit every cause on the resampled individuals at its fixed rho, return the baseline CIFs"""
    resampled = {cause: resample_binned(binned, indices) for cause, binned in cause_binned.items()}
    return _baseline_cif(resampled, specs, rhos, u_grid, s_grid, max_iter).cif


def percentile_bands(point: CifSet, replicates: Sequence[Dict[str, np.ndarray]], level: float,
                     n_reps: int, n_dropped: int, seed: Optional[int]) -> CifSet:
    """Pointwise percentile bands from the ordered list of successful replicates"""
    q = [(1.0 - level) / 2.0, (1.0 + level) / 2.0]
    lower, upper = {}, {}
    for cause in point.causes:
        stack = np.stack([rep[cause] for rep in replicates])
        lower[cause], upper[cause] = np.quantile(stack, q, axis=0)
    metadata = dict(point.metadata)
    metadata.update(
        band="percentile",
        smoothing="fixed at the original optimum per cause",
        seed=seed,
        replicates_used=len(replicates),
    )
    return CifSet(
        causes=list(point.causes),
        u_values=point.u_values,
        s_values=point.s_values,
        survival=point.survival,
        cif=point.cif,
        lower=lower,
        upper=upper,
        level=level,
        n_reps=n_reps,
        n_dropped=n_dropped,
        metadata=metadata,
    )


def check_dropped(n_dropped: int, n_reps: int, max_failed_fraction: float) -> None:
    if n_dropped > max_failed_fraction * n_reps:
        raise BootstrapError(
            f"{n_dropped} of {n_reps} bootstrap replicates failed "
            f"(more than {max_failed_fraction:.0%})"
        )


def prepare_bootstrap(cause_records, specs, rhos, n_reps, covariates: Sequence[str] = ()) -> int:
    """Check the bootstrap arguments; returns the number of individuals"""
    if n_reps < 2:
        raise InvalidSpecError(f"n_reps must be at least 2, got {n_reps}")
    causes = list(cause_records)
    sizes = {len(recs) for recs in cause_records.values()}
    if len(sizes) != 1:
        raise AlignmentError("cause record lists must describe the same individuals")
    missing = [c for c in causes if c not in specs or c not in rhos]
    if missing:
        raise AlignmentError(f"no model settings for cause(s): {', '.join(missing)}")
    with_covariates = [c for c in causes if specs[c].has_covariates]
    if with_covariates and not covariates:
        raise AlignmentError(
            f"model(s) for {', '.join(with_covariates)} use covariates; name the covariate columns"
        )
    return sizes.pop()


def point_cif(cause_binned: Mapping[str, BinnedData], specs: Mapping[str, ModelSpec],
              rhos: Mapping[str, Tuple[float, float]], u_grid, s_grid,
              max_iter: int = MAX_ITER) -> CifSet:
    """Baseline CIFs from the full data at the fixed smoothing parameters"""
    return _baseline_cif(cause_binned, specs, rhos, u_grid, s_grid, max_iter)


def bootstrap_cif(cause_records: Mapping[str, Sequence[IndividualRecord]], grid: BinGrid,
                  specs: Mapping[str, ModelSpec], rhos: Mapping[str, Tuple[float, float]],
                  u_grid, s_grid, n_reps: int, seed: Optional[int] = None,
                  level: float = 0.95, max_failed_fraction: float = 0.10,
                  resampler: Optional[Resampler] = None,
                  max_iter: int = MAX_ITER, covariates: Sequence[str] = (),
                  factors: Sequence[str] = (),
                  models: Optional[Mapping[str, FittedModel]] = None) -> CifSet:
    """
    Non-parametric bootstrap of the cumulative incidence functions.

    ``cause_records`` holds, per cause, the same individuals in the same
    order with that cause's event indicator. Individuals are resampled with
    replacement and every cause is refitted with its own spec (covariates
    included) at the fixed smoothing parameters in ``rhos``; CIFs are taken
    at the baseline. When ``models`` are given the point estimate is their
    CIF, otherwise a refit on the full data.
    """
    n = prepare_bootstrap(cause_records, specs, rhos, n_reps, covariates)
    cause_binned = bin_causes(cause_records, grid, specs, covariates, factors, models)
    if models is not None:
        point = cuminc(cause_surfaces_from_models(models, u_grid, s_grid))
    else:
        point = point_cif(cause_binned, specs, rhos, u_grid, s_grid, max_iter)

    if resampler is None:
        drawn = draw_indices(n, n_reps, seed)

        def resampler(rep: int, _n: int) -> np.ndarray:
            return drawn[rep]

    replicates: List[Dict[str, np.ndarray]] = []
    n_dropped = 0
    for rep in range(n_reps):
        indices = np.asarray(resampler(rep, n), dtype=int)
        try:
            replicates.append(run_replicate(indices, cause_binned, specs, rhos, u_grid, s_grid, max_iter))
        except FitError as e:
            n_dropped += 1
            logger.warning(f"Bootstrap replicate {rep} dropped: {e}")
        logger.debug(f"Bootstrap replicate {rep + 1}/{n_reps} done")

    check_dropped(n_dropped, n_reps, max_failed_fraction)
    logger.info(f"Bootstrap: {len(replicates)} replicates used, {n_dropped} dropped")
    return percentile_bands(point, replicates, level, n_reps, n_dropped, seed)


class CompetingService:
    """Cumulative incidence from cause-specific models, with optional bootstrap bands"""

    def __init__(self, config: Optional[BootstrapConfig] = None):
        self.config = config or BootstrapConfig()

    def cif(self, models: Mapping[str, FittedModel], u_grid, s_grid) -> CifSet:
        if len(models) < 2:
            raise AlignmentError("cumulative incidence needs at least two causes")
        return cuminc(cause_surfaces_from_models(models, u_grid, s_grid))

    def bootstrap(self, cause_records: Mapping[str, Sequence[IndividualRecord]],
                  models: Mapping[str, FittedModel], u_grid, s_grid,
                  seed: Optional[int], covariates: Sequence[str] = (),
                  factors: Sequence[str] = ()) -> CifSet:
        """Bands around the CIF of ``models``, refitting each with its own spec and rho"""
        if len(models) < 2:
            raise AlignmentError("cumulative incidence needs at least two causes")
        cfg = self.config
        grid = next(iter(models.values())).grid
        specs = {c: m.spec for c, m in models.items()}
        rhos = {c: (m.log10_rho_u, m.log10_rho_s) for c, m in models.items()}
        if cfg.concurrent:
            from ..flows.bootstrap_flow import bootstrap_flow
            return bootstrap_flow(dict(cause_records), grid, specs, rhos, u_grid, s_grid,
                                  cfg.n_reps, seed, cfg.level, cfg.max_failed_fraction,
                                  list(covariates), list(factors), dict(models))
        return bootstrap_cif(cause_records, grid, specs, rhos, u_grid, s_grid, cfg.n_reps, seed,
                             level=cfg.level, max_failed_fraction=cfg.max_failed_fraction,
                             covariates=covariates, factors=factors, models=models)
