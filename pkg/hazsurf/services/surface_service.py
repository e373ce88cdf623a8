# hazsurf/services/surface_service.py
"""Evaluation of fitted models: surfaces, masking, cumulation, slices and predictions"""

import logging
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.config import SurfaceConfig
from ..core.errors import InvalidGridError, SchemaError
from ..models import FittedModel, PredictionRow, Slice, SurfaceGrid
from .basis_service import bspline_basis

logger = logging.getLogger(__name__)

Z_95 = 1.96
_GRID_TOL = 1e-9


def _basis_rows(model: FittedModel, u, s) -> Tuple[np.ndarray, np.ndarray]:
    Bu = bspline_basis(model.spec.basis_u, u, axis="u")
    Bs = bspline_basis(model.spec.basis_s, s, axis="s")
    return Bu, Bs


def _vaa(model: FittedModel) -> np.ndarray:
    k = model.c_u * model.c_s
    return model.V[:k, :k]


def evaluate_surface(model: FittedModel, u_grid, s_grid) -> SurfaceGrid:
    """
    Baseline log-hazard Bu A Bs' on the grid, with delta-method standard errors.

    The variance of eta(u_i, s_j) is the quadratic form of the tensor
    basis row (Bs[j] ⊗ Bu[i]) with the coefficient block of V.
    """
    u_grid = np.atleast_1d(np.asarray(u_grid, dtype=float))
    s_grid = np.atleast_1d(np.asarray(s_grid, dtype=float))
    Bu, Bs = _basis_rows(model, u_grid, s_grid)
    eta = Bu @ model.A @ Bs.T

    cu, cs = model.c_u, model.c_s
    V4 = _vaa(model).reshape(cs, cu, cs, cu)     # [c, a, d, b]
    inner = np.einsum("ia,cadb,ib->icd", Bu, V4, Bu)
    var = np.einsum("jc,icd,jd->ij", Bs, inner, Bs)
    se_eta = np.sqrt(np.clip(var, 0.0, None))
    hazard = np.exp(eta)

    return SurfaceGrid(
        u_values=u_grid,
        s_values=s_grid,
        loghazard=eta,
        hazard=hazard,
        se_loghazard=se_eta,
        se_hazard=hazard * se_eta,
        support_edges_u=None if model.s_support is None else model.grid.edges_u.copy(),
        support_s=None if model.s_support is None else model.s_support.copy(),
    )


def mask_surface(grid: SurfaceGrid, t_max: Optional[float] = None,
                 cut_extrapolated: bool = False) -> SurfaceGrid:
    """Flag cells with u + s > t_max, or outside the exposed data region, as absent"""
    out = grid.copy()
    t = out.u_values[:, None] + out.s_values[None, :]
    present = out.present.copy()
    if t_max is not None:
        present &= t <= t_max + _GRID_TOL * max(1.0, abs(t_max))
    if cut_extrapolated:
        if out.support_edges_u is None or out.support_s is None:
            raise InvalidGridError("surface carries no data-support information to cut on")
        edges = out.support_edges_u
        idx = np.searchsorted(edges, out.u_values, side="right") - 1
        idx = np.where(np.isclose(out.u_values, edges[-1]), len(edges) - 2, idx)
        inside = (idx >= 0) & (idx < len(edges) - 1)
        limit = np.full(len(out.u_values), -np.inf)
        limit[inside] = out.support_s[idx[inside]]
        limit = np.where(np.isnan(limit), -np.inf, limit)
        present &= out.s_values[None, :] <= limit[:, None] + _GRID_TOL
    out.present = present
    return out


def to_ts_plane(grid: SurfaceGrid, t_max: Optional[float] = None,
                cut_extrapolated: bool = False) -> SurfaceGrid:
    """Re-index a (u, s) surface to (t = u + s, s); masked cells stay in place, flagged absent"""
    if grid.plane != "us":
        raise InvalidGridError(f"surface is already on the {grid.plane} plane")
    out = mask_surface(grid, t_max, cut_extrapolated)
    out.t = out.u_values[:, None] + out.s_values[None, :]
    out.plane = "ts"
    return out


def uniform_step(values: np.ndarray, name: str) -> float:
    if len(values) < 2:
        raise InvalidGridError(f"{name} grid needs at least two points to define a step")
    steps = np.diff(values)
    step = float(steps[0])
    if step <= 0 or np.max(np.abs(steps - step)) > 1e-6 * abs(step):
        raise InvalidGridError(f"{name} grid is not uniformly spaced")
    return step


def cumulate(source: Union[FittedModel, SurfaceGrid], u_grid=None, s_grid=None,
             ds: Optional[float] = None) -> SurfaceGrid:
    """
    Cumulative hazard along s by the left-rectangle rule, first cell included:
        Lambda(u, s_j) = sum_{k <= j} lambda(u, s_k) ds
    and survival exp(-Lambda). A model is first evaluated on (u_grid, s_grid),
    which must start at the s-domain minimum.
    """
    if isinstance(source, FittedModel):
        if u_grid is None or s_grid is None:
            raise InvalidGridError("u_grid and s_grid are required to cumulate a model")
        s_grid = np.atleast_1d(np.asarray(s_grid, dtype=float))
        s_min = source.spec.basis_s.domain_min
        if abs(s_grid[0] - s_min) > _GRID_TOL * max(1.0, abs(s_min)):
            raise InvalidGridError(f"s grid must start at the s-domain minimum {s_min}")
        surface = evaluate_surface(source, u_grid, s_grid)
    else:
        surface = source.copy()

    if ds is None:
        ds = uniform_step(surface.s_values, "s")
    elif len(surface.s_values) > 1:
        step = uniform_step(surface.s_values, "s")
        if abs(step - ds) > 1e-6 * ds:
            raise InvalidGridError(f"ds {ds} does not match the s grid step {step}")

    surface.cumhazard = np.cumsum(surface.hazard, axis=1) * ds
    surface.survival = np.exp(-surface.cumhazard)
    return surface


def _band(hazard, se_hazard, se_eta, band: str):
    if band == "log":
        return hazard * np.exp(-Z_95 * se_eta), hazard * np.exp(Z_95 * se_eta)
    if band == "linear":
        return hazard - Z_95 * se_hazard, hazard + Z_95 * se_hazard
    raise InvalidGridError(f"unknown band type '{band}' (use 'log' or 'linear')")


def slices(grid: SurfaceGrid, direction: str, where: Sequence[float], band: str = "log",
           model: Optional[FittedModel] = None) -> List[Slice]:
    """
    Cross-sections of a surface at fixed u (direction "u", curves over s)
    or fixed s (direction "s", curves over u).

    A cut between grid lines is evaluated from ``model`` when given,
    otherwise interpolated linearly on the log scale.
    """
    if direction not in ("u", "s"):
        raise InvalidGridError(f"slice direction must be 'u' or 's', got {direction!r}")
    fixed = grid.u_values if direction == "u" else grid.s_values
    free = grid.s_values if direction == "u" else grid.u_values
    lo, hi = float(fixed.min()), float(fixed.max())

    def along(matrix: np.ndarray, i: int) -> np.ndarray:
        return matrix[i, :] if direction == "u" else matrix[:, i]

    out = []
    for at in np.atleast_1d(np.asarray(where, dtype=float)):
        if at < lo - _GRID_TOL or at > hi + _GRID_TOL:
            raise InvalidGridError(
                f"slice at {direction}={at} outside the valid range [{lo}, {hi}]"
            )
        hits = np.flatnonzero(np.isclose(fixed, at, rtol=0, atol=_GRID_TOL))
        interpolated = False
        if hits.size:
            i = int(hits[0])
            eta = along(grid.loghazard, i)
            se_eta = along(grid.se_loghazard, i)
        elif model is not None:
            u = [at] if direction == "u" else free
            s = free if direction == "u" else [at]
            fresh = evaluate_surface(model, u, s)
            eta = fresh.loghazard.reshape(-1)
            se_eta = fresh.se_loghazard.reshape(-1)
        else:
            interpolated = True
            j = int(np.searchsorted(fixed, at)) - 1
            w = (at - fixed[j]) / (fixed[j + 1] - fixed[j])
            eta = (1 - w) * along(grid.loghazard, j) + w * along(grid.loghazard, j + 1)
            se_eta = (1 - w) * along(grid.se_loghazard, j) + w * along(grid.se_loghazard, j + 1)
        hazard = np.exp(eta)
        se_hazard = hazard * se_eta
        lower, upper = _band(hazard, se_hazard, se_eta, band)
        out.append(Slice(
            direction=direction, at=float(at), free_values=np.array(free, dtype=float),
            hazard=hazard, se_hazard=se_hazard, lower=lower, upper=upper,
            interpolated=interpolated,
        ))
    return out


def predict_rows(model: FittedModel, rows: Sequence[Mapping[str, Any]],
                 ds: float = 0.1) -> List[PredictionRow]:
    """
    Hazard, cumulative hazard and survival at individual (u, s, covariates) points.

    Each row is a mapping with keys "u", "s" and one entry per model
    covariate. The cumulative hazard integrates the covariate-adjusted
    hazard along s at fixed u from the s-domain minimum with step ``ds``.
    """
    if ds <= 0:
        raise InvalidGridError("integration step ds must be positive")
    names = list(model.covariate_names)
    n = len(rows)
    if n == 0:
        return []

    u = np.empty(n)
    s = np.empty(n)
    Z = np.zeros((n, len(names)))
    for r, row in enumerate(rows):
        unknown = [k for k in row if k not in ("u", "s") and k not in names]
        if unknown:
            raise SchemaError(f"row {r}: unknown covariate(s) {', '.join(map(str, unknown))}")
        missing = [k for k in ["u", "s"] + names if k not in row]
        if missing:
            raise SchemaError(f"row {r}: missing value(s) for {', '.join(missing)}")
        u[r] = float(row["u"])
        s[r] = float(row["s"])
        Z[r] = [float(row[name]) for name in names]

    Bu, Bs = _basis_rows(model, u, s)
    k = model.c_u * model.c_s
    XA = np.einsum("ra,rc->rca", Bu, Bs).reshape(n, k)
    base_eta = XA @ model.A.flatten(order="F")
    lin = Z @ model.beta if names else np.zeros(n)
    X = np.hstack([XA, Z]) if names else XA
    var_base = np.einsum("rk,kl,rl->r", XA, _vaa(model), XA)
    var_full = np.einsum("rk,kl,rl->r", X, model.V[: X.shape[1], : X.shape[1]], X)

    basehazard = np.exp(base_eta)
    hazard = basehazard * np.exp(lin)

    # cumulated baseline per distinct u on s_min + k ds
    s_min = model.spec.basis_s.domain_min
    s_max = model.spec.basis_s.domain_max
    steps = np.floor((s - s_min) / ds + 1e-9).astype(int)
    cumbase = np.empty(n)
    for value in np.unique(u):
        rows_u = np.flatnonzero(u == value)
        last = int(steps[rows_u].max())
        n_pts = min(last, int(math.floor((s_max - s_min) / ds + 1e-9))) + 1
        s_pts = s_min + ds * np.arange(n_pts)
        curve = np.cumsum(np.exp(bspline_basis(model.spec.basis_u, [value], axis="u")
                                 @ model.A @ bspline_basis(model.spec.basis_s, s_pts, axis="s").T)[0]) * ds
        cumbase[rows_u] = curve[np.minimum(steps[rows_u], n_pts - 1)]
    cumhazard = cumbase * np.exp(lin)

    se_base = basehazard * np.sqrt(np.clip(var_base, 0.0, None))
    se_hazard = hazard * np.sqrt(np.clip(var_full, 0.0, None))

    out = []
    for r in range(n):
        out.append(PredictionRow(
            u=float(u[r]),
            s=float(s[r]),
            covariates={name: float(Z[r, j]) for j, name in enumerate(names)},
            hazard=float(hazard[r]),
            cumhazard=float(cumhazard[r]),
            se_hazard=float(se_hazard[r]),
            survival=float(np.exp(-cumhazard[r])),
            basehazard=float(basehazard[r]),
            se_basehazard=float(se_base[r]),
        ))
    return out


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


class SurfaceService:
    """Evaluation grids and derived surfaces from the surface settings"""

    def __init__(self, config: Optional[SurfaceConfig] = None):
        self.config = config or SurfaceConfig()

    def plot_grid(self, model: FittedModel) -> Tuple[np.ndarray, np.ndarray]:
        """Bin midpoints by default; a regular grid when du / ds are set"""
        cfg = self.config
        bu, bs = model.spec.basis_u, model.spec.basis_s
        if cfg.du is None:
            u_grid = model.grid.midpoints_u
        else:
            u_grid = _axis(bu.domain_min if cfg.min_u is None else cfg.min_u,
                           bu.domain_max if cfg.max_u is None else cfg.max_u, cfg.du)
        if cfg.ds is None:
            s_grid = model.grid.midpoints_s
        else:
            s_grid = _axis(bs.domain_min if cfg.min_s is None else cfg.min_s,
                           bs.domain_max if cfg.max_s is None else cfg.max_s, cfg.ds)
        return u_grid, s_grid

    def surfaces(self, model: FittedModel) -> SurfaceGrid:
        """Hazard with SEs, cumulated, masked per t_max / cut_extrapolated"""
        u_grid, s_grid = self.plot_grid(model)
        surface = cumulate(evaluate_surface(model, u_grid, s_grid))
        return mask_surface(surface, self.config.t_max, self.config.cut_extrapolated)

    def slice_set(self, model: FittedModel, surface: SurfaceGrid) -> Dict[str, List[Slice]]:
        cfg = self.config
        if not cfg.slice_direction or not cfg.slice_at:
            return {}
        return {cfg.slice_direction: slices(surface, cfg.slice_direction, cfg.slice_at, model=model)}

    def predict(self, model: FittedModel, rows: Sequence[Mapping[str, Any]]) -> List[PredictionRow]:
        return predict_rows(model, rows, ds=self.config.cumulation_ds)
