# hazsurf/models.py
"""Result types returned by the hazsurf services"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .core.entities import BinGrid, MarginalBasis, ModelSpec


def _array(value: Any, dtype=float) -> Optional[np.ndarray]:
    return None if value is None else np.asarray(value, dtype=dtype)


def _list(value: Optional[np.ndarray]) -> Any:
    return None if value is None else np.asarray(value).tolist()


@dataclass
class SelectionTrace:
    """Every criterion evaluation made while choosing the smoothing parameters"""
    method: str
    criterion: str
    rows: List[Dict[str, Any]] = field(default_factory=list)
    n_evaluations: int = 0
    converged: bool = True

    def add(self, log10_rho_u: float, log10_rho_s: float,
            model: Optional["FittedModel"] = None, error: Optional[str] = None) -> None:
        row: Dict[str, Any] = {
            "log10_rho_u": float(log10_rho_u),
            "log10_rho_s": float(log10_rho_s),
            "aic": np.nan, "bic": np.nan, "ed": np.nan, "deviance": np.nan,
            "error": error or "",
        }
        if model is not None:
            row.update(aic=model.aic, bic=model.bic, ed=model.ed, deviance=model.deviance)
        self.rows.append(row)
        self.n_evaluations += 1

    def to_frame(self) -> pd.DataFrame:
        columns = ["log10_rho_u", "log10_rho_s", "aic", "bic", "ed", "deviance", "error"]
        return pd.DataFrame(self.rows, columns=columns)

    def to_dict(self) -> Dict[str, Any]:
        rows = [
            {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in r.items()}
            for r in self.rows
        ]
        return {
            "method": self.method,
            "criterion": self.criterion,
            "rows": rows,
            "n_evaluations": self.n_evaluations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SelectionTrace":
        rows = [
            {k: (np.nan if v is None and k != "error" else v) for k, v in r.items()}
            for r in data.get("rows", [])
        ]
        return cls(
            method=data["method"],
            criterion=data["criterion"],
            rows=rows,
            n_evaluations=int(data.get("n_evaluations", len(rows))),
            converged=bool(data.get("converged", True)),
        )


@dataclass
class FittedModel:
    """
    Fitted two-time-scale hazard model.

    Coefficients are stored as the (c_u × c_s) matrix A and the covariate
    vector beta. V is the variance of (vec(A), beta) with vec stacking the
    columns of A, u-index fastest.
    """
    spec: ModelSpec
    grid: BinGrid
    A: np.ndarray
    beta: np.ndarray
    V: np.ndarray
    log10_rho_u: float
    log10_rho_s: float
    ed: float
    aic: float
    bic: float
    bic_events: float
    bic_cells: float
    deviance: float
    n_events: int
    nobs: int
    iterations: int = 0
    deviance_path: List[float] = field(default_factory=list)  # penalized deviance per IWLS iteration
    covariate_names: List[str] = field(default_factory=list)
    bic_sample_size: str = "cells"
    eta: Optional[np.ndarray] = None        # in-sample baseline log-hazard at bin midpoints
    s_support: Optional[np.ndarray] = None  # last exposed s edge per u bin, nan if none
    selection: Optional[SelectionTrace] = None
    warnings: List[str] = field(default_factory=list)
    optimizer_capped: bool = False
    se_clipped: bool = False

    @property
    def c_u(self) -> int:
        return int(self.A.shape[0])

    @property
    def c_s(self) -> int:
        return int(self.A.shape[1])

    @property
    def p(self) -> int:
        return int(len(self.beta))

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.A.flatten(order="F"), self.beta])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "hazsurf.FittedModel",
            "version": 1,
            "spec": self.spec.to_dict(),
            "grid": self.grid.to_dict(),
            "A": _list(self.A),
            "beta": _list(self.beta),
            "V": _list(self.V),
            "log10_rho_u": self.log10_rho_u,
            "log10_rho_s": self.log10_rho_s,
            "ed": self.ed,
            "aic": self.aic,
            "bic": self.bic,
            "bic_events": self.bic_events,
            "bic_cells": self.bic_cells,
            "bic_sample_size": self.bic_sample_size,
            "deviance": self.deviance,
            "n_events": self.n_events,
            "nobs": self.nobs,
            "iterations": self.iterations,
            "deviance_path": [float(v) for v in self.deviance_path],
            "covariate_names": list(self.covariate_names),
            "eta": _list(self.eta),
            "s_support": None if self.s_support is None
            else [None if np.isnan(v) else float(v) for v in self.s_support],
            "selection": None if self.selection is None else self.selection.to_dict(),
            "warnings": list(self.warnings),
            "optimizer_capped": self.optimizer_capped,
            "se_clipped": self.se_clipped,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FittedModel":
        support = data.get("s_support")
        selection = data.get("selection")
        return cls(
            spec=ModelSpec.from_dict(data["spec"], data["log10_rho_u"], data["log10_rho_s"]),
            grid=BinGrid.from_dict(data["grid"]),
            A=np.asarray(data["A"], dtype=float),
            beta=np.asarray(data["beta"], dtype=float).reshape(-1),
            V=np.asarray(data["V"], dtype=float),
            log10_rho_u=float(data["log10_rho_u"]),
            log10_rho_s=float(data["log10_rho_s"]),
            ed=float(data["ed"]),
            aic=float(data["aic"]),
            bic=float(data["bic"]),
            bic_events=float(data["bic_events"]),
            bic_cells=float(data["bic_cells"]),
            deviance=float(data["deviance"]),
            n_events=int(data["n_events"]),
            nobs=int(data["nobs"]),
            iterations=int(data.get("iterations", 0)),
            deviance_path=[float(v) for v in data.get("deviance_path", [])],
            covariate_names=list(data.get("covariate_names", [])),
            bic_sample_size=data.get("bic_sample_size", "cells"),
            eta=_array(data.get("eta")),
            s_support=None if support is None
            else np.array([np.nan if v is None else v for v in support], dtype=float),
            selection=None if selection is None else SelectionTrace.from_dict(selection),
            warnings=list(data.get("warnings", [])),
            optimizer_capped=bool(data.get("optimizer_capped", False)),
            se_clipped=bool(data.get("se_clipped", False)),
        )


@dataclass
class CoefficientTable:
    """Covariate effects with standard errors and hazard-ratio intervals"""
    names: List[str]
    beta: np.ndarray
    se: np.ndarray
    level: float = 0.95
    z: float = 1.96
    clipped: bool = False

    @property
    def hr(self) -> np.ndarray:
        return np.exp(self.beta)

    @property
    def lower(self) -> np.ndarray:
        return np.exp(self.beta - self.z * self.se)

    @property
    def upper(self) -> np.ndarray:
        return np.exp(self.beta + self.z * self.se)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "covariate": self.names,
            "beta": self.beta,
            "se": self.se,
            "hr": self.hr,
            "lower": self.lower,
            "upper": self.upper,
        })


@dataclass
class StandardErrors:
    """Standard errors of every coefficient of a fit"""
    se_A: np.ndarray          # (c_u × c_s)
    se_beta: np.ndarray       # (p,)
    covariates: CoefficientTable
    clipped: bool = False
    warnings: List[str] = field(default_factory=list)


@dataclass
class FittedHazard1D:
    """Hazard over a single time scale"""
    basis: MarginalBasis
    pord: int
    log10_rho: float
    alpha: np.ndarray
    V: np.ndarray
    midpoints: np.ndarray
    ed: float
    aic: float
    bic: float
    deviance: float
    n_events: int
    iterations: int = 0
    warnings: List[str] = field(default_factory=list)

    @property
    def loghazard(self) -> np.ndarray:
        from .services.basis_service import bspline_basis
        return bspline_basis(self.basis, self.midpoints) @ self.alpha

    @property
    def hazard(self) -> np.ndarray:
        return np.exp(self.loghazard)

    @property
    def se_loghazard(self) -> np.ndarray:
        from .services.basis_service import bspline_basis
        B = bspline_basis(self.basis, self.midpoints)
        return np.sqrt(np.clip(np.einsum("ij,jk,ik->i", B, self.V, B), 0.0, None))


_COORDINATES = ("u_values", "s_values", "present", "t", "support_edges_u", "support_s")


@dataclass
class SurfaceGrid:
    """
    Fitted values on a rectangular (u, s) grid.

    Matrices are indexed [u, s]. ``present`` flags the cells that carry a
    value; masked cells keep their numbers but must not be displayed.
    On the (t, s) plane ``t`` holds u + s for every cell.
    """
    u_values: np.ndarray
    s_values: np.ndarray
    loghazard: np.ndarray
    hazard: np.ndarray
    se_loghazard: np.ndarray
    se_hazard: np.ndarray
    cumhazard: Optional[np.ndarray] = None
    survival: Optional[np.ndarray] = None
    present: Optional[np.ndarray] = None
    plane: str = "us"
    t: Optional[np.ndarray] = None
    support_edges_u: Optional[np.ndarray] = None  # u bins of the fitted data
    support_s: Optional[np.ndarray] = None        # last exposed s per u bin

    def __post_init__(self):
        if self.present is None:
            self.present = np.ones(self.hazard.shape, dtype=bool)

    @property
    def shape(self):
        return self.hazard.shape

    def values(self, name: str) -> np.ndarray:
        value = getattr(self, name, None)
        if value is None or not isinstance(value, np.ndarray) or name in _COORDINATES:
            raise KeyError(f"surface has no value '{name}'")
        return value

    def copy(self) -> "SurfaceGrid":
        def c(a):
            return None if a is None else np.array(a, copy=True)
        return SurfaceGrid(
            u_values=c(self.u_values), s_values=c(self.s_values),
            loghazard=c(self.loghazard), hazard=c(self.hazard),
            se_loghazard=c(self.se_loghazard), se_hazard=c(self.se_hazard),
            cumhazard=c(self.cumhazard), survival=c(self.survival),
            present=c(self.present), plane=self.plane, t=c(self.t),
            support_edges_u=c(self.support_edges_u), support_s=c(self.support_s),
        )


@dataclass
class Slice:
    """One cross-section of a surface"""
    direction: str             # axis held fixed: "u" gives a curve over s
    at: float
    free_values: np.ndarray
    hazard: np.ndarray
    se_hazard: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    interpolated: bool = False

    def to_frame(self) -> pd.DataFrame:
        free = "s" if self.direction == "u" else "u"
        return pd.DataFrame({
            self.direction: np.full(len(self.free_values), self.at),
            free: self.free_values,
            "hazard": self.hazard,
            "se_hazard": self.se_hazard,
            "lower": self.lower,
            "upper": self.upper,
        })


@dataclass
class PredictionRow:
    u: float
    s: float
    covariates: Dict[str, float]
    hazard: float
    cumhazard: float
    se_hazard: float
    survival: float
    basehazard: float
    se_basehazard: float

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"u": self.u, "s": self.s}
        data.update(self.covariates)
        data.update(
            hazard=self.hazard,
            cumhazard=self.cumhazard,
            se_hazard=self.se_hazard,
            survival=self.survival,
            basehazard=self.basehazard,
            se_basehazard=self.se_basehazard,
        )
        return data


@dataclass
class CauseSurface:
    cause: str
    surface: SurfaceGrid


@dataclass
class CifSet:
    """Overall survival and cumulative incidence per cause on a shared grid"""
    causes: List[str]
    u_values: np.ndarray
    s_values: np.ndarray
    survival: np.ndarray
    cif: Dict[str, np.ndarray]
    lower: Dict[str, np.ndarray] = field(default_factory=dict)
    upper: Dict[str, np.ndarray] = field(default_factory=dict)
    level: Optional[float] = None
    n_reps: int = 0
    n_dropped: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def has_bands(self) -> bool:
        return bool(self.lower)
