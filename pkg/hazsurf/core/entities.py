# hazsurf/core/entities.py
"""Core entity definitions for hazsurf"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import InvalidSpecError


@dataclass(frozen=True)
class MarginalBasis:
    """Equally spaced B-spline basis over one time axis"""
    domain_min: float
    domain_max: float
    nseg: int = 10
    bdeg: int = 3

    def __post_init__(self):
        if int(self.nseg) != self.nseg or self.nseg < 1:
            raise InvalidSpecError(f"nseg must be a positive integer, got {self.nseg}")
        if int(self.bdeg) != self.bdeg or self.bdeg < 0:
            raise InvalidSpecError(f"bdeg must be a non-negative integer, got {self.bdeg}")
        if not (math.isfinite(self.domain_min) and math.isfinite(self.domain_max)):
            raise InvalidSpecError("basis domain must be finite")
        if self.domain_max <= self.domain_min:
            raise InvalidSpecError(
                f"domain_max ({self.domain_max}) must exceed domain_min ({self.domain_min})"
            )

    @property
    def n_basis(self) -> int:
        return int(self.nseg + self.bdeg)

    @property
    def dx(self) -> float:
        return (self.domain_max - self.domain_min) / self.nseg

    @property
    def knots(self) -> np.ndarray:
        """Knot vector extended by bdeg knots on each side"""
        steps = np.arange(-self.bdeg, self.nseg + self.bdeg + 1, dtype=float)
        return self.domain_min + self.dx * steps

    def to_dict(self) -> Dict[str, Any]:
        return {
            "domain_min": self.domain_min,
            "domain_max": self.domain_max,
            "nseg": int(self.nseg),
            "bdeg": int(self.bdeg),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MarginalBasis":
        return cls(
            domain_min=float(data["domain_min"]),
            domain_max=float(data["domain_max"]),
            nseg=int(data["nseg"]),
            bdeg=int(data["bdeg"]),
        )


@dataclass
class PenaltySpec:
    """Difference penalty order and the two smoothing parameters (log10 scale)"""
    pord: int = 2
    log10_rho_u: float = 0.0
    log10_rho_s: float = 0.0

    def __post_init__(self):
        if int(self.pord) != self.pord or self.pord < 1:
            raise InvalidSpecError(f"pord must be a positive integer, got {self.pord}")

    @property
    def rho_u(self) -> float:
        return 10.0 ** self.log10_rho_u

    @property
    def rho_s(self) -> float:
        return 10.0 ** self.log10_rho_s

    def check_against(self, c_u: int, c_s: int) -> None:
        if self.pord >= min(c_u, c_s):
            raise InvalidSpecError(
                f"pord ({self.pord}) must be smaller than the number of B-splines "
                f"on both axes (c_u={c_u}, c_s={c_s})"
            )


@dataclass
class IndividualRecord:
    """One individual's follow-up: fixed u, entry and exit on the s scale"""
    u: float
    s_out: float
    event: int = 0
    s_in: float = 0.0
    covariates: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.event not in (0, 1):
            raise InvalidSpecError(f"event must be 0 or 1, got {self.event!r}")
        if not self.s_out > self.s_in:
            raise InvalidSpecError(
                f"s_out ({self.s_out}) must be greater than s_in ({self.s_in})"
            )


@dataclass(frozen=True, eq=False)
class BinGrid:
    """Rectangular grid of bins over the (u, s) plane"""
    edges_u: np.ndarray
    edges_s: np.ndarray

    def __post_init__(self):
        for name, edges in (("u", self.edges_u), ("s", self.edges_s)):
            if len(edges) < 2 or np.any(np.diff(edges) <= 0):
                raise InvalidSpecError(f"bin edges over {name} must be strictly increasing")

    @property
    def midpoints_u(self) -> np.ndarray:
        return 0.5 * (self.edges_u[:-1] + self.edges_u[1:])

    @property
    def midpoints_s(self) -> np.ndarray:
        return 0.5 * (self.edges_s[:-1] + self.edges_s[1:])

    @property
    def n_u(self) -> int:
        return len(self.edges_u) - 1

    @property
    def n_s(self) -> int:
        return len(self.edges_s) - 1

    @property
    def du(self) -> float:
        return float(self.edges_u[1] - self.edges_u[0])

    @property
    def ds(self) -> float:
        return float(self.edges_s[1] - self.edges_s[0])

    @property
    def range_u(self) -> Tuple[float, float]:
        return float(self.edges_u[0]), float(self.edges_u[-1])

    @property
    def range_s(self) -> Tuple[float, float]:
        return float(self.edges_s[0]), float(self.edges_s[-1])

    def same_as(self, other: "BinGrid") -> bool:
        return (
            self.edges_u.shape == other.edges_u.shape
            and self.edges_s.shape == other.edges_s.shape
            and np.allclose(self.edges_u, other.edges_u, rtol=0, atol=1e-12)
            and np.allclose(self.edges_s, other.edges_s, rtol=0, atol=1e-12)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"edges_u": self.edges_u.tolist(), "edges_s": self.edges_s.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BinGrid":
        return cls(
            edges_u=np.asarray(data["edges_u"], dtype=float),
            edges_s=np.asarray(data["edges_s"], dtype=float),
        )


@dataclass
class BinnedData:
    """
    Exposure and event arrays over a BinGrid.

    R and Y are always the aggregated (n_u × n_s) arrays. When the data were
    binned per individual, each individual's exposure and events are kept as
    rows of r_ind / y_ind (n × n_s) together with the u-bin the individual
    belongs to; individual_R() / individual_Y() expand them to the full
    (n_u × n_s × n) layout.
    """
    grid: BinGrid
    R: np.ndarray
    Y: np.ndarray
    Z: Optional[np.ndarray] = None
    covariate_names: List[str] = field(default_factory=list)
    r_ind: Optional[np.ndarray] = None
    y_ind: Optional[np.ndarray] = None
    u_index: Optional[np.ndarray] = None

    @property
    def individual(self) -> bool:
        return self.r_ind is not None

    @property
    def n_individuals(self) -> int:
        return 0 if self.r_ind is None else int(self.r_ind.shape[0])

    @property
    def total_exposure(self) -> float:
        return float(math.fsum(self.R.ravel()))

    @property
    def total_events(self) -> int:
        return int(round(float(self.Y.sum())))

    @property
    def has_covariates(self) -> bool:
        return self.Z is not None and self.Z.shape[1] > 0

    def individual_R(self) -> np.ndarray:
        return self._expand(self.r_ind)

    def individual_Y(self) -> np.ndarray:
        return self._expand(self.y_ind)

    def _expand(self, rows: Optional[np.ndarray]) -> np.ndarray:
        if rows is None:
            raise InvalidSpecError("data were not binned per individual")
        n = rows.shape[0]
        out = np.zeros((self.grid.n_u, self.grid.n_s, n))
        out[self.u_index, :, np.arange(n)] = rows
        return out

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "grid": self.grid.to_dict(),
            "R": self.R.tolist(),
            "Y": self.Y.tolist(),
            "covariate_names": list(self.covariate_names),
            "Z": None if self.Z is None else self.Z.tolist(),
        }
        if self.individual:
            data["individual"] = {
                "r_ind": self.r_ind.tolist(),
                "y_ind": self.y_ind.tolist(),
                "u_index": self.u_index.tolist(),
            }
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BinnedData":
        ind = data.get("individual") or {}
        z = data.get("Z")
        return cls(
            grid=BinGrid.from_dict(data["grid"]),
            R=np.asarray(data["R"], dtype=float),
            Y=np.asarray(data["Y"], dtype=float),
            Z=None if not z else np.asarray(z, dtype=float),
            covariate_names=list(data.get("covariate_names", [])),
            r_ind=np.asarray(ind["r_ind"], dtype=float) if ind else None,
            y_ind=np.asarray(ind["y_ind"], dtype=float) if ind else None,
            u_index=np.asarray(ind["u_index"], dtype=int) if ind else None,
        )


@dataclass
class ModelSpec:
    """Marginal bases and penalty of a two-time-scale model"""
    basis_u: MarginalBasis
    basis_s: MarginalBasis
    penalty: PenaltySpec = field(default_factory=PenaltySpec)
    has_covariates: bool = False

    def __post_init__(self):
        self.penalty.check_against(self.basis_u.n_basis, self.basis_s.n_basis)

    @property
    def c_u(self) -> int:
        return self.basis_u.n_basis

    @property
    def c_s(self) -> int:
        return self.basis_s.n_basis

    def with_rho(self, log10_rho_u: float, log10_rho_s: float) -> "ModelSpec":
        return ModelSpec(
            basis_u=self.basis_u,
            basis_s=self.basis_s,
            penalty=PenaltySpec(self.penalty.pord, float(log10_rho_u), float(log10_rho_s)),
            has_covariates=self.has_covariates,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "basis_u": self.basis_u.to_dict(),
            "basis_s": self.basis_s.to_dict(),
            "pord": int(self.penalty.pord),
            "has_covariates": bool(self.has_covariates),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], log10_rho_u: float = 0.0,
                  log10_rho_s: float = 0.0) -> "ModelSpec":
        return cls(
            basis_u=MarginalBasis.from_dict(data["basis_u"]),
            basis_s=MarginalBasis.from_dict(data["basis_s"]),
            penalty=PenaltySpec(int(data["pord"]), log10_rho_u, log10_rho_s),
            has_covariates=bool(data.get("has_covariates", False)),
        )
