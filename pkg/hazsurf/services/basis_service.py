# hazsurf/services/basis_service.py
"""B-spline bases, difference matrices and the anisotropic 2D penalty"""

import logging
from typing import Optional

import numpy as np

from ..core.config import SplineConfig
from ..core.entities import BinGrid, MarginalBasis, PenaltySpec
from ..core.errors import InvalidSpecError, OutOfDomainError

logger = logging.getLogger(__name__)

# relative slack on the domain bounds for values produced by floating arithmetic
_DOMAIN_TOL = 1e-10


def bspline_basis(basis: MarginalBasis, x, axis: str = "") -> np.ndarray:
    """
    Evaluate the B-spline basis at x.

    Args:
        basis: marginal basis specification
        x: evaluation points inside [domain_min, domain_max]
        axis: axis label used in error messages

    Returns:
        (len(x) × n_basis) matrix; every row sums to one
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = basis.domain_min, basis.domain_max
    slack = _DOMAIN_TOL * max(1.0, abs(hi - lo))
    bad = ~np.isfinite(x) | (x < lo - slack) | (x > hi + slack)
    if bad.any():
        raise OutOfDomainError(float(x[np.argmax(bad)]), lo, hi, axis)

    nseg, bdeg = int(basis.nseg), int(basis.bdeg)
    dx = basis.dx
    knots = basis.knots
    x = np.clip(x, lo, hi)

    # degree 0: indicator of the segment holding x, the right end belongs to the last one
    seg = np.clip(np.floor((x - lo) / dx).astype(int), 0, nseg - 1)
    n_knots = len(knots)
    B = np.zeros((len(x), n_knots - 1))
    B[np.arange(len(x)), seg + bdeg] = 1.0

    # Cox-de Boor on equally spaced knots: every denominator is k * dx
    for k in range(1, bdeg + 1):
        width = k * dx
        left = (x[:, None] - knots[None, : n_knots - 1 - k]) / width
        right = (knots[None, k + 1:] - x[:, None]) / width
        B = left * B[:, :-1] + right * B[:, 1:]

    return B


def difference_matrix(c: int, pord: int) -> np.ndarray:
    """pord-th order forward difference operator, shape (c - pord) × c"""
    if int(c) != c or c < 1:
        raise InvalidSpecError(f"number of coefficients must be a positive integer, got {c}")
    if int(pord) != pord or pord < 1:
        raise InvalidSpecError(f"pord must be a positive integer, got {pord}")
    if pord >= c:
        raise InvalidSpecError(f"pord ({pord}) must be smaller than the number of coefficients ({c})")
    return np.diff(np.eye(int(c)), n=int(pord), axis=0)


def penalty_2d(spec: PenaltySpec, c_u: int, c_s: int) -> np.ndarray:
    """
    rho_u (I_cs ⊗ Du'Du) + rho_s (Ds'Ds ⊗ I_cu), for vec(A) stacking columns of A.
    """
    spec.check_against(c_u, c_s)
    Du = difference_matrix(c_u, spec.pord)
    Ds = difference_matrix(c_s, spec.pord)
    Pu = np.kron(np.eye(c_s), Du.T @ Du)
    Ps = np.kron(Ds.T @ Ds, np.eye(c_u))
    return spec.rho_u * Pu + spec.rho_s * Ps


def penalty_1d(c: int, pord: int, log10_rho: float) -> np.ndarray:
    D = difference_matrix(c, pord)
    return (10.0 ** log10_rho) * (D.T @ D)


class BasisService:
    """Builds the marginal bases of a model from the spline settings and a bin grid"""

    def __init__(self, config: Optional[SplineConfig] = None):
        self.config = config or SplineConfig()

    def bases_for(self, grid: BinGrid):
        """Marginal bases over u and s; domains default to the grid range"""
        cfg = self.config
        lo_u, hi_u = grid.range_u
        lo_s, hi_s = grid.range_s
        basis_u = MarginalBasis(
            domain_min=lo_u if cfg.min_u is None else float(cfg.min_u),
            domain_max=hi_u if cfg.max_u is None else float(cfg.max_u),
            nseg=cfg.nseg_u,
            bdeg=cfg.bdeg,
        )
        basis_s = MarginalBasis(
            domain_min=lo_s if cfg.min_s is None else float(cfg.min_s),
            domain_max=hi_s if cfg.max_s is None else float(cfg.max_s),
            nseg=cfg.nseg_s,
            bdeg=cfg.bdeg,
        )
        for name, basis, mids in (("u", basis_u, grid.midpoints_u), ("s", basis_s, grid.midpoints_s)):
            if mids.min() < basis.domain_min or mids.max() > basis.domain_max:
                raise InvalidSpecError(
                    f"basis domain over {name} [{basis.domain_min}, {basis.domain_max}] "
                    f"does not cover the bin midpoints"
                )
        logger.debug(
            f"Bases: c_u={basis_u.n_basis} on [{basis_u.domain_min}, {basis_u.domain_max}], "
            f"c_s={basis_s.n_basis} on [{basis_s.domain_min}, {basis_s.domain_max}]"
        )
        return basis_u, basis_s
