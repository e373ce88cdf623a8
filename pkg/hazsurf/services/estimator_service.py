# hazsurf/services/estimator_service.py
"""
Penalized Poisson estimation of two-time-scale hazards.

The log-hazard of individual k in bin (i, j) is
    eta = (Bu A Bs')[i, j] + z_k' beta
and expected counts are R * exp(eta). Coefficients are estimated by
Newton / IWLS steps on the penalized log-likelihood. Inner products with
the tensor-product design are formed with array (GLAM) identities, so the
(n_u n_s × c_u c_s) design matrix is never built.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import linalg, optimize, stats

from ..core.entities import BinnedData, MarginalBasis, ModelSpec
from ..core.errors import ConvergenceError, DegenerateDataError, InvalidSpecError
from ..models import CoefficientTable, FittedHazard1D, FittedModel, StandardErrors
from .basis_service import bspline_basis, difference_matrix, penalty_2d

logger = logging.getLogger(__name__)

COEF_TOL = 1e-7
DEVIANCE_RTOL = 1e-8
MAX_ITER = 50
MAX_HALVINGS = 12
STALL_STEP = 1e-4  # a rejected Newton step larger than this is a failure, not rounding
POLISH_STEPS = 2
Z_95 = 1.96


# ── linear algebra helpers ────────────────────────────────────────────

def _solve(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return linalg.cho_solve(linalg.cho_factor(M), b)
    except linalg.LinAlgError:
        return linalg.lstsq(M, b)[0]


def _inverse(M: np.ndarray) -> np.ndarray:
    try:
        V = linalg.cho_solve(linalg.cho_factor(M), np.eye(M.shape[0]))
    except linalg.LinAlgError:
        V = linalg.pinvh(M)
    return 0.5 * (V + V.T)


def _poisson_deviance(y: np.ndarray, mu: np.ndarray, mask: np.ndarray) -> float:
    y = y[mask]
    mu = mu[mask]
    with np.errstate(divide="ignore", invalid="ignore"):
        ylog = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0) / mu), 0.0)
    return float(2.0 * np.sum(ylog - (y - mu)))


def row_tensor(B: np.ndarray) -> np.ndarray:
    """Row-wise Kronecker product of B with itself, shape (n × c²)"""
    n, c = B.shape
    return (B[:, :, None] * B[:, None, :]).reshape(n, c * c)


def glam_products(Bu: np.ndarray, Bs: np.ndarray, W: np.ndarray,
                  r: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    X'WX and X'W r for X = Bs ⊗ Bu without forming X.

    Args:
        Bu: (n_u × c_u) basis over u
        Bs: (n_s × c_s) basis over s
        W: (n_u × n_s) weights
        r: (n_u × n_s) working values; ones when omitted

    Returns:
        (c_u c_s × c_u c_s) matrix and (c_u c_s,) vector, coefficients ordered u-index fastest
    """
    W = np.asarray(W, dtype=float)
    cu, cs = Bu.shape[1], Bs.shape[1]
    M = row_tensor(Bu).T @ W @ row_tensor(Bs)
    XtWX = M.reshape(cu, cu, cs, cs).transpose(2, 0, 3, 1).reshape(cu * cs, cu * cs)
    Wr = W if r is None else W * r
    XtWr = (Bu.T @ Wr @ Bs).flatten(order="F")
    return XtWX, XtWr


# ── the fitting problem ───────────────────────────────────────────────

class _PoissonProblem:
    """Data, bases and penalty of one fit, with likelihood pieces as functions of theta"""

    def __init__(self, binned: BinnedData, spec: ModelSpec):
        grid = binned.grid
        self.Bu = bspline_basis(spec.basis_u, grid.midpoints_u, axis="u")
        self.Bs = bspline_basis(spec.basis_s, grid.midpoints_s, axis="s")
        self.cu, self.cs = spec.c_u, spec.c_s
        self.n_events = binned.total_events

        if binned.total_exposure <= 0:
            raise DegenerateDataError("total exposure is zero; nothing to fit")

        self.covariates = spec.has_covariates
        if self.covariates:
            if not (binned.individual and binned.has_covariates):
                raise InvalidSpecError(
                    "a model with covariates needs per-individual arrays and a covariate matrix"
                )
            self.Z = binned.Z
            self.r_ind = binned.r_ind
            self.y_ind = binned.y_ind
            self.iu = binned.u_index
            self.y_k = self.y_ind.sum(axis=1)
            self.mask = self.r_ind > 0
        else:
            self.Z = np.zeros((0, 0))
            self.mask = binned.R > 0
        self.R = binned.R
        self.Y = binned.Y
        self.p = self.Z.shape[1] if self.covariates else 0
        self.nobs = int(self.mask.sum())

        P = penalty_2d(spec.penalty, self.cu, self.cs)
        n_theta = self.cu * self.cs + self.p
        self.P = np.zeros((n_theta, n_theta))
        self.P[: self.cu * self.cs, : self.cu * self.cs] = P

    def split(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        k = self.cu * self.cs
        return theta[:k].reshape(self.cu, self.cs, order="F"), theta[k:]

    def eta_base(self, A: np.ndarray) -> np.ndarray:
        return self.Bu @ A @ self.Bs.T

    def expected(self, theta: np.ndarray):
        """Expected counts: aggregated (n_u × n_s), and per individual when covariates are used"""
        A, beta = self.split(theta)
        eta = self.eta_base(A)
        with np.errstate(over="ignore"):
            if not self.covariates:
                return self.R * np.exp(eta), None
            eta_ind = eta[self.iu, :] + (self.Z @ beta)[:, None]
            mu_ind = self.r_ind * np.exp(eta_ind)
        mu = np.zeros_like(self.R)
        np.add.at(mu, self.iu, mu_ind)
        return mu, mu_ind

    def deviance(self, theta: np.ndarray) -> float:
        mu, mu_ind = self.expected(theta)
        if self.covariates:
            return _poisson_deviance(self.y_ind, mu_ind, self.mask)
        return _poisson_deviance(self.Y, mu, self.mask)

    def penalized_deviance(self, theta: np.ndarray) -> float:
        return self.deviance(theta) + float(theta @ self.P @ theta)

    def information(self, theta: np.ndarray):
        """Fisher information X'WX and score X'(y - mu) at theta"""
        mu, mu_ind = self.expected(theta)
        k = self.cu * self.cs
        XtWX_AA, _ = glam_products(self.Bu, self.Bs, mu)
        score_A = (self.Bu.T @ (self.Y - mu) @ self.Bs).flatten(order="F")
        if not self.covariates:
            return XtWX_AA, score_A

        Cz = np.zeros((self.R.shape[0], self.R.shape[1], self.p))
        np.add.at(Cz, self.iu, mu_ind[:, :, None] * self.Z[:, None, :])
        cross = np.einsum("ia,ijp,jc->acp", self.Bu, Cz, self.Bs).reshape(k, self.p, order="F")
        m_k = mu_ind.sum(axis=1)
        XtWX_bb = self.Z.T @ (m_k[:, None] * self.Z)

        H = np.zeros((k + self.p, k + self.p))
        H[:k, :k] = XtWX_AA
        H[:k, k:] = cross
        H[k:, :k] = cross.T
        H[k:, k:] = XtWX_bb
        score = np.concatenate([score_A, self.Z.T @ (self.y_k - m_k)])
        return H, score

    def initial_theta(self) -> np.ndarray:
        """Penalized least-squares fit of log((Y + 0.5 mean Y) / R) on exposed cells"""
        exposed = self.R > 0
        Yx = self.Y[exposed]
        eta0 = np.zeros_like(self.R)
        eta0[exposed] = np.log((Yx + 0.5 * Yx.mean() + 1e-12) / self.R[exposed])
        XtX, Xtr = glam_products(self.Bu, self.Bs, exposed.astype(float), r=eta0)
        k = self.cu * self.cs
        M = XtX + self.P[:k, :k] + 1e-8 * np.eye(k)
        theta = np.zeros(k + self.p)
        theta[:k] = _solve(M, Xtr)
        return theta


def _newton_step(problem, theta: np.ndarray, pen_dev: float):
    """
    Newton step with halving. Returns (theta, penalized deviance, accepted,
    full step); theta is unchanged when no halving lowers the penalized deviance.
    """
    H, score = problem.information(theta)
    step = _solve(H + problem.P, score - problem.P @ theta)
    factor = 1.0
    for _ in range(MAX_HALVINGS):
        candidate = theta + factor * step
        new_pen_dev = problem.penalized_deviance(candidate)
        if np.isfinite(new_pen_dev) and new_pen_dev <= pen_dev:
            return candidate, new_pen_dev, True, step
        factor *= 0.5
    return theta, pen_dev, False, step


def _iwls(problem, theta: np.ndarray, max_iter: int):
    """
    Newton iterations with step halving; the penalized deviance never increases.

    Returns theta, the iteration count and the penalized deviance after the
    start and after every accepted step. Up to POLISH_STEPS extra Newton
    steps follow the stopping rule.
    """
    pen_dev = problem.penalized_deviance(theta)
    if not np.isfinite(pen_dev):
        raise ConvergenceError("IWLS start has infinite deviance", last_deviance=pen_dev, iterations=0)
    path = [pen_dev]
    for iteration in range(1, max_iter + 1):
        candidate, new_pen_dev, accepted, step = _newton_step(problem, theta, pen_dev)
        if not accepted:
            size = float(np.max(np.abs(step)))
            if size > STALL_STEP:
                raise ConvergenceError(
                    f"IWLS found no descent along a step of size {size:.3g}",
                    last_deviance=problem.deviance(theta), iterations=iteration,
                )
            logger.debug(f"IWLS iteration {iteration}: no descent below rounding, stopping")
            return theta, iteration, path

        change = float(np.max(np.abs(candidate - theta)))
        rel = abs(new_pen_dev - pen_dev) / (abs(pen_dev) + 1e-12)
        logger.debug(
            f"IWLS iteration {iteration}: penalized deviance {new_pen_dev:.10g}, "
            f"max coefficient change {change:.3g}"
        )
        theta, pen_dev = candidate, new_pen_dev
        path.append(pen_dev)
        if change < COEF_TOL or rel < DEVIANCE_RTOL:
            for _ in range(POLISH_STEPS):
                polished, polished_dev, accepted, step = _newton_step(problem, theta, pen_dev)
                if not accepted:
                    break
                theta, pen_dev = polished, polished_dev
                path.append(pen_dev)
                if np.max(np.abs(step)) < 1e-12:
                    break
            return theta, iteration, path
    raise ConvergenceError(
        f"IWLS did not converge in {max_iter} iterations",
        last_deviance=problem.deviance(theta),
        iterations=max_iter,
    )


def _s_support(binned: BinnedData) -> np.ndarray:
    """Upper edge of the last exposed s bin per u bin"""
    edges = binned.grid.edges_s
    exposed = binned.R > 0
    support = np.full(binned.grid.n_u, np.nan)
    rows = exposed.any(axis=1)
    last = exposed.shape[1] - 1 - np.argmax(exposed[:, ::-1], axis=1)
    support[rows] = edges[last[rows] + 1]
    return support


def fit_at_rho(binned: BinnedData, spec: ModelSpec, log10_rho_u: float, log10_rho_s: float,
               bic_sample_size: str = "cells", max_iter: int = MAX_ITER,
               theta_start: Optional[np.ndarray] = None) -> FittedModel:
    """
    Fit the model at fixed smoothing parameters.

    Cells without exposure get zero weight: the penalty alone shapes the
    surface there. Diagnostics come from the information matrix at
    convergence: V = (X'WX + P)^-1, ED = trace(V X'WX).
    """
    spec = spec.with_rho(log10_rho_u, log10_rho_s)
    problem = _PoissonProblem(binned, spec)

    theta = problem.initial_theta() if theta_start is None else np.array(theta_start, dtype=float)
    if len(theta) != problem.cu * problem.cs + problem.p:
        theta = problem.initial_theta()
    theta, iterations, path = _iwls(problem, theta, max_iter)

    H, _ = problem.information(theta)
    V = _inverse(H + problem.P)
    ed = float(np.trace(V @ H))
    deviance = problem.deviance(theta)
    aic = deviance + 2.0 * ed
    bic_events = deviance + math.log(max(problem.n_events, 1)) * ed
    bic_cells = deviance + math.log(max(problem.nobs, 1)) * ed
    A, beta = problem.split(theta)

    return FittedModel(
        spec=spec,
        grid=binned.grid,
        A=A.copy(),
        beta=beta.copy(),
        V=V,
        log10_rho_u=float(log10_rho_u),
        log10_rho_s=float(log10_rho_s),
        ed=ed,
        aic=aic,
        bic=bic_events if bic_sample_size == "events" else bic_cells,
        bic_events=bic_events,
        bic_cells=bic_cells,
        deviance=deviance,
        n_events=problem.n_events,
        nobs=problem.nobs,
        iterations=iterations,
        deviance_path=path,
        covariate_names=list(binned.covariate_names) if spec.has_covariates else [],
        bic_sample_size=bic_sample_size,
        eta=problem.eta_base(A),
        s_support=_s_support(binned),
    )


def penalized_score(binned: BinnedData, model: FittedModel) -> np.ndarray:
    """X'(y - mu) - P theta at the fitted coefficients"""
    problem = _PoissonProblem(binned, model.spec)
    _, score = problem.information(model.theta)
    return score - problem.P @ model.theta


def coefficient_se(model: FittedModel, level: float = 0.95) -> StandardErrors:
    """Standard errors from diag(V); hazard-ratio intervals exp(beta ± z se)"""
    diag = np.diag(model.V).copy()
    clipped = bool(np.any(diag < 0))
    warnings = []
    if clipped:
        message = f"{int(np.sum(diag < 0))} negative variance(s) clipped at zero"
        logger.warning(message)
        warnings.append(message)
        diag = np.clip(diag, 0.0, None)
    se = np.sqrt(diag)
    k = model.c_u * model.c_s
    z = Z_95 if abs(level - 0.95) < 1e-12 else float(stats.norm.ppf(0.5 + level / 2.0))
    table = CoefficientTable(
        names=list(model.covariate_names),
        beta=model.beta.copy(),
        se=se[k:],
        level=level,
        z=z,
        clipped=clipped,
    )
    return StandardErrors(
        se_A=se[:k].reshape(model.c_u, model.c_s, order="F"),
        se_beta=se[k:],
        covariates=table,
        clipped=clipped,
        warnings=warnings,
    )


# ── one time scale ────────────────────────────────────────────────────

class _OneScaleProblem:
    """Poisson likelihood pieces for a hazard over a single time scale"""

    def __init__(self, R, Y, B, D, log10_rho):
        self.R, self.Y, self.B = R, Y, B
        self.P = (10.0 ** log10_rho) * (D.T @ D)
        self.mask = R > 0

    def expected(self, alpha: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.R * np.exp(self.B @ alpha)

    def deviance(self, alpha: np.ndarray) -> float:
        return _poisson_deviance(self.Y, self.expected(alpha), self.mask)

    def penalized_deviance(self, alpha: np.ndarray) -> float:
        return self.deviance(alpha) + float(alpha @ self.P @ alpha)

    def information(self, alpha: np.ndarray):
        mu = self.expected(alpha)
        return self.B.T @ (mu[:, None] * self.B), self.B.T @ (self.Y - mu)

    def initial_theta(self) -> np.ndarray:
        Yx = self.Y[self.mask]
        eta0 = np.zeros_like(self.R)
        eta0[self.mask] = np.log((Yx + 0.5 * Yx.mean() + 1e-12) / self.R[self.mask])
        Bx = self.B[self.mask]
        return _solve(Bx.T @ Bx + self.P + 1e-8 * np.eye(self.B.shape[1]), Bx.T @ eta0[self.mask])


def _fit_1ts_at(R, Y, B, D, log10_rho, max_iter):
    problem = _OneScaleProblem(R, Y, B, D, log10_rho)
    alpha, iteration, _ = _iwls(problem, problem.initial_theta(), max_iter)
    H, _ = problem.information(alpha)
    V = _inverse(H + problem.P)
    ed = float(np.trace(V @ H))
    return alpha, V, ed, problem.deviance(alpha), iteration, int(problem.mask.sum())


def fit_1ts(exposure, events, basis: MarginalBasis, pord: int = 2,
            log10_rho: Optional[float] = None, midpoints=None, criterion: str = "aic",
            start: float = 0.0, bic_sample_size: str = "cells",
            max_iter: int = MAX_ITER) -> FittedHazard1D:
    """
    Hazard over a single time scale.

    With ``log10_rho`` given the fit is made at that value, otherwise
    log10 rho is chosen by Nelder-Mead on the criterion from ``start``.
    ``midpoints`` default to equal bins spanning the basis domain.
    """
    R = np.asarray(exposure, dtype=float)
    Y = np.asarray(events, dtype=float)
    if R.shape != Y.shape or R.ndim != 1:
        raise InvalidSpecError("exposure and events must be vectors of equal length")
    if midpoints is None:
        width = (basis.domain_max - basis.domain_min) / len(R)
        midpoints = basis.domain_min + width * (np.arange(len(R)) + 0.5)
    midpoints = np.asarray(midpoints, dtype=float)
    if midpoints.shape != R.shape:
        raise InvalidSpecError("midpoints must match the exposure vector")
    if R.sum() <= 0:
        raise DegenerateDataError("total exposure is zero; nothing to fit")

    B = bspline_basis(basis, midpoints)
    D = difference_matrix(basis.n_basis, pord)
    n_events = int(round(Y.sum()))

    def bic_of(dev, ed, nobs):
        n = nobs if bic_sample_size == "cells" else max(n_events, 1)
        return dev + math.log(max(n, 1)) * ed

    def criterion_of(x):
        try:
            _, _, ed, dev, _, nobs = _fit_1ts_at(R, Y, B, D, float(x[0]), max_iter)
        except ConvergenceError:
            return np.inf
        return dev + 2.0 * ed if criterion == "aic" else bic_of(dev, ed, nobs)

    warnings = []
    if log10_rho is None:
        result = optimize.minimize(
            criterion_of, x0=np.array([start]), method="Nelder-Mead",
            options={"xatol": 1e-4, "fatol": 1e-4, "maxfev": 200,
                     "initial_simplex": np.array([[start], [start + 1.0]])},
        )
        log10_rho = float(result.x[0])
        if not result.success:
            warnings.append(f"log10 rho search stopped early: {result.message}")
        logger.info(f"One-time-scale fit: log10 rho {log10_rho:.4f} by {criterion}")

    alpha, V, ed, deviance, iterations, nobs = _fit_1ts_at(R, Y, B, D, float(log10_rho), max_iter)
    return FittedHazard1D(
        basis=basis,
        pord=pord,
        log10_rho=float(log10_rho),
        alpha=alpha,
        V=V,
        midpoints=midpoints,
        ed=ed,
        aic=deviance + 2.0 * ed,
        bic=bic_of(deviance, ed, nobs),
        deviance=deviance,
        n_events=n_events,
        iterations=iterations,
        warnings=warnings,
    )


# ── reporting ─────────────────────────────────────────────────────────

def _g(value: float) -> str:
    return f"{value:.7g}"


def summarize_fit(model: FittedModel) -> str:
    """Printable summary: dimensions, optimal smoothing, covariate table, diagnostics"""
    lines = [
        f"Number of events =  {model.n_events}",
        "Model specifications:",
        f"  nu =  {model.grid.n_u}",
        f"  ns =  {model.grid.n_s}",
        f"  cu =  {model.c_u}",
        f"  cs =  {model.c_s}",
        "",
        "Optimal smoothing:",
        f"  log10(rho_u) =  {_g(model.log10_rho_u)}",
        f"  log10(rho_s) =  {_g(model.log10_rho_s)}",
        f"  rho_u =  {_g(10.0 ** model.log10_rho_u)}",
        f"  rho_s =  {_g(10.0 ** model.log10_rho_s)}",
        "",
    ]
    if model.p > 0:
        table = coefficient_se(model).covariates
        header = ["beta", "se(beta)", "exp(beta)", "lower .95", "upper.95"]
        cells = [
            [_g(b), _g(s), _g(h), _g(lo), _g(up)]
            for b, s, h, lo, up in zip(table.beta, table.se, table.hr, table.lower, table.upper)
        ]
        name_width = max(len(n) for n in table.names)
        widths = [max(len(header[c]), *(len(row[c]) for row in cells)) for c in range(5)]
        lines.append(" " * name_width + "".join(" " + h.rjust(w) for h, w in zip(header, widths)))
        for name, row in zip(table.names, cells):
            lines.append(name.ljust(name_width) + "".join(" " + v.rjust(w) for v, w in zip(row, widths)))
        lines.append("")
        lines.append("")
    lines += [
        "Model diagnostics:",
        f"  AIC =  {_g(model.aic)}",
        f"  BIC =  {_g(model.bic)}",
        f"  ED =  {_g(model.ed)}",
    ]
    for warning in model.warnings:
        lines.append(f"Warning: {warning}")
    return "\n".join(lines) + "\n"
