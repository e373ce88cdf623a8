# hazsurf/smoke_tests/__init__.py
"""
Smoke tests for hazsurf.

Every module collects under pytest and also runs on its own:
    python -m hazsurf.smoke_tests.test_1_basis
    python -m hazsurf.smoke_tests quick
"""

import traceback
from typing import Callable, List, Optional, Sequence

import numpy as np
import pytest

from ..core.entities import BinGrid, BinnedData, IndividualRecord, MarginalBasis, ModelSpec, PenaltySpec


def run_tests(title: str, tests: Sequence[Callable[[], None]]) -> bool:
    """Run test functions in order, print a pass/fail block, return overall success"""
    print(f"🚀 {title}")
    print("=" * 60)
    results = []
    for test in tests:
        name = test.__name__
        try:
            test()
            print(f"✅ {name}")
            results.append(True)
        except pytest.skip.Exception as e:
            print(f"⏭️  {name}: skipped ({e})")
            results.append(True)
        except Exception as e:
            print(f"❌ {name}: {type(e).__name__}: {e}")
            traceback.print_exc()
            results.append(False)

    passed = sum(results)
    print("\n" + "=" * 60)
    print(f"📊 {passed}/{len(results)} passed")
    print("🎉 All good!" if all(results) else "⚠️  Fix the failures above.")
    return all(results)


# ── synthetic data ────────────────────────────────────────────────────

def simulate_records(n: int, seed: int, rate: float = 0.2, u_range=(0.0, 10.0),
                     censor: float = 5.0, covariate_effect: Optional[float] = None) -> List[IndividualRecord]:
    """
    Exponential event times with a log-hazard mildly varying in u.

    With ``covariate_effect`` every record carries a 0/1 covariate "x"
    multiplying the hazard by exp(covariate_effect).
    """
    rng = np.random.default_rng(seed)
    lo, hi = u_range
    records = []
    for _ in range(n):
        u = float(rng.uniform(lo, hi))
        x = int(rng.integers(0, 2))
        lam = rate * np.exp(0.05 * (u - lo))
        if covariate_effect is not None:
            lam *= np.exp(covariate_effect * x)
        t = float(rng.exponential(1.0 / lam))
        covariates = {"x": float(x)} if covariate_effect is not None else {}
        records.append(IndividualRecord(
            u=u, s_out=min(t, censor), event=int(t < censor), covariates=covariates,
        ))
    return records


def random_binned(seed: int, n_u: int = 6, n_s: int = 6, zero_fraction: float = 0.1) -> BinnedData:
    """Aggregated Poisson data on the unit square with a few unexposed cells"""
    rng = np.random.default_rng(seed)
    grid = BinGrid(edges_u=np.linspace(0.0, 1.0, n_u + 1), edges_s=np.linspace(0.0, 1.0, n_s + 1))
    R = rng.uniform(5.0, 20.0, size=(n_u, n_s))
    R[rng.uniform(size=R.shape) < zero_fraction] = 0.0
    uu, ss = np.meshgrid(grid.midpoints_u, grid.midpoints_s, indexing="ij")
    eta = -1.0 + 0.8 * uu - 0.6 * ss + 0.4 * np.sin(3.0 * uu * ss)
    Y = rng.poisson(R * np.exp(eta)).astype(float)
    Y[R == 0] = 0.0
    return BinnedData(grid=grid, R=R, Y=Y)


def unit_spec(nseg: int = 2, bdeg: int = 3, pord: int = 2, has_covariates: bool = False,
              grid: Optional[BinGrid] = None) -> ModelSpec:
    lo_u, hi_u = (0.0, 1.0) if grid is None else grid.range_u
    lo_s, hi_s = (0.0, 1.0) if grid is None else grid.range_s
    return ModelSpec(
        basis_u=MarginalBasis(lo_u, hi_u, nseg, bdeg),
        basis_s=MarginalBasis(lo_s, hi_s, nseg, bdeg),
        penalty=PenaltySpec(pord, 0.0, 0.0),
        has_covariates=has_covariates,
    )
