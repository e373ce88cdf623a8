# hazsurf/core/errors.py
"""Exception hierarchy for hazsurf.

Every error carries the CLI exit code it maps to, so the command line can
translate failures without a lookup table.
"""

from typing import Optional


class HazSurfError(Exception):
    """Base class for all hazsurf errors"""
    exit_code: int = 1


# ── schema / configuration (exit code 2) ──────────────────────────────

class InvalidSpecError(HazSurfError, ValueError):
    """Invalid spline, penalty or bin specification"""
    exit_code = 2


class OutOfDomainError(HazSurfError, ValueError):
    """Evaluation point outside a basis domain"""
    exit_code = 2

    def __init__(self, value: float, domain_min: float, domain_max: float, axis: str = ""):
        self.value = value
        self.domain_min = domain_min
        self.domain_max = domain_max
        label = f" on axis {axis}" if axis else ""
        super().__init__(
            f"value {value!r}{label} outside basis domain [{domain_min}, {domain_max}]"
        )


class OutOfRangeError(HazSurfError, ValueError):
    """Individual record that does not fit in the bin grid"""
    exit_code = 2

    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"record {index}: {message}")


class SchemaError(HazSurfError, ValueError):
    """Missing or unknown column / covariate"""
    exit_code = 2


class ParseError(HazSurfError, ValueError):
    """Unparsable numeric value in an input table"""
    exit_code = 2

    def __init__(self, row: int, column: str, raw: object):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column '{column}': cannot parse {raw!r} as a number")


class ConfigError(HazSurfError, ValueError):
    """Invalid run configuration"""
    exit_code = 2


class InvalidGridError(HazSurfError, ValueError):
    """Evaluation grid unusable for the requested operation"""
    exit_code = 2


class AlignmentError(HazSurfError, ValueError):
    """Cause-specific surfaces that cannot be combined"""
    exit_code = 2


# ── numerical failures (exit code 3) ──────────────────────────────────

class FitError(HazSurfError, RuntimeError):
    """Base class for estimation failures"""
    exit_code = 3


class DegenerateDataError(FitError):
    """No exposure at all"""


class ConvergenceError(FitError):
    """IWLS did not converge"""

    def __init__(self, message: str, last_deviance: Optional[float] = None, iterations: int = 0):
        self.last_deviance = last_deviance
        self.iterations = iterations
        super().__init__(f"{message} (last deviance {last_deviance}, {iterations} iterations)")


class SearchError(FitError):
    """Every smoothing-parameter candidate failed"""


class BootstrapError(FitError):
    """Too many failed bootstrap replicates"""


# ── I/O (exit code 4) ─────────────────────────────────────────────────

class ArtifactError(HazSurfError, OSError):
    """Unreadable, unwritable or malformed file"""
    exit_code = 4
