# hazsurf/core/config.py

import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Union, get_args, get_origin, get_type_hints

from dotenv import load_dotenv

from .errors import ArtifactError, ConfigError


class SelectionMethod(Enum):
    """How the smoothing parameters are chosen"""
    GRID = "grid"        # evaluate every (rho_u, rho_s) pair of a grid
    NUMERIC = "numeric"  # Nelder-Mead on log10 rho, from a starting pair


class Criterion(Enum):
    AIC = "aic"
    BIC = "bic"


class BicSampleSize(Enum):
    """Which n enters log(n) in the BIC"""
    CELLS = "cells"    # observations with positive exposure, at the level the model is fitted
    EVENTS = "events"  # total number of events


@dataclass
class ColumnConfig:
    """Bindings between input CSV columns and record fields"""
    u: str = "u"
    s_out: str = "s_out"
    event: str = "event"
    s_in: Optional[str] = None
    covariates: List[str] = field(default_factory=list)
    factors: List[str] = field(default_factory=list)  # numeric covariates coded as factors
    cause_column: Optional[str] = None                # first-event type, for competing risks
    causes: List[str] = field(default_factory=list)
    prediction_s: Optional[str] = None                # s column of newdata (defaults to s_out)


@dataclass
class BinningConfig:
    """Bin widths and axis limits; limits default to the data range"""
    ds: Optional[float] = None
    du: Optional[float] = None  # defaults to ds
    min_u: Optional[float] = None
    max_u: Optional[float] = None
    min_s: Optional[float] = None
    max_s: Optional[float] = None
    individual: bool = False


@dataclass
class SplineConfig:
    """Marginal B-spline bases; domains default to the bin grid range"""
    nseg_u: int = 10
    nseg_s: int = 10
    bdeg: int = 3
    pord: int = 2
    min_u: Optional[float] = None
    max_u: Optional[float] = None
    min_s: Optional[float] = None
    max_s: Optional[float] = None


@dataclass
class SelectionConfig:
    """Smoothing-parameter selection"""
    method: SelectionMethod = SelectionMethod.NUMERIC
    criterion: Criterion = Criterion.AIC
    start: List[float] = field(default_factory=lambda: [0.0, 0.0])
    grid_u: List[float] = field(default_factory=lambda: [-1.0, 0.0, 1.0, 2.0, 3.0])
    grid_s: List[float] = field(default_factory=lambda: [-1.0, 0.0, 1.0, 2.0, 3.0])
    bic_sample_size: BicSampleSize = BicSampleSize.CELLS
    max_evaluations: int = 200
    tolerance: float = 1e-4
    max_iter: int = 50          # IWLS iterations per fit
    concurrent: bool = False    # run grid cells through the Prefect flow


@dataclass
class SurfaceConfig:
    """Evaluation grid for surfaces, masking, and prediction integration"""
    du: Optional[float] = None  # None: evaluate at bin midpoints
    ds: Optional[float] = None
    min_u: Optional[float] = None
    max_u: Optional[float] = None
    min_s: Optional[float] = None
    max_s: Optional[float] = None
    t_max: Optional[float] = None
    cut_extrapolated: bool = False
    cumulation_ds: float = 0.1
    slice_direction: Optional[str] = None  # "u" or "s"
    slice_at: List[float] = field(default_factory=list)


@dataclass
class BootstrapConfig:
    n_reps: int = 0
    level: float = 0.95
    max_failed_fraction: float = 0.10
    concurrent: bool = False


@dataclass
class RenderConfig:
    palette: str = "viridis"
    n_shades: int = 100
    contour_levels: int = 6
    plane: str = "us"
    t_max: Optional[float] = None
    cut_extrapolated: bool = False
    title: str = ""
    xlab: str = "u"
    ylab: str = "s"
    width: float = 6.0
    height: float = 5.0


@dataclass
class RunConfig:
    """Master configuration for one CLI invocation"""
    input_path: Optional[str] = None
    newdata_path: Optional[str] = None
    model_path: Optional[str] = None
    models: Dict[str, str] = field(default_factory=dict)  # cause -> model file
    grid_file: Optional[str] = None
    output_dir: Optional[str] = None
    seed: Optional[int] = None
    log_level: Optional[str] = None

    columns: ColumnConfig = field(default_factory=ColumnConfig)
    binning: BinningConfig = field(default_factory=BinningConfig)
    spline: SplineConfig = field(default_factory=SplineConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    surface: SurfaceConfig = field(default_factory=SurfaceConfig)
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    render: RenderConfig = field(default_factory=RenderConfig)

    def apply_environment(self) -> "RunConfig":
        """Fill output dir, seed and log level from the environment (.env honoured)"""
        load_dotenv()
        env_out = os.getenv("HAZSURF_OUTPUT_DIR")
        if env_out:
            self.output_dir = env_out
        env_seed = os.getenv("HAZSURF_SEED")
        if env_seed:
            try:
                self.seed = int(env_seed)
            except ValueError as e:
                raise ConfigError(f"HAZSURF_SEED must be an integer, got {env_seed!r}") from e
        env_level = os.getenv("HAZSURF_LOG_LEVEL")
        if env_level:
            self.log_level = env_level
        return self

    def apply_overrides(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Apply dotted-path overrides such as {"binning.ds": 0.5}; None values are ignored"""
        for path, value in overrides.items():
            if value is None:
                continue
            target: Any = self
            parts = path.split(".")
            for part in parts[:-1]:
                if not hasattr(target, part):
                    raise ConfigError(f"unknown configuration section '{part}' in '{path}'")
                target = getattr(target, part)
            _set_field(target, parts[-1], value, path)
        return self

    def validate(self) -> "RunConfig":
        b = self.binning
        for name in ("ds", "du"):
            width = getattr(b, name)
            if width is not None and width <= 0:
                raise ConfigError(f"binning.{name} must be positive, got {width}")
        for name in ("nseg_u", "nseg_s"):
            if getattr(self.spline, name) < 1:
                raise ConfigError(f"spline.{name} must be at least 1")
        if self.spline.bdeg < 0:
            raise ConfigError("spline.bdeg must be non-negative")
        if self.spline.pord < 1:
            raise ConfigError("spline.pord must be at least 1")
        if len(self.selection.start) != 2:
            raise ConfigError("selection.start must hold two log10 values")
        if not self.selection.grid_u or not self.selection.grid_s:
            raise ConfigError("selection grids must not be empty")
        if self.surface.cumulation_ds <= 0:
            raise ConfigError("surface.cumulation_ds must be positive")
        if self.surface.slice_direction not in (None, "u", "s"):
            raise ConfigError("surface.slice_direction must be 'u' or 's'")
        if not 0.0 < self.bootstrap.level < 1.0:
            raise ConfigError("bootstrap.level must lie in (0, 1)")
        if self.bootstrap.n_reps < 0 or self.bootstrap.n_reps == 1:
            raise ConfigError("bootstrap.n_reps must be 0 (off) or at least 2")
        if self.render.plane not in ("us", "ts"):
            raise ConfigError("render.plane must be 'us' or 'ts'")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        config = cls()
        _fill(config, data, "")
        return config

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except OSError as e:
            raise ArtifactError(f"cannot read config file {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_dict(data)


def _fill(target: Any, data: Dict[str, Any], prefix: str) -> None:
    for key, value in data.items():
        path = f"{prefix}{key}"
        if not hasattr(target, key):
            raise ConfigError(f"unknown configuration key '{path}'")
        current = getattr(target, key)
        if is_dataclass(current) and isinstance(value, dict):
            _fill(current, value, f"{path}.")
        else:
            _set_field(target, key, value, path)


def _set_field(target: Any, name: str, value: Any, path: str) -> None:
    known = {f.name: f for f in fields(target)}
    if name not in known:
        raise ConfigError(f"unknown configuration key '{path}'")
    annotation = get_type_hints(type(target))[name]
    try:
        value = _coerce(annotation, value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value {value!r} for '{path}'") from e
    setattr(target, name, value)


def _coerce(annotation: Any, value: Any) -> Any:
    """Convert value to the annotated field type; Optional fields also accept None"""
    origin = get_origin(annotation)
    args = get_args(annotation)
    if origin is Union:
        inner = [a for a in args if a is not type(None)]
        if value is None and len(inner) < len(args):
            return None
        return _coerce(inner[0], value)
    if value is None:
        raise TypeError("value must not be null")
    if origin in (list, List):
        if not isinstance(value, (list, tuple)):
            raise TypeError(f"expected a list, got {type(value).__name__}")
        return [_coerce(args[0], v) for v in value] if args else list(value)
    if origin in (dict, Dict):
        if not isinstance(value, dict):
            raise TypeError(f"expected an object, got {type(value).__name__}")
        key_type, value_type = args if args else (str, Any)
        return {_coerce(key_type, k): _coerce(value_type, v) for k, v in value.items()}
    if annotation is Any:
        return value
    if isinstance(annotation, type) and issubclass(annotation, Enum):
        return annotation(value.value if isinstance(value, Enum) else str(value).lower())
    if annotation is bool:
        return _as_bool(value)
    if annotation is int:
        if isinstance(value, bool):
            raise TypeError("expected an integer, got a boolean")
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(value)
        return int(value)
    if annotation is float:
        if isinstance(value, bool):
            raise TypeError("expected a number, got a boolean")
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            raise TypeError(f"expected a string, got {type(value).__name__}")
        return value
    return value


def _as_bool(value: Any) -> bool:
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(value)
    return bool(value)


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


# Preset configurations

def get_default_config() -> RunConfig:
    """Default configuration: numeric AIC optimisation, 10 segments per axis"""
    return RunConfig()


def get_development_config() -> RunConfig:
    """Coarse bases and a small grid search, for quick experiments"""
    config = RunConfig()
    config.spline.nseg_u = 6
    config.spline.nseg_s = 6
    config.selection.method = SelectionMethod.GRID
    config.selection.grid_u = [0.0, 2.0]
    config.selection.grid_s = [0.0, 2.0]
    return config


def get_rotterdam_death_config() -> RunConfig:
    """Deaths after breast cancer surgery: age at surgery (u) by years since surgery (s)"""
    config = RunConfig()

    config.columns.u = "age"
    config.columns.s_out = "dtimey"
    config.columns.event = "death"
    config.columns.covariates = ["grade"]
    config.columns.factors = ["grade"]

    config.binning.ds = 0.5
    config.binning.du = 1.0
    config.binning.min_u = 24.0
    config.binning.min_s = 0.0
    config.binning.individual = True

    config.spline.nseg_u = 12
    config.spline.nseg_s = 7
    config.spline.bdeg = 3
    config.spline.pord = 2

    config.selection.method = SelectionMethod.NUMERIC
    config.selection.criterion = Criterion.BIC
    config.selection.start = [1.0, -2.0]

    config.surface.du = 0.2
    config.surface.ds = 0.1
    config.surface.min_u = 24.0
    config.surface.max_u = 90.0
    config.surface.min_s = 0.0
    config.surface.max_s = 19.5
    config.surface.t_max = 90.0
    config.surface.cut_extrapolated = True

    config.render.xlab = "Age at surgery (years)"
    config.render.ylab = "Time since surgery (years)"
    config.render.title = "Baseline hazard of death"
    return config


def get_rotterdam_competing_config() -> RunConfig:
    """Recurrence and death without recurrence as competing first events"""
    config = get_rotterdam_death_config()
    config.columns.s_out = "fetimey"
    config.columns.event = "first_event_any"
    config.columns.covariates = []
    config.columns.factors = []
    config.columns.cause_column = "first_event"
    config.columns.causes = ["recurrence", "death"]
    config.binning.individual = False
    config.bootstrap.n_reps = 0
    config.render.title = "Cumulative incidence"
    return config
