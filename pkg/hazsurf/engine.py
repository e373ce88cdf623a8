# hazsurf/engine.py
"""
HazardEngine - implementation details of the hazsurf workflow

The engine reads inputs, drives the services, and writes artifacts. The
HazSurf class and the command line only call its public methods.
"""

import logging
import time
from pathlib import Path
from typing import Dict, List, Mapping, Optional

import numpy as np
import pandas as pd

from .core.config import RunConfig
from .core.entities import BinnedData, IndividualRecord, ModelSpec, PenaltySpec
from .core.errors import AlignmentError, ConfigError, ParseError, SchemaError
from .models import CifSet, FittedModel, PredictionRow, SurfaceGrid
from .services import ServiceRegistry
from .services.binning_service import records_from_frame, summarize
from .services.estimator_service import coefficient_se, summarize_fit
from .services.surface_service import to_ts_plane
from .utils.helper import (
    ensure_dir,
    load_binned,
    load_model,
    read_csv,
    read_grid,
    save_binned,
    save_model,
    write_frame,
    write_grid,
    write_text,
)
from .utils.render import render_heatmap

logger = logging.getLogger(__name__)

PREDICTION_COLUMNS = ["hazard", "cumhazard", "se_hazard", "survival", "basehazard", "se_basehazard"]
SURFACE_VALUES = ["hazard", "loghazard", "se_hazard", "se_loghazard", "cumhazard", "survival"]


class HazardEngine:
    """
    Implementation engine for hazsurf runs.

    Every step returns plain result objects; writing files is kept in the
    ``write_*`` methods so library users can skip it.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")
        self.registry = ServiceRegistry(config)

    # ── input ─────────────────────────────────────────────────────────

    def _input_path(self) -> str:
        if not self.config.input_path:
            raise ConfigError("no input file given (input_path / --input)")
        return self.config.input_path

    def load_records(self, path: Optional[str] = None) -> List[IndividualRecord]:
        path = path or self._input_path()
        frame = read_csv(path)
        records = records_from_frame(frame, self.config.columns)
        self.logger.info(f"Read {len(records)} records from {path}")
        return records

    def load_cause_records(self, path: Optional[str] = None) -> Dict[str, List[IndividualRecord]]:
        """Per cause, every individual with an event indicator for that cause only"""
        cols = self.config.columns
        if not cols.cause_column or not cols.causes:
            raise ConfigError("columns.cause_column and columns.causes are required for competing risks")
        path = path or self._input_path()
        frame = read_csv(path)
        if cols.cause_column not in frame.columns:
            raise SchemaError(f"missing column(s): {cols.cause_column}")
        labels = frame[cols.cause_column].astype(str).str.strip()
        out = {}
        for cause in cols.causes:
            frame_c = frame.copy()
            frame_c["__event__"] = (labels == cause).astype(int).astype(str)
            out[cause] = records_from_frame(frame_c, cols, event_column="__event__")
        self.logger.info(f"Read {len(frame)} individuals for causes {', '.join(cols.causes)}")
        return out

    def load_binned_or_prepare(self) -> BinnedData:
        path = self._input_path()
        if path.lower().endswith(".json"):
            return load_binned(path)
        return self.prepare(self.load_records(path))

    # ── steps ─────────────────────────────────────────────────────────

    def prepare(self, records: List[IndividualRecord]) -> BinnedData:
        return self.registry.binning.prepare(records)

    def build_spec(self, binned: BinnedData) -> ModelSpec:
        basis_u, basis_s = self.registry.basis.bases_for(binned.grid)
        start = self.config.selection.start
        return ModelSpec(
            basis_u=basis_u,
            basis_s=basis_s,
            penalty=PenaltySpec(self.config.spline.pord, float(start[0]), float(start[1])),
            has_covariates=binned.has_covariates,
        )

    def fit(self, binned: BinnedData) -> FittedModel:
        start = time.time()
        spec = self.build_spec(binned)
        sel = self.config.selection
        self.logger.info(
            f"Fitting c_u={spec.c_u} x c_s={spec.c_s} tensor P-splines"
            f"{' with ' + str(len(binned.covariate_names)) + ' covariate(s)' if spec.has_covariates else ''}"
            f" ({sel.method.value} search on {sel.criterion.value})"
        )
        model = self.registry.selection.select(binned, spec)
        self.logger.info(
            f"Fit done in {time.time() - start:.1f}s: log10 rho = "
            f"({model.log10_rho_u:.6g}, {model.log10_rho_s:.6g}), "
            f"AIC {model.aic:.7g}, BIC {model.bic:.7g}, ED {model.ed:.6g}"
        )
        for warning in model.warnings:
            self.logger.warning(warning)
        return model

    def surfaces(self, model: FittedModel) -> SurfaceGrid:
        return self.registry.surface.surfaces(model)

    def predict(self, model: FittedModel, newdata: pd.DataFrame) -> pd.DataFrame:
        """One output row per input row, in input order"""
        cols = self.config.columns
        s_name = cols.prediction_s or cols.s_out
        covariate_cols = list(model.covariate_names)
        header = [cols.u, s_name] + covariate_cols + PREDICTION_COLUMNS
        missing = [c for c in (cols.u, s_name) if c not in newdata.columns]
        if missing:
            raise SchemaError(f"newdata is missing column(s): {', '.join(missing)}")
        if len(newdata) == 0:
            return pd.DataFrame(columns=header)

        values = {"u": self._numeric(newdata, cols.u), "s": self._numeric(newdata, s_name)}
        for name in covariate_cols:
            values[name] = self._covariate_column(newdata, name)
        rows = [{k: v[i] for k, v in values.items()} for i in range(len(newdata))]

        predictions: List[PredictionRow] = self.registry.surface.predict(model, rows)
        frame = pd.DataFrame([p.to_dict() for p in predictions])
        frame = frame.rename(columns={"u": cols.u, "s": s_name})
        return frame[header]

    @staticmethod
    def _numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
        parsed = pd.to_numeric(frame[column], errors="coerce")
        if parsed.isna().any():
            row = int(np.argmax(parsed.isna().to_numpy()))
            raise ParseError(row, column, frame[column].iloc[row])
        return parsed.to_numpy(dtype=float)

    def _covariate_column(self, frame: pd.DataFrame, name: str) -> np.ndarray:
        """A model covariate, given directly or as the raw factor it was coded from"""
        if name in frame.columns:
            return self._numeric(frame, name)
        for raw in self.config.columns.covariates:
            prefix = f"{raw}_"
            if name.startswith(prefix) and raw in frame.columns:
                level = name[len(prefix):]
                labels = frame[raw].astype(str).str.strip()
                numeric = pd.to_numeric(labels, errors="coerce")
                as_label = numeric.map(lambda v: str(int(v)) if pd.notna(v) and float(v).is_integer() else str(v))
                labels = labels.where(numeric.isna(), as_label)
                return (labels == level).astype(float).to_numpy()
        raise SchemaError(f"newdata has no column for covariate '{name}'")

    def cif(self, models: Mapping[str, FittedModel],
            cause_records: Optional[Dict[str, List[IndividualRecord]]] = None,
            seed: Optional[int] = None) -> CifSet:
        if len(models) < 2:
            raise AlignmentError("cumulative incidence needs model files for at least two causes")
        reference = next(iter(models.values()))
        u_grid, s_grid = self.registry.surface.plot_grid(reference)
        competing = self.registry.competing
        if self.config.bootstrap.n_reps > 0:
            if cause_records is None:
                cause_records = self.load_cause_records()
            missing = [c for c in models if c not in cause_records]
            if missing:
                raise AlignmentError(f"no records for cause(s): {', '.join(missing)}")
            ordered = {c: cause_records[c] for c in models}
            cols = self.config.columns
            return competing.bootstrap(ordered, models, u_grid, s_grid, seed,
                                       covariates=cols.covariates, factors=cols.factors)
        return competing.cif(models, u_grid, s_grid)

    def load_models(self) -> Dict[str, FittedModel]:
        if not self.config.models:
            raise ConfigError("no cause model files given (models / --model CAUSE=PATH)")
        return {cause: load_model(path) for cause, path in self.config.models.items()}

    # ── output ────────────────────────────────────────────────────────

    def _out(self) -> Path:
        return ensure_dir(self.config.output_dir or "hazsurf_out")

    def write_prepare(self, binned: BinnedData) -> str:
        out = self._out()
        text = summarize(binned)
        save_binned(binned, out / "binned.json", metadata={"columns": self.config.to_dict()["columns"]})
        write_text(out / "summary.txt", text)
        self.logger.info(f"Binned data written to {out / 'binned.json'}")
        return text

    def write_fit(self, model: FittedModel, surface: SurfaceGrid) -> str:
        out = self._out()
        text = summarize_fit(model)
        save_model(model, out / "model.json")
        write_text(out / "summary.txt", text)

        meta = {
            "plane": surface.plane,
            "t_max": self.config.surface.t_max,
            "cut_extrapolated": self.config.surface.cut_extrapolated,
            "support_edges_u": None if surface.support_edges_u is None else surface.support_edges_u.tolist(),
            "support_s": None if surface.support_s is None
            else [None if np.isnan(v) else float(v) for v in surface.support_s],
        }
        for name in SURFACE_VALUES:
            write_grid(out, name, surface.u_values, surface.s_values, surface.values(name),
                       surface.present, dict(meta, value=name))

        if model.p > 0:
            write_frame(coefficient_se(model).covariates.to_frame(), out / "covariates.csv")
        if model.selection is not None:
            write_frame(model.selection.to_frame(), out / "selection.csv")
        for direction, family in self.registry.surface.slice_set(model, surface).items():
            frame = pd.concat([s.to_frame() for s in family], ignore_index=True)
            write_frame(frame, out / f"slices_{direction}.csv")
        self.logger.info(f"Model and surfaces written to {out}")
        return text

    def write_predictions(self, frame: pd.DataFrame) -> Path:
        path = self._out() / "predictions.csv"
        write_frame(frame, path)
        self.logger.info(f"{len(frame)} predictions written to {path}")
        return path

    def write_cif(self, cif: CifSet) -> List[Path]:
        out = self._out()
        meta = {"causes": list(cif.causes), "n_reps": cif.n_reps, "n_dropped": cif.n_dropped,
                "level": cif.level}
        meta.update(cif.metadata)
        paths = [write_grid(out, "cif_survival", cif.u_values, cif.s_values, cif.survival,
                            metadata=dict(meta, value="survival"))]
        for cause in cif.causes:
            paths.append(write_grid(out, f"cif_{cause}", cif.u_values, cif.s_values, cif.cif[cause],
                                    metadata=dict(meta, value="cif", cause=cause)))
            if cif.has_bands:
                for side, bands in (("lower", cif.lower), ("upper", cif.upper)):
                    paths.append(write_grid(
                        out, f"cif_{cause}_{side}", cif.u_values, cif.s_values, bands[cause],
                        metadata=dict(meta, value=f"cif_{side}", cause=cause),
                    ))
        self.logger.info(f"Cumulative incidence grids written to {out}")
        return paths

    def render(self, grid_file: str, path: Optional[str] = None) -> Path:
        u_values, s_values, values, present, meta = read_grid(grid_file)
        options = self.config.render
        if options.cut_extrapolated and meta.get("support_edges_u") is not None:
            surface = SurfaceGrid(
                u_values=u_values, s_values=s_values, loghazard=values, hazard=values,
                se_loghazard=values, se_hazard=values, present=present,
                support_edges_u=np.asarray(meta["support_edges_u"], dtype=float),
                support_s=np.array([np.nan if v is None else v for v in meta["support_s"]], dtype=float),
            )
            present = to_ts_plane(surface, options.t_max, True).present
        elif options.cut_extrapolated:
            self.logger.warning(
                f"{grid_file} carries no data-support metadata; rendering without cutting extrapolated cells"
            )
        target = Path(path) if path else self._out() / (Path(grid_file).stem + ".svg")
        render_heatmap(u_values, s_values, values, present, target, options)
        return target
