# hazsurf/services/binning_service.py
"""Binning of individual follow-up into exposure and event arrays over (u, s)"""

import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..core.config import BinningConfig, ColumnConfig
from ..core.entities import BinGrid, BinnedData, IndividualRecord
from ..core.errors import InvalidSpecError, OutOfRangeError, ParseError, SchemaError

logger = logging.getLogger(__name__)

_EDGE_TOL = 1e-9


def make_grid(min_u: float, max_u: float, du: float,
              min_s: float, max_s: float, ds: float) -> BinGrid:
    """Equally spaced bins starting at the minima; the last edge reaches at least the maxima"""
    edges = []
    for name, lo, hi, width in (("u", min_u, max_u, du), ("s", min_s, max_s, ds)):
        if width is None or not width > 0:
            raise InvalidSpecError(f"bin width over {name} must be positive, got {width}")
        if not hi > lo:
            raise InvalidSpecError(f"max_{name} ({hi}) must exceed min_{name} ({lo})")
        # rounding keeps (1 - 0) / 0.5 style ratios from drifting past an integer
        n = max(1, math.ceil(round((hi - lo) / width, 10)))
        edges.append(lo + width * np.arange(n + 1, dtype=float))
    return BinGrid(edges_u=edges[0], edges_s=edges[1])


def _level_label(level: Any) -> str:
    if isinstance(level, (float, np.floating)) and float(level).is_integer():
        return str(int(level))
    return str(level)


def dummy_code(records: Sequence[IndividualRecord], covariate_names: Sequence[str],
               factors: Sequence[str] = ()) -> Tuple[np.ndarray, List[str]]:
    """
    Design matrix of the covariates.

    String-valued covariates, and numeric ones listed in ``factors``, get
    reference coding: levels sorted, the first one dropped, columns named
    "<covariate>_<level>".
    """
    columns: List[np.ndarray] = []
    names: List[str] = []
    for name in covariate_names:
        raw = []
        for i, rec in enumerate(records):
            if name not in rec.covariates:
                raise SchemaError(f"record {i} has no covariate '{name}'")
            raw.append(rec.covariates[name])

        categorical = name in factors or any(isinstance(v, str) for v in raw)
        if categorical:
            if any(isinstance(v, str) for v in raw):
                values = [str(v) for v in raw]
            else:
                values = [float(v) for v in raw]
            levels = sorted(set(values))
            for level in levels[1:]:
                columns.append(np.array([1.0 if v == level else 0.0 for v in values]))
                names.append(f"{name}_{_level_label(level)}")
            if len(levels) < 2:
                logger.warning(f"Covariate '{name}' has a single level and contributes no column")
        else:
            col = np.empty(len(raw))
            for i, v in enumerate(raw):
                try:
                    col[i] = float(v)
                except (TypeError, ValueError):
                    raise ParseError(i, name, v)
                if not np.isfinite(col[i]):
                    raise ParseError(i, name, v)
            columns.append(col)
            names.append(name)

    if not columns:
        return np.zeros((len(records), 0)), []
    return np.column_stack(columns), names


def bin_records(records: Sequence[IndividualRecord], grid: BinGrid, individual: bool = False,
                covariate_names: Optional[Sequence[str]] = None,
                factors: Sequence[str] = ()) -> BinnedData:
    """
    Spread each record's follow-up over the s bins of the u bin holding its u.

    Exposure in s-bin j is |[s_in, s_out] ∩ bin_j|; an event is counted in
    the bin whose half-open interval (lower, upper] contains s_out.
    Requesting covariates implies per-individual arrays.
    """
    covariate_names = list(covariate_names or [])
    if covariate_names and not individual:
        logger.info("Covariates requested: keeping per-individual arrays")
        individual = True

    n = len(records)
    u = np.array([r.u for r in records], dtype=float)
    s_in = np.array([r.s_in for r in records], dtype=float)
    s_out = np.array([r.s_out for r in records], dtype=float)
    event = np.array([r.event for r in records], dtype=float)

    lo_u, hi_u = grid.range_u
    lo_s, hi_s = grid.range_s
    tol_u = _EDGE_TOL * max(1.0, hi_u - lo_u)
    tol_s = _EDGE_TOL * max(1.0, hi_s - lo_s)
    checks = (
        ((u < lo_u - tol_u) | (u > hi_u + tol_u), f"u outside [{lo_u}, {hi_u}]"),
        (s_in < lo_s - tol_s, f"s_in below {lo_s}"),
        (s_out > hi_s + tol_s, f"s_out beyond {hi_s}"),
    )
    for bad, message in checks:
        if n and bad.any():
            raise OutOfRangeError(int(np.argmax(bad)), message)

    edges_s = grid.edges_s
    iu = np.clip(np.searchsorted(grid.edges_u, u, side="right") - 1, 0, grid.n_u - 1)
    r_ind = np.clip(
        np.minimum(s_out[:, None], edges_s[None, 1:]) - np.maximum(s_in[:, None], edges_s[None, :-1]),
        0.0, None,
    )
    js = np.clip(np.searchsorted(edges_s, s_out, side="left") - 1, 0, grid.n_s - 1)
    y_ind = np.zeros((n, grid.n_s))
    y_ind[np.arange(n), js] = event

    # fixed accumulation order, independent of input order
    order = np.lexsort((event, s_out, s_in, u))
    R = np.zeros((grid.n_u, grid.n_s))
    Y = np.zeros((grid.n_u, grid.n_s))
    np.add.at(R, iu[order], r_ind[order])
    np.add.at(Y, iu[order], y_ind[order])

    Z, names = (None, [])
    if covariate_names:
        Z, names = dummy_code(records, covariate_names, factors)

    logger.debug(f"Binned {n} records into {grid.n_u} x {grid.n_s} bins")
    if not individual:
        return BinnedData(grid=grid, R=R, Y=Y)
    return BinnedData(
        grid=grid, R=R, Y=Y, Z=Z, covariate_names=names,
        r_ind=r_ind, y_ind=y_ind, u_index=iu.astype(int),
    )


def resample_binned(binned: BinnedData, indices: np.ndarray) -> BinnedData:
    """
    Per-individual data of the individuals in ``indices`` (repeats allowed),
    with the aggregated arrays rebuilt from them. Covariate columns keep the
    coding of the full data.
    """
    if not binned.individual:
        raise InvalidSpecError("resampling needs data binned per individual")
    indices = np.asarray(indices, dtype=int)
    r_ind = binned.r_ind[indices]
    y_ind = binned.y_ind[indices]
    iu = binned.u_index[indices]
    R = np.zeros_like(binned.R)
    Y = np.zeros_like(binned.Y)
    np.add.at(R, iu, r_ind)
    np.add.at(Y, iu, y_ind)
    return BinnedData(
        grid=binned.grid, R=R, Y=Y,
        Z=None if binned.Z is None else binned.Z[indices],
        covariate_names=list(binned.covariate_names),
        r_ind=r_ind, y_ind=y_ind, u_index=iu,
    )


def _fmt(value: float) -> str:
    return f"{value:.7g}"


def summarize(binned: BinnedData) -> str:
    """Printable overview of binned data"""
    grid = binned.grid
    lo_u, hi_u = grid.range_u
    lo_s, hi_s = grid.range_s
    lines = [
        "Range covered by the bins:",
        f"  bins_u: {_fmt(lo_u)} {_fmt(hi_u)}",
        f"  bins_s: {_fmt(lo_s)} {_fmt(hi_s)}",
        "",
        "Number of bins:",
        f"  nu: {grid.n_u}",
        f"  ns: {grid.n_s}",
        "",
        "Overview of the binned data:",
        f"Total exposure time: {round(binned.total_exposure, 2):.10g}",
        f"Total number of events: {binned.total_events}",
    ]
    if binned.individual:
        lines.insert(0, f"Individuals: {binned.n_individuals}")
    if binned.covariate_names:
        lines.append("Covariates:")
        lines.append("  " + " ".join(f'"{name}"' for name in binned.covariate_names))
    return "\n".join(lines) + "\n"


def records_from_frame(frame: pd.DataFrame, columns: ColumnConfig,
                       event_column: Optional[str] = None) -> List[IndividualRecord]:
    """
    Build records from a table.

    Raises SchemaError for missing columns and ParseError, carrying the row
    index, for values that are not numbers.
    """
    event_column = event_column or columns.event
    required = [columns.u, columns.s_out, event_column] + list(columns.covariates)
    if columns.s_in:
        required.append(columns.s_in)
    if frame.shape[1] == 0:
        raise SchemaError("input table has no columns")
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")

    def numeric(col: str) -> np.ndarray:
        parsed = pd.to_numeric(frame[col], errors="coerce")
        bad = parsed.isna().to_numpy()
        if bad.any():
            row = int(np.argmax(bad))
            raise ParseError(row, col, frame[col].iloc[row])
        return parsed.to_numpy(dtype=float)

    u = numeric(columns.u)
    s_out = numeric(columns.s_out)
    ev = numeric(event_column)
    s_in = numeric(columns.s_in) if columns.s_in else np.zeros(len(frame))

    covariate_data: Dict[str, List[Any]] = {}
    for name in columns.covariates:
        series = frame[name]
        parsed = pd.to_numeric(series, errors="coerce")
        if not parsed.isna().any():
            covariate_data[name] = parsed.astype(float).tolist()
        elif name in columns.factors:
            row = int(np.argmax(parsed.isna().to_numpy()))
            raise ParseError(row, name, series.iloc[row])
        else:
            covariate_data[name] = series.astype(str).str.strip().tolist()

    records = []
    for i in range(len(frame)):
        if ev[i] not in (0.0, 1.0):
            raise ParseError(i, event_column, ev[i])
        try:
            records.append(IndividualRecord(
                u=float(u[i]), s_out=float(s_out[i]), event=int(ev[i]), s_in=float(s_in[i]),
                covariates={name: values[i] for name, values in covariate_data.items()},
            ))
        except InvalidSpecError as e:
            raise OutOfRangeError(i, str(e)) from e
    return records


class BinningService:
    """Grid construction with data-driven defaults for missing limits"""

    def __init__(self, config: Optional[BinningConfig] = None, columns: Optional[ColumnConfig] = None):
        self.config = config or BinningConfig()
        self.columns = columns or ColumnConfig()

    def grid_for(self, records: Sequence[IndividualRecord]) -> BinGrid:
        cfg = self.config
        if cfg.ds is None:
            raise InvalidSpecError("bin width ds is required")
        du = cfg.ds if cfg.du is None else cfg.du
        if not records and None in (cfg.min_u, cfg.max_u, cfg.max_s):
            raise InvalidSpecError("no records to derive the bin limits from")
        u = [r.u for r in records]
        min_u = min(u) if cfg.min_u is None else cfg.min_u
        max_u = max(u) if cfg.max_u is None else cfg.max_u
        min_s = min(r.s_in for r in records) if cfg.min_s is None else cfg.min_s
        max_s = max(r.s_out for r in records) if cfg.max_s is None else cfg.max_s
        if max_u <= min_u:
            # every record shares one u: a single bin of width du
            max_u = min_u + du
        return make_grid(float(min_u), float(max_u), float(du),
                         float(min_s), float(max_s), float(cfg.ds))

    def prepare(self, records: Sequence[IndividualRecord]) -> BinnedData:
        grid = self.grid_for(records)
        binned = bin_records(
            records, grid,
            individual=self.config.individual,
            covariate_names=self.columns.covariates,
            factors=self.columns.factors,
        )
        logger.info(
            f"Prepared {len(records)} records: {grid.n_u} x {grid.n_s} bins, "
            f"exposure {binned.total_exposure:.6g}, events {binned.total_events}"
        )
        return binned
