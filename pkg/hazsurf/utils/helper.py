# hazsurf/utils/helper.py
"""File helpers: JSON artifacts, CSV tables and long-format grids"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from ..core.entities import BinnedData
from ..core.errors import ArtifactError, SchemaError
from ..models import FittedModel

FLOAT_FORMAT = "%.17g"


def ensure_dir(path: str) -> Path:
    directory = Path(path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArtifactError(f"cannot create output directory {path}: {e}") from e
    return directory


def write_json(path, data: Dict[str, Any]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(data, f, indent=2)
            f.write("\n")
    except OSError as e:
        raise ArtifactError(f"cannot write {path}: {e}") from e


def write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"cannot write {path}: {e}") from e


def read_json(path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise ArtifactError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ArtifactError(f"{path} is not valid JSON: {e}") from e


def read_csv(path) -> pd.DataFrame:
    """Read a CSV with a header row; every cell is kept as text for row-indexed parsing"""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise SchemaError(f"{path} is empty: a header row is required") from e
    except (OSError, UnicodeDecodeError) as e:
        raise ArtifactError(f"cannot read {path}: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    return frame


def write_frame(frame: pd.DataFrame, path) -> None:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise ArtifactError(f"cannot write {path}: {e}") from e


# ── artifacts ─────────────────────────────────────────────────────────

def save_model(model: FittedModel, path) -> None:
    write_json(path, model.to_dict())


def load_model(path) -> FittedModel:
    data = read_json(path)
    if data.get("kind") != "hazsurf.FittedModel":
        raise ArtifactError(f"{path} does not hold a fitted hazsurf model")
    try:
        return FittedModel.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise ArtifactError(f"{path} holds a malformed model: {e}") from e


def save_binned(binned: BinnedData, path, metadata: Optional[Dict[str, Any]] = None) -> None:
    data = {"kind": "hazsurf.BinnedData", "version": 1}
    data.update(binned.to_dict())
    if metadata:
        data["metadata"] = metadata
    write_json(path, data)


def load_binned(path) -> BinnedData:
    data = read_json(path)
    if data.get("kind") != "hazsurf.BinnedData":
        raise ArtifactError(f"{path} does not hold hazsurf binned data")
    try:
        return BinnedData.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise ArtifactError(f"{path} holds malformed binned data: {e}") from e


# ── long-format grids ─────────────────────────────────────────────────

def grid_frame(u_values: np.ndarray, s_values: np.ndarray, values: np.ndarray,
               present: Optional[np.ndarray] = None) -> pd.DataFrame:
    """One row per (u, s) cell, u varying slowest"""
    uu, ss = np.meshgrid(u_values, s_values, indexing="ij")
    if present is None:
        present = np.ones(values.shape, dtype=bool)
    return pd.DataFrame({
        "u": uu.ravel(),
        "s": ss.ravel(),
        "value": np.asarray(values, dtype=float).ravel(),
        "present": np.asarray(present, dtype=bool).ravel().astype(int),
    })


def write_grid(directory, name: str, u_values: np.ndarray, s_values: np.ndarray,
               values: np.ndarray, present: Optional[np.ndarray] = None,
               metadata: Optional[Dict[str, Any]] = None) -> Path:
    """Write <name>.csv in long format plus a <name>.json sidecar; returns the CSV path"""
    directory = Path(directory)
    csv_path = directory / f"{name}.csv"
    write_frame(grid_frame(u_values, s_values, values, present), csv_path)
    sidecar = {
        "kind": "hazsurf.Grid",
        "name": name,
        "n_u": int(len(u_values)),
        "n_s": int(len(s_values)),
        "u_values": np.asarray(u_values, dtype=float).tolist(),
        "s_values": np.asarray(s_values, dtype=float).tolist(),
    }
    sidecar.update(metadata or {})
    write_json(directory / f"{name}.json", sidecar)
    return csv_path


def read_grid(csv_path) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, Dict[str, Any]]:
    """Read a long-format grid back into (u_values, s_values, values, present, metadata)"""
    csv_path = Path(csv_path)
    frame = read_csv(csv_path)
    missing = [c for c in ("u", "s", "value", "present") if c not in frame.columns]
    if missing:
        raise SchemaError(f"{csv_path} is not a grid file: missing {', '.join(missing)}")
    try:
        u = frame["u"].astype(float).to_numpy()
        s = frame["s"].astype(float).to_numpy()
        values = frame["value"].astype(float).to_numpy()
        present = frame["present"].astype(int).to_numpy().astype(bool)
    except ValueError as e:
        raise ArtifactError(f"{csv_path} holds non-numeric grid values: {e}") from e

    u_values = np.unique(u)
    s_values = np.unique(s)
    if len(frame) != len(u_values) * len(s_values):
        raise ArtifactError(f"{csv_path} does not describe a complete rectangular grid")
    iu = np.searchsorted(u_values, u)
    js = np.searchsorted(s_values, s)
    matrix = np.full((len(u_values), len(s_values)), np.nan)
    mask = np.zeros(matrix.shape, dtype=bool)
    matrix[iu, js] = values
    mask[iu, js] = present

    sidecar_path = csv_path.with_suffix(".json")
    metadata = read_json(sidecar_path) if sidecar_path.exists() else {}
    return u_values, s_values, matrix, mask, metadata
