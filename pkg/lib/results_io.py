"""Readers and writers for every file the command line produces.

Cluster labels are written 1-based; the library works with 0-based labels.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from lib.basis import basis_from_dict
from lib.dataset import TimeTransform
from lib.errors import DataError, EmptyDataError, SchemaError
from lib.fkm_core import ClusterModel

TIMING_FIELDS = ("elapsed_ms", "timing_ms", "peak_rss_mb")


def write_json(data, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        json.dump(data, handle, indent=2, allow_nan=False)
        handle.write("\n")
    return path


def read_json(path):
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise DataError(f"{path} does not exist")
    except json.JSONDecodeError as error:
        raise DataError(f"{path} is not valid JSON: {error}")


def write_csv(frame, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def model_to_dict(model):
    return {
        "basis": model.basis.to_dict(),
        "transform": model.transform.to_dict(),
        "coefficients": model.coefficients.tolist(),
    }


def model_from_dict(data):
    try:
        basis = basis_from_dict(data["basis"])
        transform = TimeTransform.from_dict(data["transform"])
        coefficients = np.asarray(data["coefficients"], dtype=float)
    except (KeyError, TypeError, ValueError) as error:
        raise SchemaError(f"not a fit result: {error}")
    return ClusterModel(basis, coefficients, transform)


def fit_result_to_dict(result, config, ids):
    return {
        "config": config.to_dict(),
        **model_to_dict(result.model),
        "labels": {sid: int(label) + 1 for sid, label in zip(ids, result.labels)},
        "cluster_sizes": np.bincount(result.labels, minlength=result.model.k).tolist(),
        "empirical_loss": result.empirical_loss,
        "penalized_objective": result.penalized_objective,
        "iterations": result.iterations,
        "restart_index": result.restart_index,
        "converged": bool(result.converged),
        "repairs": result.repairs,
        "objective_trace": [float(v) for v in result.objective_trace],
        "restart_losses": [float(v) for v in result.restart_losses],
        "timing_ms": result.elapsed_ms,
    }


def write_labels(ids, labels, path):
    frame = pd.DataFrame({"id": list(ids), "cluster": np.asarray(labels, dtype=int) + 1})
    return write_csv(frame, path)


def read_labels(path):
    """Cluster labels as stored (strings), indexed by subject id."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"{path} does not exist")
    except pd.errors.EmptyDataError:
        raise EmptyDataError(f"{path} is empty")
    missing = [c for c in ("id", "cluster") if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    if frame.empty:
        raise EmptyDataError(f"{path} has no rows")
    if frame["id"].duplicated().any():
        raise SchemaError(f"{path}: duplicate subject id {frame['id'][frame['id'].duplicated()].iloc[0]!r}")
    return frame.set_index("id")["cluster"]


def write_centers_grid(t, centers, path):
    """Grid CSV with columns t, f1, ..., fK."""
    data = {"t": np.asarray(t, dtype=float)}
    for k, curve in enumerate(np.atleast_2d(centers)):
        data[f"f{k + 1}"] = curve
    return write_csv(pd.DataFrame(data), path)


def write_center_derivatives(t, slopes, curvatures, path):
    """Grid CSV with columns t, d1_f1, ..., d1_fK, d2_f1, ..., d2_fK."""
    data = {"t": np.asarray(t, dtype=float)}
    for prefix, curves in (("d1", slopes), ("d2", curvatures)):
        for k, curve in enumerate(np.atleast_2d(curves)):
            data[f"{prefix}_f{k + 1}"] = curve
    return write_csv(pd.DataFrame(data), path)


def read_centers_grid(path):
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise DataError(f"{path} does not exist")
    except pd.errors.EmptyDataError:
        raise EmptyDataError(f"{path} is empty")
    except pd.errors.ParserError as error:
        raise SchemaError(f"{path}: {error}")
    curve_cols = [c for c in frame.columns if c != "t"]
    if "t" not in frame.columns or not curve_cols:
        raise SchemaError(f"{path}: expected columns t, f1, ..., fK")
    try:
        t, centers = frame["t"].to_numpy(dtype=float), frame[curve_cols].to_numpy(dtype=float).T
    except (ValueError, TypeError):
        t = centers = None
    if t is None or not (np.all(np.isfinite(t)) and np.all(np.isfinite(centers))):
        raise SchemaError(f"{path}: center grid values must be finite numbers")
    return t, centers


def write_centers_json(t, centers, path):
    return write_json({"t": [float(v) for v in t],
                       "centers": np.atleast_2d(centers).tolist()}, path)


def load_center_curves(path):
    """Center curves of a fit result, a centers JSON or a grid CSV as callables on [0, 1].

    Grid curves are rescaled from their own t range onto [0, 1] and linearly
    interpolated; fit results are evaluated on their normalized time axis.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        t, centers = read_centers_grid(path)
    else:
        data = read_json(path)
        if "coefficients" in data:
            model = model_from_dict(data)
            return [lambda u, k=k: model.centers_at(u)[:, k] for k in range(model.k)]
        try:
            t = np.asarray(data["t"], dtype=float)
            centers = np.atleast_2d(np.asarray(data["centers"], dtype=float))
        except (KeyError, ValueError) as error:
            raise SchemaError(f"{path}: not a centers file: {error}")

    if t.size < 2 or centers.shape[1] != t.size or not np.all(np.diff(t) > 0):
        raise SchemaError(f"{path}: center grid must be increasing with one value per curve and point")
    u = (t - t[0]) / (t[-1] - t[0])
    return [lambda x, c=curve: np.interp(x, u, c) for curve in centers]


def strip_timing(data):
    """Copy of a result dictionary without wall-clock fields."""
    if isinstance(data, dict):
        return {k: strip_timing(v) for k, v in data.items() if k not in TIMING_FIELDS}
    if isinstance(data, list):
        return [strip_timing(v) for v in data]
    return data
