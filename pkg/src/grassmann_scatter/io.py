"""File formats: CSV matrices, JSON subspace data, JSON reports.

Matrices travel as plain row-major CSV.  A dataset of subspaces is a JSON
object

    {"m": 3, "r": 2, "points": [[[...], ...], ...], "weights": [...]}

where points[j] is the j-th m x r basis matrix (nested lists, rows outer)
and weights is optional (uniform when missing).  Reports are dataclasses
serialized field-by-field with arrays as nested lists.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .errors import DomainError
from .grassmann import Empirical
from .manifold import check_scatter


def read_matrix_csv(path) -> np.ndarray:
    """Load a matrix from comma-separated values (one row per line)."""
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DomainError(f"malformed CSV matrix in {path}: {exc}") from exc


def write_matrix_csv(path, M) -> None:
    np.savetxt(path, np.asarray(M, dtype=float), delimiter=",")


def read_scatter_csv(path) -> np.ndarray:
    """Load and validate a unimodular SPD matrix from CSV."""
    return check_scatter(read_matrix_csv(path), name=str(path))


def read_measure_json(path) -> Empirical:
    """Load an empirical subspace measure from its JSON description."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"malformed JSON in {path}: {exc}") from exc
    try:
        m, r = int(doc["m"]), int(doc["r"])
        points = np.asarray(doc["points"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"{path} must carry m, r and a points array: {exc}") from exc
    if points.ndim != 3 or points.shape[1:] != (m, r):
        raise DomainError(
            f"{path}: points have shape {points.shape}, expected (n, {m}, {r})"
        )
    weights = doc.get("weights")
    return Empirical(points, None if weights is None else np.asarray(weights, dtype=float))


def write_measure_json(path, meas: Empirical) -> None:
    doc = {
        "m": meas.m,
        "r": meas.r,
        "points": meas.points.tolist(),
        "weights": meas.weights.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def to_jsonable(obj):
    """Recursively convert dataclasses/arrays/scalars into JSON-ready values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def write_report_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2)
