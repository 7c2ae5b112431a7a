"""JSON and CSV helpers for reports and point clouds.

JSON has no infinity; non-finite floats are written as the strings
``"Infinity"``, ``"-Infinity"`` and ``"NaN"``, which ``float()`` parses back.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigParse


def jsonable(obj):
    """Recursively convert numpy values and non-finite floats for ``json``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, allow_nan=False, ensure_ascii=False)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParse(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigParse(f"{path}: top level must be a JSON object")
    return data


def write_points_csv(path, points) -> None:
    """One point per row, no header."""
    np.savetxt(path, np.asarray(points, dtype=float), delimiter=",", fmt="%.17g")


def read_points_csv(path) -> np.ndarray:
    try:
        pts = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except (OSError, ValueError) as exc:
        raise ConfigParse(f"cannot read points from {path}: {exc}") from exc
    return pts


def write_features_csv(path, feats, labels) -> None:
    """2-D feature dump with an ``x,y,label`` header."""
    feats = np.asarray(feats, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "label"])
        for (x, y), lab in zip(feats, labels):
            writer.writerow([repr(float(x)), repr(float(y)), int(lab)])


def read_features_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    feats = np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
    labels = np.array([int(r["label"]) for r in rows], dtype=int)
    return feats, labels
