"""JSON matrix encoding and deterministic CSV output."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .linalg import ValidationError


def fmt(x) -> str:
    """17 significant digits; round-trips any double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def matrix_to_json(a) -> list:
    """Row-major nested list of [re, im] pairs."""
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(data, path: str = "matrix") -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: not a numeric array ({exc})") from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{path}: expected a square array of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for json.dump."""
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
        return x if math.isfinite(x) else fmt(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def instance_to_json(instance) -> dict:
    """Matrices of a clock instance, for reuse outside this package."""
    out = {
        "name": instance.name,
        "parameter_name": instance.parameter_name,
        "horizon": instance.horizon,
        "declared_bandwidth": instance.declared_bandwidth,
        "params": instance.params,
        "rho0": matrix_to_json(instance.rho0),
        "measurement": {
            "labels": list(instance.measurement.labels),
            "projections": [matrix_to_json(p) for p in instance.measurement.projections],
        },
    }
    h = instance.hamiltonian
    if h is not None:
        out["hamiltonian"] = matrix_to_json(h)
    gen = instance.generator
    if hasattr(gen, "rate"):
        out["rate"] = gen.rate
    return out
