"""File formats: matrices, triples, vertex lists and sample streams.

Matrices are JSON objects ``{"order": n, "upper": [...]}`` with the packed
upper triangle in column order, or CSV files holding the full square matrix.
Every writer goes through a temporary file in the target directory and an
atomic rename, so readers never observe a half-written artifact.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .cone import DEFAULT_TOLERANCE, DistanceMatrix, order_from_length
from .errors import StructuralError
from .matdist import EmpiricalMatrixDistribution, MetricTriple


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return write_text(path, dumps(obj))


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{path}: not valid JSON ({exc})") from exc


def matrix_from_obj(obj, tolerance: float = DEFAULT_TOLERANCE, check: bool = True) -> DistanceMatrix:
    if isinstance(obj, dict) and "upper" in obj:
        upper = obj["upper"]
        order = obj.get("order", order_from_length(len(upper)))
        return DistanceMatrix(upper, tolerance, order=order, check=check)
    if isinstance(obj, dict) and "matrix" in obj:
        obj = obj["matrix"]
    if isinstance(obj, list) and obj and isinstance(obj[0], list):
        return DistanceMatrix.from_square(obj, tolerance, check=check)
    raise StructuralError("expected {'order', 'upper'} or a square array")


def read_square(path) -> np.ndarray:
    """Raw square array from a JSON or CSV file, without any validation."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
        try:
            return np.array([[float(x) for x in row] for row in rows])
        except ValueError as exc:
            raise StructuralError(f"{path}: non-numeric CSV entry ({exc})") from exc
    obj = _read_json(path)
    if isinstance(obj, dict) and "upper" in obj:
        return matrix_from_obj(obj, check=False).square().copy()
    if isinstance(obj, dict) and "matrix" in obj:
        obj = obj["matrix"]
    try:
        return np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise StructuralError(f"{path}: expected a numeric square array") from exc


def read_matrix(path, tolerance: float = DEFAULT_TOLERANCE, check: bool = True) -> DistanceMatrix:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return DistanceMatrix.from_square(read_square(path), tolerance, check=check)
    return matrix_from_obj(_read_json(path), tolerance, check)


def write_matrix(path, r: DistanceMatrix, **extra) -> Path:
    return write_json(path, {**r.to_dict(), **extra})


def matrix_to_csv(r: DistanceMatrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in r.square():
        writer.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def read_triple(path, tolerance: float = DEFAULT_TOLERANCE) -> MetricTriple:
    obj = _read_json(path)
    if not isinstance(obj, dict) or "weights" not in obj:
        raise StructuralError(f"{path}: a triple needs 'upper' and 'weights'")
    space = matrix_from_obj(obj, tolerance)
    return MetricTriple(space, obj["weights"], obj.get("label", Path(path).stem))


def write_triple(path, T: MetricTriple) -> Path:
    return write_json(path, T.to_dict())


def write_vertices(path, vertices) -> Path:
    return write_json(path, np.asarray(vertices).tolist())


def samples_jsonl(E: EmpiricalMatrixDistribution) -> str:
    iu, ju = np.triu_indices(E.dimension, 1)
    # packed column order: sort the (i, j) pairs by column first
    order = np.lexsort((iu, ju))
    lines = (json.dumps({"order": E.dimension, "upper": m[iu[order], ju[order]].tolist()})
             for m in E.matrices)
    return "".join(line + "\n" for line in lines)


def read_samples(path) -> list[DistanceMatrix]:
    with open(path, encoding="utf-8") as fh:
        return [matrix_from_obj(json.loads(line)) for line in fh if line.strip()]


def histogram_csv(values: Iterable[float], bins: int) -> str:
    if bins < 1:
        raise StructuralError("bins must be at least 1")
    values = np.asarray(list(values), dtype=float)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_left", "bin_right", "count"])
    if values.size == 0:
        writer.writerow([0, 0, 0])
        return buf.getvalue()
    counts, edges = np.histogram(values, bins=bins)
    for left, right, c in zip(edges[:-1], edges[1:], counts):
        writer.writerow([repr(float(left)), repr(float(right)), int(c)])
    return buf.getvalue()
