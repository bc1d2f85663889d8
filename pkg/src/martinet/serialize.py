"""JSON and CSV output for results (dataclasses, numpy values, points, paths)."""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import math

import numpy as np

from .core import SpacePoint, SurfacePoint


def to_plain(obj):
    """Recursively convert to JSON-ready builtins.

    Non-finite floats become the strings "inf", "-inf" and "nan" so the
    output stays strict JSON.
    """
    if isinstance(obj, enum.Enum):
        return to_plain(obj.value)
    if isinstance(obj, (SpacePoint, SurfacePoint)):
        return [float(c) for c in obj]
    if hasattr(obj, "to_dict"):
        return to_plain(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps_json(obj) -> str:
    return json.dumps(to_plain(obj), indent=2, sort_keys=True) + "\n"


def flatten(d: dict, prefix: str = "") -> dict:
    """Nested dicts to dotted keys; lists are kept as JSON text."""
    out = {}
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v, sort_keys=True)
        else:
            out[key] = v
    return out


def dumps_csv(rows: list[dict]) -> str:
    """Header row from the union of (flattened) keys, in first-seen order."""
    flat = [flatten(to_plain(r)) for r in rows]
    header: list[str] = []
    for r in flat:
        header.extend(k for k in r if k not in header)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for r in flat:
        w.writerow(r)
    return buf.getvalue()


def path_rows(path, fp, per_segment: int = 16) -> list[dict]:
    """(t, x, y, z) rows sampled along a HorizontalPath."""
    return [{"t": t, "x": p.x, "y": p.y, "z": p.z} for t, p in path.sample(fp, per_segment)]


__all__ = ["to_plain", "dumps_json", "dumps_csv", "flatten", "path_rows"]
