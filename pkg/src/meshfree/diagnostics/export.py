"""CSV writers with a JSON metadata sidecar (``<name>.csv`` + ``<name>.json``)."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if hasattr(v, "label"):
        return v.label
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"cannot serialise {type(v).__name__}")


def write_report(path, header, rows, meta=None):
    """Write ``rows`` under ``header`` to ``path`` (.csv) and ``meta`` to the .json sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_plain(v) if not isinstance(v, (str, int, float)) else v for v in r])
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta or {}, indent=2, sort_keys=True, default=_plain))
    return path, sidecar


def read_report(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    meta_path = Path(path).with_suffix(".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return rows[0], rows[1:], meta
