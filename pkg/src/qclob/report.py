"""CSV and JSON emitters.  Files are written atomically via rename."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _plain(obj):
    if isinstance(obj, Enum):
        return obj.value
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(_plain(k)): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def to_json(obj) -> str:
    return json.dumps(_plain(obj), indent=1, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, to_json(obj))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else _fmt(v) for v in row])
    return atomic_write(path, buf.getvalue())


def _fmt(v):
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def write_table(directory, name: str, header: Sequence[str], rows: Sequence[Sequence], meta=None) -> list:
    """``name.csv`` plus ``name.json`` holding the same rows (and ``meta``)."""
    directory = Path(directory)
    rows = [list(r) for r in rows]
    records = [dict(zip(header, r)) for r in rows]
    doc = {"columns": list(header), "rows": records}
    if meta:
        doc.update(meta)
    return [
        write_csv(directory / f"{name}.csv", header, rows),
        write_json(directory / f"{name}.json", doc),
    ]


def write_record(directory, name: str, record, meta=None) -> list:
    """A flat record as a two-column CSV plus JSON."""
    data = _plain(record)
    flat = _flatten(data)
    doc = dict(data) if isinstance(data, dict) else {"value": data}
    if meta:
        doc.update(meta)
    directory = Path(directory)
    return [
        write_csv(directory / f"{name}.csv", ("field", "value"), sorted(flat.items())),
        write_json(directory / f"{name}.json", doc),
    ]


def _flatten(data, prefix="") -> dict:
    out = {}
    if isinstance(data, dict):
        for k, v in data.items():
            out.update(_flatten(v, f"{prefix}{k}."))
    else:
        out[prefix.rstrip(".")] = data
    return out
