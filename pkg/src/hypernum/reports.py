"""Deterministic report serialization with atomic writes."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path


def _finite(obj):
    # strict JSON has no NaN / Infinity; those become null
    if hasattr(obj, "item") and not isinstance(obj, (list, dict)):  # numpy scalars
        obj = obj.item() if getattr(obj, "ndim", 1) == 0 else obj.tolist()
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def json_text(obj) -> str:
    return json.dumps(_finite(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if len(r) != len(header):
            raise ValueError(f"row has {len(r)} fields, header has {len(header)}")
        w.writerow(r)
    return buf.getvalue()


def atomic_write_text(path, text: str) -> Path:
    """Write UTF-8 text with LF endings to a temp file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def emit_report(records, path) -> Path:
    """Write a list of records as a JSON array."""
    return atomic_write_text(path, json_text(list(records)))


def emit_csv(header, rows, path) -> Path:
    return atomic_write_text(path, csv_text(header, rows))


def load_report(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
