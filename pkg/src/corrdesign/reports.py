"""CSV and JSON report files with a metadata header."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from . import __version__

__all__ = ["metadata", "write_csv", "read_csv", "write_json", "read_json"]

TOOL = "corrdesign"


def metadata(seed: int, config_hash: str, **extra) -> dict:
    meta = {"tool": TOOL, "version": __version__, "seed": int(seed), "config_hash": config_hash}
    meta.update(extra)
    return meta


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, meta: dict, header, rows) -> Path:
    """Metadata as ``# key: <json>`` lines, then a mandatory header row."""
    path = Path(path)
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}: {json.dumps(_jsonable(value), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path):
    """Inverse of :func:`write_csv`: ``(metadata, header, rows)``."""
    meta, lines = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# ") and not lines:
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        else:
            lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    rows = [[_parse_cell(c) for c in row] for row in reader]
    return meta, header, rows


def write_json(path, meta: dict, data: dict) -> Path:
    path = Path(path)
    doc = {"metadata": _jsonable(meta), "data": _jsonable(data)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return doc["metadata"], doc["data"]
