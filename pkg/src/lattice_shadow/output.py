"""Deterministic CSV/JSON artifact writers.

Floating values are serialized with ``repr`` (the shortest string that
parses back to the identical double), line endings are '\\n', and the first
line of every artifact names the tool version and the hash of the effective
configuration, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from typing import Mapping, Sequence

from .errors import ValidationError


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_field(s: str) -> str:
    if any(ch in s for ch in (",", '"', "\n", "\r")):
        return '"' + s.replace('"', '""') + '"'
    return s


def emit_csv(table: Mapping[str, Sequence], path, header_line: str = "") -> None:
    """Write named columns of scalars as CSV (plus an optional '#' header line)."""
    names = list(table.keys())
    columns = [list(table[name]) for name in names]
    if columns:
        n = len(columns[0])
        if any(len(col) != n for col in columns):
            raise ValidationError("emit_csv requires a rectangular table")
    else:
        n = 0
    lines = []
    if header_line:
        lines.append(f"# {header_line}")
    lines.append(",".join(_csv_field(name) for name in names))
    for i in range(n):
        lines.append(",".join(_csv_field(format_value(col[i])) for col in columns))
    data = "\n".join(lines) + "\n"
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from exc


def emit_json(payload: dict, path, header: dict | None = None) -> None:
    """Write a JSON artifact with the identifying header fields first."""
    doc = dict(header or {})
    doc.update(payload)
    data = json.dumps(doc, indent=2) + "\n"
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from exc


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)
