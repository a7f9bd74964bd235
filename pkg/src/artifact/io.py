"""Data ingestion and result serialization.

Documents are JSON objects.  Non-finite reals are written as ``null``;
finite reals use Python's shortest round-trip representation.  Delimited
tables print reals with 17 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError


def read_xy(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``x,y`` observations from comma-delimited text.

    Lines starting with ``#`` and blank lines are skipped.  The first
    remaining line must be the header ``x,y``.  Rows are returned sorted by
    ``x`` (stable).  Errors report 1-based physical line numbers.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_xy(text)


def parse_xy(text: str) -> tuple[np.ndarray, np.ndarray]:
    header = None
    xs, ys = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            if [f.lower() for f in fields] != ["x", "y"]:
                raise ParseError(f"expected header 'x,y', got {line!r}", lineno)
            header = fields
            continue
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", lineno)
        try:
            x, y = float(fields[0]), float(fields[1])
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}", lineno) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError(f"non-finite value in {line!r}", lineno)
        xs.append(x)
        ys.append(y)
    if header is None:
        raise ParseError("missing header 'x,y'")
    if not xs:
        raise ParseError("no observations after the header")
    x = np.asarray(xs)
    order = np.argsort(x, kind="stable")
    return x[order], np.asarray(ys)[order]


def read_config(path) -> dict:
    """A JSON object of parameters; ``None`` gives an empty config."""
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")
    return doc


def to_jsonable(obj):
    """Recursively convert numpy types; non-finite reals become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc) -> str:
    return json.dumps(to_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def loads(text: str):
    return json.loads(text)


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "%.17g" % v if math.isfinite(v) else ""
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(format_value(e) for e in np.asarray(v, dtype=object).ravel())
    return str(v)


def table(rows: list[dict], columns=None) -> str:
    """Comma-delimited table with a header line."""
    if not rows:
        return ""
    if columns is None:
        columns = list(rows[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def read_table(text: str) -> list[dict]:
    """Inverse of :func:`table` for numeric columns (empty cells become ``None``)."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        rec = {}
        for k, v in row.items():
            if v == "":
                rec[k] = None
            else:
                try:
                    rec[k] = int(v)
                except ValueError:
                    try:
                        rec[k] = float(v)
                    except ValueError:
                        rec[k] = v
        out.append(rec)
    return out


def require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)
