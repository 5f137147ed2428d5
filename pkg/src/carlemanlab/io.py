"""CSV / JSON emission and the system definition file format.

System definition file (JSON)::

    {
      "dim": 2,
      "f2": [[0, 0, 1.0]],          # [row, column, value], column = i*N + j
      "f1": [[-1.0, 0.0], [-1.0, -1.0]],
      "f0": [0.0, 0.0]
    }

``f1`` may also be given as a flat row-major list of ``N*N`` numbers. An
optional ``"name"`` string is carried through. Floats are written with
``repr`` precision so a load/dump cycle is lossless.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
from pathlib import Path

import numpy as np

from .errors import ContractError, ParseError
from .quadratic_ode import QuadraticSystem

CSV_FORMAT = "{:.17g}"


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return CSV_FORMAT.format(x)


def write_csv(path, header, columns) -> Path:
    """Write equal-length columns under ``header`` with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    if len({c.size for c in cols}) > 1:
        raise ContractError("CSV columns have different lengths")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Return ``(header, 2-D float array)`` from a file written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    return obj


def write_json(path, record) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(record), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def system_to_dict(sys: QuadraticSystem) -> dict:
    out = {
        "dim": sys.dim,
        "f2": [[int(r), int(c), float(v)]
               for r, c, v in zip(sys.f2_rows, sys.f2_cols, sys.f2_vals)],
        "f1": sys.f1.tolist(),
        "f0": sys.f0.tolist(),
    }
    if sys.name:
        out["name"] = sys.name
    return out


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def system_from_dict(doc, text=None) -> QuadraticSystem:
    """Validate a parsed system document; ``text`` is used for line numbers."""
    if not isinstance(doc, dict):
        raise ParseError("top level must be a JSON object", line=1 if text else None)
    for key in ("dim", "f2", "f1", "f0"):
        if key not in doc:
            raise ParseError("missing required field", field=key)

    def bad(msg, key):
        return ParseError(msg, field=key, line=_line_of(text, key.split("[")[0]))

    n = doc["dim"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise bad(f"dim must be a positive integer, got {n!r}", "dim")

    def number(v, key):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise bad(f"expected a finite number, got {v!r}", key)
        return float(v)

    if not isinstance(doc["f2"], list):
        raise bad("f2 must be a list of [row, col, value] triples", "f2")
    rows, cols, vals = [], [], []
    for i, entry in enumerate(doc["f2"]):
        key = f"f2[{i}]"
        if not isinstance(entry, list) or len(entry) != 3:
            raise bad("expected [row, col, value]", key)
        r, c, v = entry
        if isinstance(r, bool) or not isinstance(r, int) or not 0 <= r < n:
            raise bad(f"row {r!r} not an integer in [0, {n})", key)
        if isinstance(c, bool) or not isinstance(c, int) or not 0 <= c < n * n:
            raise bad(f"column {c!r} not an integer in [0, {n * n})", key)
        rows.append(r)
        cols.append(c)
        vals.append(number(v, key))

    f1 = doc["f1"]
    if not isinstance(f1, list):
        raise bad("f1 must be a list", "f1")
    if f1 and all(isinstance(r, list) for r in f1):
        if len(f1) != n or any(len(r) != n for r in f1):
            raise bad(f"f1 must be {n}x{n}", "f1")
        flat = [x for r in f1 for x in r]
    else:
        flat = f1
        if len(flat) != n * n:
            raise bad(f"flat f1 must hold {n * n} numbers, got {len(flat)}", "f1")
    f1_arr = np.array([number(x, "f1") for x in flat]).reshape(n, n)

    f0 = doc["f0"]
    if not isinstance(f0, list) or len(f0) != n:
        raise bad(f"f0 must be a list of {n} numbers", "f0")
    f0_arr = np.array([number(x, "f0") for x in f0])
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise bad("name must be a string", "name")
    return QuadraticSystem(n, rows, cols, vals, f1_arr, f0_arr, name=name)


def loads_system(text: str) -> QuadraticSystem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg} at column {exc.colno}", line=exc.lineno) from exc
    return system_from_dict(doc, text)


def dumps_system(sys: QuadraticSystem) -> str:
    return json.dumps(system_to_dict(sys), indent=2) + "\n"


def read_system(path) -> QuadraticSystem:
    return loads_system(Path(path).read_text())


def write_system(path, sys: QuadraticSystem) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_system(sys))
    return path


def default_outdir() -> Path:
    return Path(os.environ.get("CARLEMANLAB_OUT", "out"))
