"""Deterministic JSON and CSV writers.

Floats are rendered at 17 significant digits, keys sorted, LF line
endings; two runs with the same inputs produce byte-identical files.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["format_float", "dumps_json", "write_json", "write_csv"]


def format_float(v):
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        raise ValueError(f"non-finite float {v} cannot be serialized")
    s = format(v, ".17g")
    return s


def _render(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        import json
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        first = True
        for key in sorted(obj):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            if not first:
                out.append(", ")
            first = False
            import json
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(": ")
            _render(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        items = list(obj)
        for i, item in enumerate(items):
            if i:
                out.append(", ")
            _render(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj):
    out = []
    _render(obj, out)
    return "".join(out) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj))


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
