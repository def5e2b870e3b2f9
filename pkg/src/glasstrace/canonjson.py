"""Canonical JSON encoding shared by scene files, annotations and reports.

Canonical form: keys sorted, compact separators, floats printed with 17
significant digits (shortest form '%.17g' produces), single trailing
newline.  Two semantically equal documents always produce identical bytes,
which is what the determinism contracts lean on.
"""

import json
import math


class CanonError(ValueError):
    pass


def _fmt_float(x):
    if not math.isfinite(x):
        raise CanonError(f"non-finite float {x!r} not representable")
    if x == 0.0:
        x = 0.0  # collapse -0.0 so reserialization is stable
    return format(x, ".17g")


def _encode(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _encode(v, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for i, k in enumerate(sorted(obj)):
            if not isinstance(k, str):
                raise CanonError(f"non-string key {k!r}")
            if i:
                out.append(",")
            out.append(json.dumps(k, ensure_ascii=True))
            out.append(":")
            _encode(obj[k], out)
        out.append("}")
    else:
        raise CanonError(f"unsupported type {type(obj).__name__}")


def dumps(obj) -> bytes:
    out = []
    _encode(obj, out)
    out.append("\n")
    return "".join(out).encode("ascii")


def loads(data) -> object:
    """Parse JSON bytes/str; syntax errors keep json's line/column info."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data)


class FieldError(ValueError):
    """Schema violation while decoding, carrying the offending field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


def check_keys(obj, path, required, optional=()):
    """Reject unknown fields and report missing ones by name."""
    if not isinstance(obj, dict):
        raise FieldError(path, f"expected object, got {type(obj).__name__}")
    allowed = set(required) | set(optional)
    for k in obj:
        if k not in allowed:
            raise FieldError(f"{path}.{k}", "unknown field")
    for k in required:
        if k not in obj:
            raise FieldError(f"{path}.{k}", "missing field")
    return obj
