"""Canonical JSON emission for artifacts that must be byte-reproducible.

Two rules make reports diffable across runs and platforms: keys keep their
construction order (callers build dicts in a fixed order), and every float is
written with exactly six decimal places. ``canonical_float`` applies the same
quantization on the way in, so a written value parses back to the identical
float and round-tripping a document is the identity.
"""

from __future__ import annotations

import json
from typing import Any


def canonical_float(value: float) -> float:
    """The float that six-decimal formatting of ``value`` parses back to."""
    return float(format(float(value), ".6f"))


def dumps(obj: Any) -> str:
    out: list[str] = []
    _emit(obj, out)
    return "".join(out)


def _emit(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format(obj, ".6f"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                out.append(",")
            if not isinstance(key, str):
                raise TypeError(f"non-string key: {key!r}")
            out.append(json.dumps(key, ensure_ascii=True))
            out.append(":")
            _emit(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, value in enumerate(obj):
            if i:
                out.append(",")
            _emit(value, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
