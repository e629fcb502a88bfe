"""Frame serialization with a byte-stable float rule.

Frames are JSON objects, one per line, keys in insertion order, no
whitespace. Every float is written as ``format(x, ".16e")`` — 17
significant digits, enough that IEEE-754 doubles survive a round trip
exactly — so two conforming implementations emit identical bytes for
identical values. ``json.dumps`` alone would not guarantee that across
languages, hence the hand-rolled writer.
"""

from __future__ import annotations

import json

PROTOCOL_VERSION = 1


def encode_frame(obj: dict) -> str:
    """One frame as a single line (no trailing newline)."""
    if not isinstance(obj, dict):
        raise TypeError("a frame must be a JSON object")
    return _write(obj)


def _write(v) -> str:
    if v is None:
        return "null"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, float):
        return format(v, ".16e")
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_write(x) for x in v) + "]"
    if isinstance(v, dict):
        parts = (f"{json.dumps(str(k))}:{_write(x)}" for k, x in v.items())
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot encode {type(v).__name__} in a frame")
