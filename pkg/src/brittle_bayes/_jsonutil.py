"""Small helpers shared by the JSON serializers."""

from __future__ import annotations

import json
import math
from typing import Any


def encode_float(x: float) -> float | str:
    """Map IEEE infinities to the strings used in serialized output."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return x


def decode_float(x: Any) -> float:
    if isinstance(x, str):
        key = x.strip().lower()
        if key in ("+inf", "inf", "infinity", "+infinity"):
            return math.inf
        if key in ("-inf", "-infinity"):
            return -math.inf
        if key == "nan":
            return math.nan
        raise ValueError(f"not a number: {x!r}")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"not a number: {x!r}")
    return float(x)


def encode_floats(values) -> list:
    return [encode_float(v) for v in values]


def decode_floats(values) -> list[float]:
    return [decode_float(v) for v in values]


def dumps(doc: Any) -> str:
    """Deterministic JSON text (sorted keys, fixed separators)."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
