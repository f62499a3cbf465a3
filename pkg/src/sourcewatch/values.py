"""Canonicalization of attribute values.

Every attribute value is reduced to a canonical form before comparison:

* ``categorical`` / ``free-text``  -> whitespace-normalized, casefolded string
* ``duration``                     -> seconds as float ("none" -> 0, "unlimited" -> inf)
* ``rate``                         -> period in seconds as float ("1/h" -> 3600)
* ``percentage``                   -> float in [0, 100]

Rates are deliberately canonicalized to periods so that durations and rates
share one numeric scale for band comparators.
"""

from __future__ import annotations

import math
import re

from .errors import ValueKindMismatch

VALUE_KINDS = ("categorical", "duration", "rate", "percentage", "free-text")

_SECONDS_PER_UNIT = {
    "ms": 0.001,
    "millisecond": 0.001,
    "milliseconds": 0.001,
    "s": 1.0,
    "sec": 1.0,
    "secs": 1.0,
    "second": 1.0,
    "seconds": 1.0,
    "min": 60.0,
    "mins": 60.0,
    "minute": 60.0,
    "minutes": 60.0,
    "h": 3600.0,
    "hr": 3600.0,
    "hrs": 3600.0,
    "hour": 3600.0,
    "hours": 3600.0,
    "d": 86400.0,
    "day": 86400.0,
    "days": 86400.0,
}

_DURATION_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*([a-zA-Z]+)?\s*$")
_RATE_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*/\s*([a-zA-Z]+)\s*$")


def normalize_text(value: str) -> str:
    """Collapse whitespace and casefold so config authors never fight
    invisible differences."""
    return " ".join(value.split()).casefold()


def parse_duration(value) -> float:
    """Parse a duration into seconds.

    Accepts numbers (seconds), strings such as "5 s", "1 min.", "20 min",
    "1h", and the sentinels "none" (0 s) and "unlimited" (+inf).
    """
    if isinstance(value, bool):
        raise ValueKindMismatch(f"not a duration: {value!r}")
    if isinstance(value, (int, float)):
        if value < 0 or math.isnan(value):
            raise ValueKindMismatch(f"negative or NaN duration: {value!r}")
        return float(value)
    if isinstance(value, str):
        text = normalize_text(value).rstrip(".")
        if text == "none":
            return 0.0
        if text in ("unlimited", "infinite", "inf"):
            return math.inf
        match = _DURATION_RE.match(text)
        if match:
            number = float(match.group(1))
            unit = match.group(2) or "s"
            if unit in _SECONDS_PER_UNIT:
                return number * _SECONDS_PER_UNIT[unit]
    raise ValueKindMismatch(f"cannot parse duration: {value!r}")


def parse_rate(value) -> float:
    """Parse an update rate into its period in seconds.

    Accepts "1/s", "2/min", "1/h" style strings, plain numbers interpreted
    as events per second, and "none" for sources that never update (period
    +inf).
    """
    if isinstance(value, bool):
        raise ValueKindMismatch(f"not a rate: {value!r}")
    if isinstance(value, (int, float)):
        if value <= 0 or math.isnan(value):
            raise ValueKindMismatch(f"non-positive rate: {value!r}")
        return 1.0 / float(value)
    if isinstance(value, str):
        text = normalize_text(value).rstrip(".")
        if text == "none":
            return math.inf
        match = _RATE_RE.match(text)
        if match:
            count = float(match.group(1))
            unit = match.group(2)
            if count > 0 and unit in _SECONDS_PER_UNIT:
                return _SECONDS_PER_UNIT[unit] / count
    raise ValueKindMismatch(f"cannot parse rate: {value!r}")


def parse_percentage(value) -> float:
    if isinstance(value, bool):
        raise ValueKindMismatch(f"not a percentage: {value!r}")
    if isinstance(value, (int, float)):
        number = float(value)
    elif isinstance(value, str):
        text = normalize_text(value).rstrip("%").strip()
        try:
            number = float(text)
        except ValueError:
            raise ValueKindMismatch(f"cannot parse percentage: {value!r}") from None
    else:
        raise ValueKindMismatch(f"cannot parse percentage: {value!r}")
    if math.isnan(number) or not 0.0 <= number <= 100.0:
        raise ValueKindMismatch(f"percentage out of [0, 100]: {value!r}")
    return number


def canonicalize(value, kind: str):
    """Reduce a raw attribute value to its canonical comparison form."""
    if kind in ("categorical", "free-text"):
        if not isinstance(value, str):
            raise ValueKindMismatch(f"expected text for {kind} value, got {value!r}")
        return normalize_text(value)
    if kind == "duration":
        return parse_duration(value)
    if kind == "rate":
        return parse_rate(value)
    if kind == "percentage":
        return parse_percentage(value)
    raise ValueKindMismatch(f"unknown value kind: {kind!r}")
