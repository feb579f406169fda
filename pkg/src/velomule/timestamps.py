"""Canonical timestamp handling.

All record timestamps are naive local civil time rendered as
``YYYY-MM-DD HH:MM:SS`` (single space, zero-padded fields). No time-zone
math happens anywhere in the package; values round-trip bit-exactly
through :func:`parse_timestamp` / :func:`render_timestamp`.
"""

from __future__ import annotations

import calendar
from datetime import date, datetime

from .errors import ParseError

__all__ = [
    "Timestamp",
    "parse_timestamp",
    "render_timestamp",
    "parse_date",
    "render_date",
    "minute_of_day",
    "day_of_week",
    "parse_row_timestamp",
]

# The package-wide timestamp type: a naive datetime (proleptic Gregorian).
Timestamp = datetime

_PATTERN = "dddd-dd-dd dd:dd:dd"
_DAY_NAMES = (
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
)


def parse_timestamp(text: str) -> Timestamp:
    """Parse the canonical form ``YYYY-MM-DD HH:MM:SS`` strictly.

    Raises ParseError carrying the byte offset of the first offending
    character and a human-readable reason.
    """
    for i, kind in enumerate(_PATTERN):
        if i >= len(text):
            raise ParseError(i, f"truncated: expected {len(_PATTERN)} characters, got {len(text)}")
        c = text[i]
        if kind == "d":
            if not c.isascii() or not c.isdigit():
                raise ParseError(i, f"expected digit, got {c!r}")
        elif c != kind:
            raise ParseError(i, f"expected {kind!r}, got {c!r}")
    if len(text) > len(_PATTERN):
        raise ParseError(len(_PATTERN), "trailing characters after timestamp")

    year = int(text[0:4])
    month = int(text[5:7])
    day = int(text[8:10])
    hour = int(text[11:13])
    minute = int(text[14:16])
    second = int(text[17:19])

    if year < 1:
        raise ParseError(0, "year out of range")
    if not 1 <= month <= 12:
        raise ParseError(5, "month out of range")
    if not 1 <= day <= calendar.monthrange(year, month)[1]:
        raise ParseError(8, "day out of range")
    if hour > 23:
        raise ParseError(11, "hour out of range")
    if minute > 59:
        raise ParseError(14, "minute out of range")
    if second > 59:
        raise ParseError(17, "second out of range")

    return datetime(year, month, day, hour, minute, second)


def render_timestamp(ts: Timestamp) -> str:
    """Inverse of parse_timestamp; sub-second precision is not representable."""
    # Not strftime: %Y drops leading zeros for years below 1000 on some libcs.
    return (f"{ts.year:04d}-{ts.month:02d}-{ts.day:02d}"
            f" {ts.hour:02d}:{ts.minute:02d}:{ts.second:02d}")


def parse_date(text: str) -> date:
    """Parse a bare calendar date ``YYYY-MM-DD`` with the same strictness."""
    ts = parse_timestamp(text + " 00:00:00")
    return ts.date()


def render_date(d: date) -> str:
    return f"{d.year:04d}-{d.month:02d}-{d.day:02d}"


def minute_of_day(ts: Timestamp) -> int:
    return ts.hour * 60 + ts.minute


def day_of_week(ts: Timestamp | date) -> str:
    """Weekday name by proleptic Gregorian rules (Monday first)."""
    return _DAY_NAMES[ts.weekday()]


def parse_row_timestamp(text: str) -> Timestamp:
    """Parse a timestamp field from a CSV row.

    The canonical form is tried first. Real exports of this data family
    also write ``M/D/YYYY H:MM`` (optionally with seconds); that variant
    is accepted here, and only here, so that files normalize to canonical
    timestamps at the ingest boundary.
    """
    text = text.strip()
    try:
        return parse_timestamp(text)
    except ParseError:
        pass
    for fmt in ("%m/%d/%Y %H:%M:%S", "%m/%d/%Y %H:%M"):
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    raise ParseError(0, f"unrecognized timestamp: {text!r}")
