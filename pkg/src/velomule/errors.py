"""Exception types shared across the package."""


class VelomuleError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(VelomuleError):
    """A timestamp (or other scalar) did not match its canonical text form.

    Carries the byte offset of the first offending character and a reason.
    """

    def __init__(self, offset: int, reason: str):
        super().__init__(f"offset {offset}: {reason}")
        self.offset = offset
        self.reason = reason


class SchemaError(VelomuleError):
    """A required column is missing from a CSV header."""

    def __init__(self, column: str):
        super().__init__(f"missing column: {column}")
        self.column = column


class RowError(VelomuleError):
    """A data row could not be converted to a record."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class ReferentialError(VelomuleError):
    """A status or trip row references a station that does not exist (strict mode)."""


class UnknownStationError(VelomuleError):
    """An operation was asked about a station id that is not in the store."""

    def __init__(self, station_id: int):
        super().__init__(f"unknown station: {station_id}")
        self.station_id = station_id


class NoHistoryError(VelomuleError):
    """Every forecast factor came up empty; there is nothing to predict from."""


class NoDataError(VelomuleError):
    """The query window or instant contains no usable records."""


class ConfigError(VelomuleError):
    """A configuration value is missing or invalid; names the offending field."""

    def __init__(self, field: str, reason: str = ""):
        msg = f"invalid config field: {field}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
        self.field = field
        self.reason = reason


class TraceError(VelomuleError):
    """A trace event stream violates the send/receive pairing contract."""
