"""CSV ingestion: records for the three datasets and the immutable HistoryStore.

The three input files are the station roster, the dock status log, and the
trip log. Parsing is header-driven (column order never matters), malformed
rows are skipped and counted unless ``strict`` is set, and the finished
store is treated as immutable: analytics only ever read from it.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import pickle
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import csv

from .errors import ParseError, ReferentialError, RowError, SchemaError, UnknownStationError
from .timestamps import Timestamp, parse_row_timestamp

__all__ = [
    "StationRecord",
    "StatusRecord",
    "TripRecord",
    "ParseResult",
    "BuildSummary",
    "HistoryStore",
    "parse_station_csv",
    "parse_status_csv",
    "parse_trip_csv",
    "build_store",
    "load_history",
]

# Seconds of disagreement tolerated between the duration column and the
# start/end timestamps before a trip is counted as inconsistent. Both values
# are kept either way; nothing guesses which one the source meant.
DURATION_MISMATCH_TOLERANCE_S = 60


@dataclass(frozen=True)
class StationRecord:
    station_id: int
    name: str
    latitude: float
    longitude: float
    dock_count: int
    landmark: str
    installation: date


@dataclass(frozen=True)
class StatusRecord:
    station_id: int
    bikes_available: int
    docks_available: int
    at: Timestamp


@dataclass(frozen=True)
class TripRecord:
    trip_id: int
    duration: int
    start_at: Timestamp
    end_at: Timestamp
    start_station_id: int
    end_station_id: int
    start_terminal: str
    end_terminal: str
    bike_no: int
    zip_code: str
    subscription_type: str

    def duration_mismatch(self) -> bool:
        """True when the duration column disagrees with the timestamps."""
        span = (self.end_at - self.start_at).total_seconds()
        return abs(span - self.duration) > DURATION_MISMATCH_TOLERANCE_S


@dataclass
class ParseResult:
    """Outcome of parsing one CSV file.

    Invariant: ``len(records) + rows_skipped == data_lines``.
    """

    records: list
    rows_skipped: int
    data_lines: int
    errors: list[RowError] = field(default_factory=list)


# Accepted header spellings per canonical field, after normalization
# (lowercase, non-alphanumerics collapsed to underscores). A caller-supplied
# remap extends these for exports with other naming conventions.

_STATION_ALIASES = {
    "station_id": ("station_id", "id"),
    "name": ("name", "station_name"),
    "latitude": ("latitude", "lat"),
    "longitude": ("longitude", "long", "lon", "lng"),
    "dock_count": ("dock_count", "dockcount", "docks"),
    "landmark": ("landmark", "city"),
    "installation": ("installation", "installation_date", "online_date"),
}

_STATUS_ALIASES = {
    "station_id": ("station_id",),
    "bikes_available": ("bikes_available", "bikes"),
    "docks_available": ("docks_available", "dock_available", "docks"),
    "at": ("time", "at", "timestamp"),
}

_TRIP_ALIASES = {
    "trip_id": ("trip_id", "id"),
    "duration": ("duration",),
    "start_at": ("start_date", "start_time", "start_at"),
    "end_at": ("end_date", "end_time", "end_at"),
    "start_station_id": ("start_station", "start_station_id"),
    "end_station_id": ("end_station", "end_station_id"),
    "start_terminal": ("start_terminal",),
    "end_terminal": ("end_terminal",),
    "bike_no": ("bike_no", "bike", "bike_number"),
    "zip_code": ("zip_code", "zip"),
    "subscription_type": ("subscription_type", "subscriber_type"),
}


def _normalize_header(name: str) -> str:
    out = []
    prev_us = True
    for c in name.strip().lower():
        if c.isalnum():
            out.append(c)
            prev_us = False
        elif not prev_us:
            out.append("_")
            prev_us = True
    return "".join(out).strip("_")


def _resolve_columns(
    header: Sequence[str],
    aliases: Mapping[str, tuple],
    remap: Mapping[str, str] | None,
) -> dict[str, int]:
    """Map each canonical field to its index in the header row."""
    normalized = [_normalize_header(h) for h in header]
    positions = {}
    for i, h in enumerate(normalized):
        positions.setdefault(h, i)
    out = {}
    for canonical, names in aliases.items():
        if remap and canonical in remap:
            names = (_normalize_header(remap[canonical]),)
        for name in names:
            if name in positions:
                out[canonical] = positions[name]
                break
        else:
            raise SchemaError(canonical)
    return out


def _parse_row_date(text: str) -> date:
    ts = parse_row_timestamp(text.strip() + " 00:00:00") if "/" not in text else None
    if ts is not None:
        return ts.date()
    try:
        return datetime.strptime(text.strip(), "%m/%d/%Y").date()
    except ValueError:
        raise ParseError(0, f"unrecognized date: {text!r}")


def _parse_stream(
    stream: Iterable[str],
    aliases: Mapping[str, tuple],
    remap: Mapping[str, str] | None,
    make_record,
    strict: bool,
) -> ParseResult:
    reader = csv.reader(stream)
    header = None
    for row in reader:
        if row:
            header = row
            break
    if header is None:
        raise SchemaError(next(iter(aliases)))
    cols = _resolve_columns(header, aliases, remap)

    records = []
    errors = []
    data_lines = 0
    for row in reader:
        if not row or all(not f.strip() for f in row):
            continue
        data_lines += 1
        line_no = reader.line_num
        try:
            if len(row) <= max(cols.values()):
                raise ValueError(f"expected at least {max(cols.values()) + 1} fields, got {len(row)}")
            records.append(make_record({k: row[i] for k, i in cols.items()}))
        except (ValueError, ParseError) as exc:
            err = RowError(line_no, str(exc))
            if strict:
                raise err from exc
            errors.append(err)
    return ParseResult(records, len(errors), data_lines, errors)


def _station_record(f: Mapping[str, str]) -> StationRecord:
    latitude = float(f["latitude"])
    longitude = float(f["longitude"])
    dock_count = int(f["dock_count"])
    if not -90.0 <= latitude <= 90.0:
        raise ValueError(f"latitude out of range: {latitude}")
    if not -180.0 <= longitude <= 180.0:
        raise ValueError(f"longitude out of range: {longitude}")
    if dock_count <= 0:
        raise ValueError(f"dock_count must be positive: {dock_count}")
    return StationRecord(
        station_id=int(f["station_id"]),
        name=f["name"].strip(),
        latitude=latitude,
        longitude=longitude,
        dock_count=dock_count,
        landmark=f["landmark"].strip(),
        installation=_parse_row_date(f["installation"]),
    )


def _status_record(f: Mapping[str, str]) -> StatusRecord:
    bikes = int(f["bikes_available"])
    docks = int(f["docks_available"])
    if bikes < 0:
        raise ValueError(f"bikes_available negative: {bikes}")
    if docks < 0:
        raise ValueError(f"docks_available negative: {docks}")
    return StatusRecord(
        station_id=int(f["station_id"]),
        bikes_available=bikes,
        docks_available=docks,
        at=parse_row_timestamp(f["at"]),
    )


def _trip_record(f: Mapping[str, str]) -> TripRecord:
    start_at = parse_row_timestamp(f["start_at"])
    end_at = parse_row_timestamp(f["end_at"])
    duration = int(f["duration"])
    if end_at < start_at:
        raise ValueError("end_at precedes start_at")
    if duration <= 0:
        raise ValueError(f"duration must be positive: {duration}")
    return TripRecord(
        trip_id=int(f["trip_id"]),
        duration=duration,
        start_at=start_at,
        end_at=end_at,
        start_station_id=int(f["start_station_id"]),
        end_station_id=int(f["end_station_id"]),
        start_terminal=f["start_terminal"].strip(),
        end_terminal=f["end_terminal"].strip(),
        bike_no=int(f["bike_no"]),
        zip_code=f["zip_code"].strip(),
        subscription_type=f["subscription_type"].strip(),
    )


def parse_station_csv(stream: Iterable[str], columns: Mapping[str, str] | None = None,
                      strict: bool = False) -> ParseResult:
    """Parse the station roster. One StationRecord per data line, file order."""
    return _parse_stream(stream, _STATION_ALIASES, columns, _station_record, strict)


def parse_status_csv(stream: Iterable[str], columns: Mapping[str, str] | None = None,
                     strict: bool = False) -> ParseResult:
    """Parse the dock status log. One StatusRecord per data line, file order."""
    return _parse_stream(stream, _STATUS_ALIASES, columns, _status_record, strict)


def parse_trip_csv(stream: Iterable[str], columns: Mapping[str, str] | None = None,
                   strict: bool = False) -> ParseResult:
    """Parse the trip log. One TripRecord per data line, file order."""
    return _parse_stream(stream, _TRIP_ALIASES, columns, _trip_record, strict)


@dataclass
class BuildSummary:
    stations_parsed: int = 0
    status_parsed: int = 0
    trips_parsed: int = 0
    stations_skipped: int = 0
    status_skipped: int = 0
    trips_skipped: int = 0
    duplicate_stations: int = 0
    duplicate_trips: int = 0
    dangling_status: int = 0
    dangling_trips: int = 0
    duration_mismatches: int = 0

    def as_dict(self) -> dict:
        return {
            "stations": {
                "parsed": self.stations_parsed,
                "skipped": self.stations_skipped,
                "duplicates": self.duplicate_stations,
            },
            "status": {
                "parsed": self.status_parsed,
                "skipped": self.status_skipped,
                "dangling": self.dangling_status,
            },
            "trips": {
                "parsed": self.trips_parsed,
                "skipped": self.trips_skipped,
                "duplicates": self.duplicate_trips,
                "dangling": self.dangling_trips,
                "duration_mismatches": self.duration_mismatches,
            },
        }


@dataclass(frozen=True)
class StationStatusColumn:
    """Time-sorted status readings for one station, stored columnar."""

    times: tuple
    bikes: tuple
    docks: tuple

    def __len__(self) -> int:
        return len(self.times)

    def latest_at_or_before(self, at: Timestamp) -> int | None:
        """Index of the newest reading with time <= at, or None."""
        i = bisect.bisect_right(self.times, at)
        return i - 1 if i else None


class HistoryStore:
    """Immutable, indexed snapshot of the three ingested datasets.

    Built once by :func:`build_store`; afterwards it is only ever read, so
    any number of threads may query it concurrently.
    """

    def __init__(self, stations, status, trips, trips_by_start, trips_by_end,
                 trips_by_pair, summary):
        self.stations: dict[int, StationRecord] = stations
        self.status: dict[int, StationStatusColumn] = status
        self.trips: tuple = trips
        self.trips_by_start: dict[int, tuple] = trips_by_start
        self.trips_by_end: dict[int, tuple] = trips_by_end
        self.trips_by_pair: dict[tuple, tuple] = trips_by_pair
        self.summary: BuildSummary = summary

    def station(self, station_id: int) -> StationRecord:
        try:
            return self.stations[station_id]
        except KeyError:
            raise UnknownStationError(station_id) from None

    def station_ids(self) -> list[int]:
        return sorted(self.stations)

    def status_column(self, station_id: int) -> StationStatusColumn:
        self.station(station_id)
        return self.status.get(station_id, _EMPTY_COLUMN)

    def trips_starting_at(self, station_id: int) -> tuple:
        return self.trips_by_start.get(station_id, ())

    def trips_ending_at(self, station_id: int) -> tuple:
        return self.trips_by_end.get(station_id, ())

    def trips_between(self, a: int, b: int) -> tuple:
        """Trip indices for the directed pair a -> b."""
        return self.trips_by_pair.get((a, b), ())

    def trip_time_bounds(self) -> tuple[Timestamp, Timestamp] | None:
        if not self.trips:
            return None
        return (min(t.start_at for t in self.trips), max(t.end_at for t in self.trips))

    def status_time_bounds(self) -> tuple[Timestamp, Timestamp] | None:
        bounds = None
        for col in self.status.values():
            if not col.times:
                continue
            lo, hi = col.times[0], col.times[-1]
            if bounds is None:
                bounds = (lo, hi)
            else:
                bounds = (min(bounds[0], lo), max(bounds[1], hi))
        return bounds


_EMPTY_COLUMN = StationStatusColumn((), (), ())


def _records_of(x) -> tuple[list, int]:
    if isinstance(x, ParseResult):
        return x.records, x.rows_skipped
    return list(x), 0


def build_store(stations, status, trips, strict: bool = False) -> HistoryStore:
    """Assemble a HistoryStore from parsed records.

    Arguments may be ParseResults (their skip counts fold into the summary)
    or plain record iterables. Rows referencing unknown stations are dropped
    and counted, unless ``strict`` is set, in which case the build fails.
    """
    station_records, st_skipped = _records_of(stations)
    status_records, su_skipped = _records_of(status)
    trip_records, tr_skipped = _records_of(trips)

    summary = BuildSummary(
        stations_skipped=st_skipped,
        status_skipped=su_skipped,
        trips_skipped=tr_skipped,
    )

    station_map: dict[int, StationRecord] = {}
    for rec in station_records:
        if rec.station_id in station_map:
            summary.duplicate_stations += 1
            continue
        station_map[rec.station_id] = rec
    summary.stations_parsed = len(station_map)

    per_station: dict[int, list[StatusRecord]] = {}
    for rec in status_records:
        if rec.station_id not in station_map:
            if strict:
                raise ReferentialError(f"status row references unknown station {rec.station_id}")
            summary.dangling_status += 1
            continue
        per_station.setdefault(rec.station_id, []).append(rec)
    status_map = {}
    for sid, rows in per_station.items():
        rows.sort(key=lambda r: r.at)
        status_map[sid] = StationStatusColumn(
            times=tuple(r.at for r in rows),
            bikes=tuple(r.bikes_available for r in rows),
            docks=tuple(r.docks_available for r in rows),
        )
    summary.status_parsed = sum(len(c) for c in status_map.values())

    kept: list[TripRecord] = []
    seen_trip_ids = set()
    for rec in trip_records:
        if rec.start_station_id not in station_map or rec.end_station_id not in station_map:
            if strict:
                raise ReferentialError(f"trip {rec.trip_id} references an unknown station")
            summary.dangling_trips += 1
            continue
        if rec.trip_id in seen_trip_ids:
            summary.duplicate_trips += 1
            continue
        seen_trip_ids.add(rec.trip_id)
        if rec.duration_mismatch():
            summary.duration_mismatches += 1
        kept.append(rec)
    kept.sort(key=lambda r: (r.start_at, r.trip_id))
    summary.trips_parsed = len(kept)

    by_start: dict[int, list[int]] = {}
    by_end: dict[int, list[int]] = {}
    by_pair: dict[tuple, list[int]] = {}
    for i, rec in enumerate(kept):
        by_start.setdefault(rec.start_station_id, []).append(i)
        by_end.setdefault(rec.end_station_id, []).append(i)
        by_pair.setdefault((rec.start_station_id, rec.end_station_id), []).append(i)

    return HistoryStore(
        stations=station_map,
        status=status_map,
        trips=tuple(kept),
        trips_by_start={k: tuple(v) for k, v in by_start.items()},
        trips_by_end={k: tuple(v) for k, v in by_end.items()},
        trips_by_pair={k: tuple(v) for k, v in by_pair.items()},
        summary=summary,
    )


# Bump when the pickled store layout changes; stale caches are rebuilt.
_CACHE_VERSION = 1


def _cache_key(paths: Sequence[Path], strict: bool, columns) -> str:
    h = hashlib.sha256()
    h.update(f"v{_CACHE_VERSION}|strict={strict}|".encode())
    h.update(json.dumps(columns, sort_keys=True).encode())
    for p in paths:
        h.update(hashlib.sha256(p.read_bytes()).digest())
    return h.hexdigest()


def _open(path: Path) -> IO[str]:
    return open(path, newline="", encoding="utf-8")


def load_history(
    stations_path,
    status_path,
    trips_path,
    strict: bool = False,
    columns: Mapping[str, Mapping[str, str]] | None = None,
    cache_dir=None,
) -> HistoryStore:
    """Parse the three CSV files and build the store.

    ``columns`` optionally remaps header names per file kind, keyed by
    "stations" / "status" / "trips". With ``cache_dir`` set, a checksummed
    binary cache of the built store is kept there and reused while the
    input bytes are unchanged.
    """
    paths = [Path(stations_path), Path(status_path), Path(trips_path)]
    columns = columns or {}

    cache_file = None
    if cache_dir is not None:
        key = _cache_key(paths, strict, columns)
        cache_file = Path(cache_dir) / f"store-{key[:24]}.pkl"
        if cache_file.exists():
            try:
                with open(cache_file, "rb") as fh:
                    payload = pickle.load(fh)
                if payload.get("version") == _CACHE_VERSION and payload.get("key") == key:
                    return payload["store"]
            except Exception:
                pass  # unreadable cache: fall through and rebuild

    with _open(paths[0]) as fh:
        stations = parse_station_csv(fh, columns.get("stations"), strict)
    with _open(paths[1]) as fh:
        status = parse_status_csv(fh, columns.get("status"), strict)
    with _open(paths[2]) as fh:
        trips = parse_trip_csv(fh, columns.get("trips"), strict)
    store = build_store(stations, status, trips, strict)

    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache_file.with_suffix(".tmp")
        with open(tmp, "wb") as fh:
            pickle.dump({"version": _CACHE_VERSION, "key": key, "store": store}, fh)
        tmp.replace(cache_file)
    return store
