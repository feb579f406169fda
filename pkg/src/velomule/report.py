"""Labeled (label, value) tables behind the six figure outputs, with CSV
and JSON serializations.

Table values are rounded to six significant digits when they are built, so
the in-memory table, its CSV, and its JSON always carry the same numbers
and regeneration is byte-identical. Rows that cannot be computed (say, a
station with no history) become null-valued rows with a note instead of
aborting the table.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

from . import analytics
from .analytics import Window
from .errors import NoDataError, NoHistoryError, VelomuleError
from .ingest import HistoryStore
from .sim import SimTrace
from .timestamps import Timestamp, render_date, render_timestamp

__all__ = [
    "ReportTable",
    "round_sig",
    "fig_forecast",
    "fig_busy_by_hour",
    "fig_trips_per_station",
    "fig_load_factor",
    "fig_wait_series",
    "sim_summary",
    "write_table_csv",
    "read_table_csv",
    "write_table_json",
    "read_table_json",
    "write_all",
]

SIGNIFICANT_DIGITS = 6


def round_sig(value):
    """Clip a number to the table precision; ints pass through untouched."""
    if value is None or isinstance(value, int):
        return value
    if value == int(value) and abs(value) < 1e15:
        return int(value)
    return float(f"{value:.{SIGNIFICANT_DIGITS}g}")


@dataclass(frozen=True)
class ReportTable:
    title: str
    x_label: str
    y_label: str
    rows: tuple
    provenance: str
    notes: tuple = ()  # (label, note) pairs for null-valued rows

    def __post_init__(self):
        labels = [label for label, _ in self.rows]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate row labels")
        for label, value in self.rows:
            if value is not None and not math.isfinite(value):
                raise ValueError(f"non-finite value in row {label!r}")

    def value(self, label: str):
        for row_label, v in self.rows:
            if row_label == label:
                return v
        raise KeyError(label)


def _table(title, x_label, y_label, rows, provenance, notes):
    return ReportTable(
        title=title,
        x_label=x_label,
        y_label=y_label,
        rows=tuple((label, round_sig(v)) for label, v in rows),
        provenance=provenance,
        notes=tuple(notes),
    )


def fig_forecast(store: HistoryStore, target: date) -> ReportTable:
    """Expected bikes available per station on the target date."""
    rows, notes = [], []
    for sid in store.station_ids():
        try:
            rows.append((str(sid), analytics.availability_forecast(store, sid, target).n_expected))
        except VelomuleError as exc:
            rows.append((str(sid), None))
            notes.append((str(sid), str(exc)))
    return _table(
        "Expected bikes available per station",
        "station", "bikes expected",
        rows, f"availability_forecast(target={render_date(target)})", notes)


def _full_trip_window(store: HistoryStore) -> Window | None:
    bounds = store.trip_time_bounds()
    if bounds is None:
        return None
    # Push the end out so the half-open window still holds the last arrival.
    return Window(bounds[0], bounds[1] + timedelta(seconds=1))


def fig_busy_by_hour(store: HistoryStore, hour: int, per_day: bool = False) -> ReportTable:
    """Trips touching each station during one hour-of-day bin.

    Counts cover the store's whole trip span. With ``per_day`` the counts
    are divided by the span's length in days, giving a daily density.
    """
    if not 0 <= hour <= 23:
        raise ValueError(f"hour out of range: {hour}")
    window = _full_trip_window(store)
    rows, notes = [], []
    for sid in store.station_ids():
        if window is None:
            rows.append((str(sid), None))
            notes.append((str(sid), "no trips in store"))
            continue
        count = analytics.busyness_by_hour(store, sid, window)[hour].total
        rows.append((str(sid), count / window.days() if per_day else count))
    suffix = " per day" if per_day else ""
    return _table(
        f"Station busyness at hour {hour:02d}{suffix}",
        "station", f"trips{suffix}",
        rows, f"busyness_by_hour(hour={hour}, per_day={per_day})", notes)


def fig_trips_per_station(store: HistoryStore, window: Window) -> ReportTable:
    """Outbound trip counts per station within the window."""
    rows = [(str(sid), analytics.busyness(store, sid, window).outgoing)
            for sid in store.station_ids()]
    return _table(
        "Departures per station",
        "station", "trips",
        rows,
        f"busyness.outgoing(window={render_timestamp(window.start)}"
        f"..{render_timestamp(window.end)})",
        ())


def fig_load_factor(store: HistoryStore, at: Timestamp) -> ReportTable:
    """Bikes plus empty docks per station as of one instant."""
    rows, notes = [], []
    for sid in store.station_ids():
        try:
            rows.append((str(sid), analytics.load_factor(store, sid, at).total))
        except VelomuleError as exc:
            rows.append((str(sid), None))
            notes.append((str(sid), str(exc)))
    return _table(
        "Load factor per station",
        "station", "bikes + empty docks",
        rows, f"load_factor(at={render_timestamp(at)})", notes)


def fig_wait_series(store: HistoryStore, station_id: int, arrival: Timestamp) -> ReportTable:
    """The 31-point bike-availability probability series for one station."""
    try:
        series = analytics.wait_probability_series(store, station_id, arrival)
        rows = [(str(p.minute), p.probability) for p in series.points]
        notes = []
    except (NoHistoryError, NoDataError) as exc:
        rows = [(str(minute), None) for minute in range(analytics.HORIZON_MINUTES)]
        notes = [(str(minute), str(exc)) for minute in range(analytics.HORIZON_MINUTES)]
    return _table(
        f"Bike availability probability at station {station_id}",
        "minutes from arrival", "probability",
        rows,
        f"wait_probability_series(station={station_id}, "
        f"arrival={render_timestamp(arrival)})",
        notes)


def sim_summary(trace: SimTrace) -> ReportTable:
    """Per-bike bytes sent and per-station bytes received for one run."""
    rows = [(f"bike {bike_id}", trace.sent_by_bike[bike_id])
            for bike_id in sorted(trace.sent_by_bike)]
    rows += [(f"station {sid}", trace.received_by_station[sid])
             for sid in sorted(trace.received_by_station)]
    cfg = trace.config
    return _table(
        "Simulation data summary",
        "entity", "bytes",
        rows,
        f"run_simulation(n_bikes={cfg.n_bikes}, seed={cfg.seed}, "
        f"duration={cfg.duration})",
        ())


def _format_value(value) -> str:
    if value is None:
        return ""
    return str(value)


def _parse_value(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def _meta_dict(table: ReportTable) -> dict:
    return {
        "title": table.title,
        "x_label": table.x_label,
        "y_label": table.y_label,
        "provenance": table.provenance,
        "notes": {label: note for label, note in table.notes},
    }


def write_table_csv(table: ReportTable, path) -> None:
    """CSV form: one `#` metadata line, a `label,value` header, then rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# " + json.dumps(_meta_dict(table), sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label", "value"])
        for label, value in table.rows:
            writer.writerow([label, _format_value(value)])


def read_table_csv(path) -> ReportTable:
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        meta = {}
        if first.startswith("#"):
            meta = json.loads(first.lstrip("#").strip())
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["label", "value"]:
            raise ValueError(f"unexpected table header: {header}")
        rows = tuple((label, _parse_value(value)) for label, value in reader)
    return ReportTable(
        title=meta.get("title", ""),
        x_label=meta.get("x_label", ""),
        y_label=meta.get("y_label", ""),
        rows=rows,
        provenance=meta.get("provenance", ""),
        notes=tuple(sorted(meta.get("notes", {}).items())),
    )


def write_table_json(table: ReportTable, path) -> None:
    payload = _meta_dict(table)
    payload["rows"] = [{"label": label, "value": value} for label, value in table.rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_table_json(path) -> ReportTable:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return ReportTable(
        title=payload["title"],
        x_label=payload["x_label"],
        y_label=payload["y_label"],
        rows=tuple((row["label"], row["value"]) for row in payload["rows"]),
        provenance=payload["provenance"],
        notes=tuple(sorted(payload["notes"].items())),
    )


def write_all(store: HistoryStore, out_dir, *, forecast_date: date, hour: int,
              window: Window, load_at: Timestamp, wait_station: int,
              arrival: Timestamp, trace: SimTrace | None = None,
              render: bool = True) -> dict:
    """Write every figure table (CSV + JSON, and a PNG unless disabled).

    Returns a mapping of logical name to the list of files written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = {
        "fig4": (fig_forecast(store, forecast_date), "bar"),
        "fig5": (fig_busy_by_hour(store, hour), "bar"),
        "fig6": (fig_trips_per_station(store, window), "bar"),
        "fig7": (fig_busy_by_hour(store, hour, per_day=True), "bar"),
        "fig8": (fig_load_factor(store, load_at), "bar"),
        "fig9": (fig_wait_series(store, wait_station, arrival), "line"),
    }
    written = {}
    for name, (table, kind) in tables.items():
        csv_path = out / f"{name}.csv"
        json_path = out / f"{name}.json"
        write_table_csv(table, csv_path)
        write_table_json(table, json_path)
        written[name] = [csv_path, json_path]
        if render:
            from . import plots
            png_path = out / f"{name}.png"
            plots.render_table_png(table, png_path, kind=kind)
            written[name].append(png_path)
    if trace is not None:
        path = out / "sim_summary.csv"
        write_table_csv(sim_summary(trace), path)
        written["sim_summary"] = [path]
    return written
