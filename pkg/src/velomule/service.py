"""Read-only JSON query service over an immutable HistoryStore.

The payload builders here are the single source of response shapes: the
CLI's `analyze` subcommands print exactly what the service returns, so the
two can never drift apart. Handlers only ever read the store, which makes
concurrent requests safe by construction.

Endpoints:
    GET /stations
    GET /stations/{id}/forecast?date=YYYY-MM-DD
    GET /stations/{id}/wait?at=TIMESTAMP
    GET /stations/{id}/load?at=TIMESTAMP
    GET /routes/{a}/{b}?window=START..END

Timestamps in URLs may use `T` instead of the space.
"""

from __future__ import annotations

import json
from datetime import date, timedelta
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlsplit

from . import analytics
from .analytics import BASE_WEIGHTS, Window
from .errors import (
    NoDataError,
    NoHistoryError,
    ParseError,
    UnknownStationError,
    VelomuleError,
)
from .ingest import HistoryStore
from .timestamps import (
    Timestamp,
    parse_date,
    parse_timestamp,
    render_date,
    render_timestamp,
)

__all__ = [
    "stations_payload",
    "forecast_payload",
    "wait_payload",
    "load_payload",
    "route_payload",
    "busyness_payload",
    "hours_payload",
    "rank_payload",
    "render_payload",
    "parse_cli_timestamp",
    "parse_window_text",
    "serve",
]


def parse_cli_timestamp(text: str) -> Timestamp:
    """Canonical timestamp, with `T` accepted in place of the space."""
    return parse_timestamp(text.replace("T", " ", 1))


def parse_window_text(text: str) -> Window:
    """Parse `START..END` into a half-open window."""
    start_text, sep, end_text = text.partition("..")
    if not sep:
        raise ParseError(len(text), "window must be START..END")
    window = Window(parse_cli_timestamp(start_text), parse_cli_timestamp(end_text))
    return window


def _window_dict(window: Window) -> dict:
    return {"start": render_timestamp(window.start),
            "end": render_timestamp(window.end)}


def stations_payload(store: HistoryStore) -> list:
    return [
        {
            "station_id": rec.station_id,
            "name": rec.name,
            "latitude": rec.latitude,
            "longitude": rec.longitude,
            "dock_count": rec.dock_count,
            "landmark": rec.landmark,
            "installation": render_date(rec.installation),
        }
        for rec in (store.stations[sid] for sid in store.station_ids())
    ]


def forecast_payload(store: HistoryStore, station_id: int, target: date,
                     weights=BASE_WEIGHTS) -> dict:
    payload = {
        "station_id": station_id,
        "target_date": render_date(target),
        "dow_mean": None,
        "current_week_mean": None,
        "dom_mean": None,
        "weights": None,
        "n_expected": None,
        "samples_used": None,
    }
    store.station(station_id)
    try:
        f = analytics.availability_forecast(store, station_id, target, weights=weights)
    except NoHistoryError as exc:
        payload["note"] = str(exc)
        return payload
    payload.update(
        dow_mean=f.dow_mean,
        current_week_mean=f.current_week_mean,
        dom_mean=f.dom_mean,
        weights=list(f.weights),
        n_expected=f.n_expected,
        samples_used=list(f.samples_used),
    )
    return payload


def wait_payload(store: HistoryStore, station_id: int, at: Timestamp,
                 weights=BASE_WEIGHTS) -> dict:
    payload = {
        "station_id": station_id,
        "anchor": render_timestamp(at),
        "max_bikes": store.station(station_id).dock_count,
        "points": None,
    }
    try:
        series = analytics.wait_probability_series(store, station_id, at, weights=weights)
    except NoHistoryError as exc:
        payload["note"] = str(exc)
        return payload
    payload["points"] = [
        {
            "minute": p.minute,
            "at": render_timestamp(p.at),
            "probability": p.probability,
            "factor_values": list(p.factor_values),
        }
        for p in series.points
    ]
    return payload


def load_payload(store: HistoryStore, station_id: int, at: Timestamp) -> dict:
    payload = {
        "station_id": station_id,
        "at": render_timestamp(at),
        "observed_at": None,
        "bikes": None,
        "docks": None,
        "total": None,
    }
    store.station(station_id)
    try:
        reading = analytics.load_factor(store, station_id, at)
    except NoDataError as exc:
        payload["note"] = str(exc)
        return payload
    payload.update(
        observed_at=render_timestamp(reading.observed_at),
        bikes=reading.bikes,
        docks=reading.docks,
        total=reading.total,
    )
    return payload


def route_payload(store: HistoryStore, a: int, b: int, window: Window) -> dict:
    payload = {
        "start_station_id": a,
        "end_station_id": b,
        "window": _window_dict(window),
        "trips_either_direction": analytics.route_busyness(store, a, b, window),
        "n_out": None,
        "n_back": None,
        "n_total": None,
        "mean_s": None,
        "min_s": None,
        "max_s": None,
        "is_loop": a == b,
    }
    try:
        stats = analytics.trip_time(store, a, b, window)
    except NoDataError as exc:
        payload["note"] = str(exc)
        return payload
    payload.update(
        n_out=stats.n_out,
        n_back=stats.n_back,
        n_total=stats.n_total,
        mean_s=stats.mean_s,
        min_s=stats.min_s,
        max_s=stats.max_s,
    )
    return payload


def busyness_payload(store: HistoryStore, station_id: int, window: Window) -> dict:
    report = analytics.busyness(store, station_id, window)
    return {
        "station_id": station_id,
        "window": _window_dict(window),
        "incoming": report.incoming,
        "outgoing": report.outgoing,
        "total": report.total,
    }


def hours_payload(store: HistoryStore, station_id: int, window: Window) -> dict:
    bins = analytics.busyness_by_hour(store, station_id, window)
    return {
        "station_id": station_id,
        "window": _window_dict(window),
        "hours": [
            {"hour": h.hour, "incoming": h.incoming, "outgoing": h.outgoing,
             "total": h.total}
            for h in bins
        ],
    }


def rank_payload(store: HistoryStore, window: Window) -> dict:
    return {
        "window": _window_dict(window),
        "stations": [
            {"station_id": sid, "total": total}
            for sid, total in analytics.rank_stations(store, window)
        ],
    }


def render_payload(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


class _BadRequest(Exception):
    pass


def _make_handler(store: HistoryStore, weights):
    class Handler(BaseHTTPRequestHandler):
        server_version = "velomule"

        def log_message(self, format, *args):  # noqa: A002 (stdlib signature)
            pass  # keep the server quiet; tests and CLIs read stdout

        def do_GET(self):  # noqa: N802 (stdlib naming)
            try:
                payload = self._dispatch()
            except _BadRequest as exc:
                self._reply(400, {"error": str(exc)})
            except UnknownStationError as exc:
                self._reply(404, {"error": str(exc)})
            except VelomuleError as exc:
                self._reply(400, {"error": str(exc)})
            except Exception as exc:  # pragma: no cover - defensive
                self._reply(500, {"error": f"internal error: {exc}"})
            else:
                if payload is None:
                    self._reply(404, {"error": "unknown path"})
                else:
                    self._reply(200, payload)

        def _query(self) -> dict:
            raw = parse_qs(urlsplit(self.path).query)
            return {k: v[-1] for k, v in raw.items()}

        def _param(self, name: str) -> str:
            params = self._query()
            if name not in params:
                raise _BadRequest(f"missing query parameter: {name}")
            return params[name]

        def _dispatch(self):
            parts = [unquote(p) for p in urlsplit(self.path).path.split("/") if p]
            if parts == ["stations"]:
                return stations_payload(store)
            if len(parts) == 3 and parts[0] == "stations":
                try:
                    station_id = int(parts[1])
                except ValueError:
                    raise _BadRequest(f"station id is not an integer: {parts[1]}")
                kind = parts[2]
                try:
                    if kind == "forecast":
                        target = parse_date(self._param("date"))
                        return forecast_payload(store, station_id, target, weights)
                    if kind == "wait":
                        at = parse_cli_timestamp(self._param("at"))
                        return wait_payload(store, station_id, at, weights)
                    if kind == "load":
                        at = parse_cli_timestamp(self._param("at"))
                        return load_payload(store, station_id, at)
                except ParseError as exc:
                    raise _BadRequest(str(exc))
                return None
            if len(parts) == 3 and parts[0] == "routes":
                try:
                    a, b = int(parts[1]), int(parts[2])
                except ValueError:
                    raise _BadRequest("route station ids must be integers")
                try:
                    window = parse_window_text(self._param("window"))
                except (ParseError, ValueError) as exc:
                    raise _BadRequest(str(exc))
                return route_payload(store, a, b, window)
            return None

        def _reply(self, status: int, payload) -> None:
            body = render_payload(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


def serve(store: HistoryStore, address: tuple, weights=BASE_WEIGHTS) -> ThreadingHTTPServer:
    """Bind the query service to (host, port) and return the server.

    The caller drives it (serve_forever / shutdown). Raises OSError when
    the address is unavailable.
    """
    handler = _make_handler(store, weights)
    return ThreadingHTTPServer(address, handler)
