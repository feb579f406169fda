"""Station analytics over a HistoryStore.

All functions are pure reads. Time windows are half-open ``[start, end)``.
The three availability factors share one convention everywhere: history for
the same weekday, for the days of the current week before the target, and
for the same day of month, each capped at the six most recent occurrences
that actually have readings. Factors with no usable history drop out and
the remaining weights are renormalized.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from typing import Sequence

from .errors import NoDataError, NoHistoryError
from .ingest import HistoryStore, StationStatusColumn
from .timestamps import Timestamp

__all__ = [
    "Window",
    "BASE_WEIGHTS",
    "FACTOR_NAMES",
    "LOOKBACK",
    "HORIZON_MINUTES",
    "MATCH_RADIUS",
    "AvailabilityForecast",
    "BusynessReport",
    "HourBusyness",
    "LoadFactorReading",
    "TripTimeStats",
    "WaitProbabilityPoint",
    "WaitProbabilitySeries",
    "combined_probability",
    "daily_mean_bikes",
    "availability_forecast",
    "busyness",
    "busyness_by_hour",
    "rank_stations",
    "load_factor",
    "trip_time",
    "route_busyness",
    "route_busyness_directed",
    "wait_probability_series",
]

# Fixed mixing weights: same weekday, current week so far, same day of month.
BASE_WEIGHTS = (0.25, 0.5, 0.25)
FACTOR_NAMES = ("day_of_week", "current_week", "day_of_month")

# How many past occurrences each factor may draw on.
LOOKBACK = 6

# The wait-probability series covers "now" plus the next half hour.
HORIZON_MINUTES = 31

# A historical reading counts as matching a minute when it falls within
# this radius of the same clock time on its day.
MATCH_RADIUS = timedelta(minutes=5)


@dataclass(frozen=True)
class Window:
    """Half-open time interval [start, end)."""

    start: Timestamp
    end: Timestamp

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("window end precedes window start")

    def contains(self, at: Timestamp) -> bool:
        return self.start <= at < self.end

    def days(self) -> float:
        return (self.end - self.start).total_seconds() / 86400.0


@dataclass(frozen=True)
class AvailabilityForecast:
    station_id: int
    target_date: date
    dow_mean: float | None
    current_week_mean: float | None
    dom_mean: float | None
    weights: tuple[float, float, float]
    n_expected: float
    samples_used: tuple[int, int, int]

    @property
    def factor_values(self) -> tuple:
        return (self.dow_mean, self.current_week_mean, self.dom_mean)


@dataclass(frozen=True)
class BusynessReport:
    station_id: int
    window: Window
    incoming: int
    outgoing: int

    @property
    def total(self) -> int:
        return self.incoming + self.outgoing


@dataclass(frozen=True)
class HourBusyness:
    hour: int
    incoming: int
    outgoing: int

    @property
    def total(self) -> int:
        return self.incoming + self.outgoing


@dataclass(frozen=True)
class LoadFactorReading:
    station_id: int
    at: Timestamp
    observed_at: Timestamp
    bikes: int
    docks: int

    @property
    def total(self) -> int:
        return self.bikes + self.docks


@dataclass(frozen=True)
class TripTimeStats:
    start_station_id: int
    end_station_id: int
    window: Window
    n_out: int
    n_back: int
    mean_s: float
    min_s: int
    max_s: int

    @property
    def n_total(self) -> int:
        return self.n_out + self.n_back

    @property
    def is_loop(self) -> bool:
        return self.start_station_id == self.end_station_id


@dataclass(frozen=True)
class WaitProbabilityPoint:
    minute: int
    at: Timestamp
    probability: float
    factor_values: tuple


@dataclass(frozen=True)
class WaitProbabilitySeries:
    station_id: int
    anchor: Timestamp
    max_bikes: int
    points: tuple


def combined_probability(values: Sequence, weights: Sequence[float] = BASE_WEIGHTS):
    """Mix factor values, dropping missing ones and renormalizing weights.

    Returns ``(mixed, effective_weights)`` where missing factors get weight
    0.0, or ``(None, zeros)`` when every factor is missing.
    """
    total_w = sum(w for w, v in zip(weights, values) if v is not None)
    if total_w == 0:
        return None, tuple(0.0 for _ in weights)
    effective = tuple((w / total_w if v is not None else 0.0)
                      for w, v in zip(weights, values))
    mixed = sum(w * v for w, v in zip(effective, values) if v is not None)
    return mixed, effective


def _day_bounds(d: date) -> tuple[datetime, datetime]:
    start = datetime.combine(d, time())
    return start, start + timedelta(days=1)


def _daily_mean(col: StationStatusColumn, d: date) -> float | None:
    start, end = _day_bounds(d)
    i = bisect.bisect_left(col.times, start)
    j = bisect.bisect_left(col.times, end)
    if i == j:
        return None
    return sum(col.bikes[i:j]) / (j - i)


def _dates_with_data(col: StationStatusColumn) -> list[date]:
    out = []
    for t in col.times:
        d = t.date()
        if not out or out[-1] != d:
            out.append(d)
    return out


def _factor_dates(dates: Sequence[date], target: date, lookback: int):
    dow = [d for d in dates if d < target and d.weekday() == target.weekday()]
    week = [d for d in dates if d < target
            and d.isocalendar()[:2] == target.isocalendar()[:2]]
    dom = [d for d in dates if d < target and d.day == target.day]
    return dow[-lookback:], week, dom[-lookback:]


def daily_mean_bikes(store: HistoryStore, station_id: int, d: date) -> float | None:
    """Mean bikes available across the station's readings on one date."""
    return _daily_mean(store.status_column(station_id), d)


def availability_forecast(store: HistoryStore, station_id: int, target: date,
                          lookback: int = LOOKBACK,
                          weights: Sequence[float] = BASE_WEIGHTS) -> AvailabilityForecast:
    """Expected bikes available at the station on the target date.

    Raises NoHistoryError when none of the three factors has any reading
    before the target date.
    """
    col = store.status_column(station_id)
    groups = _factor_dates(_dates_with_data(col), target, lookback)
    values = []
    counts = []
    for ds in groups:
        counts.append(len(ds))
        if not ds:
            values.append(None)
            continue
        means = [_daily_mean(col, d) for d in ds]
        values.append(sum(means) / len(means))
    mixed, effective = combined_probability(values, weights)
    if mixed is None:
        raise NoHistoryError(f"no readings before {target} for station {station_id}")
    return AvailabilityForecast(
        station_id=station_id,
        target_date=target,
        dow_mean=values[0],
        current_week_mean=values[1],
        dom_mean=values[2],
        weights=effective,
        n_expected=mixed,
        samples_used=tuple(counts),
    )


def busyness(store: HistoryStore, station_id: int, window: Window) -> BusynessReport:
    """Trips touching the station in the window: arrivals plus departures."""
    store.station(station_id)
    incoming = sum(1 for i in store.trips_ending_at(station_id)
                   if window.contains(store.trips[i].end_at))
    outgoing = sum(1 for i in store.trips_starting_at(station_id)
                   if window.contains(store.trips[i].start_at))
    return BusynessReport(station_id, window, incoming, outgoing)


def busyness_by_hour(store: HistoryStore, station_id: int,
                     window: Window) -> list[HourBusyness]:
    """The same count split into 24 hour-of-day bins (bins are half-open)."""
    store.station(station_id)
    incoming = [0] * 24
    outgoing = [0] * 24
    for i in store.trips_ending_at(station_id):
        at = store.trips[i].end_at
        if window.contains(at):
            incoming[at.hour] += 1
    for i in store.trips_starting_at(station_id):
        at = store.trips[i].start_at
        if window.contains(at):
            outgoing[at.hour] += 1
    return [HourBusyness(h, incoming[h], outgoing[h]) for h in range(24)]


def rank_stations(store: HistoryStore, window: Window) -> list[tuple[int, int]]:
    """All stations ordered by total busyness, busiest first, ties by id."""
    totals = [(sid, busyness(store, sid, window).total) for sid in store.station_ids()]
    totals.sort(key=lambda p: (-p[1], p[0]))
    return totals


def load_factor(store: HistoryStore, station_id: int, at: Timestamp) -> LoadFactorReading:
    """Bikes plus empty docks from the newest reading at or before ``at``.

    The two counts come from the same reading; they are never mixed across
    readings. Raises NoDataError when the station has nothing that early.
    """
    col = store.status_column(station_id)
    i = col.latest_at_or_before(at)
    if i is None:
        raise NoDataError(f"no reading at or before {at} for station {station_id}")
    return LoadFactorReading(
        station_id=station_id,
        at=at,
        observed_at=col.times[i],
        bikes=col.bikes[i],
        docks=col.docks[i],
    )


def _pooled_trip_indexes(store: HistoryStore, a: int, b: int, window: Window):
    out = [i for i in store.trips_between(a, b)
           if window.contains(store.trips[i].start_at)]
    if a == b:
        return out, []
    back = [i for i in store.trips_between(b, a)
            if window.contains(store.trips[i].start_at)]
    return out, back


def trip_time(store: HistoryStore, a: int, b: int, window: Window) -> TripTimeStats:
    """Duration stats pooled over both directions between two stations.

    Window membership goes by departure time. A loop route (a == b) pools
    only the loops and reports zero for the back direction. Raises
    NoDataError when the window holds no such trips.
    """
    store.station(a)
    store.station(b)
    out, back = _pooled_trip_indexes(store, a, b, window)
    durations = [store.trips[i].duration for i in out + back]
    if not durations:
        raise NoDataError(f"no trips between {a} and {b} in window")
    return TripTimeStats(
        start_station_id=a,
        end_station_id=b,
        window=window,
        n_out=len(out),
        n_back=len(back),
        mean_s=sum(durations) / len(durations),
        min_s=min(durations),
        max_s=max(durations),
    )


def route_busyness(store: HistoryStore, a: int, b: int, window: Window) -> int:
    """Trips between the two stations in either direction, by departure time."""
    store.station(a)
    store.station(b)
    out, back = _pooled_trip_indexes(store, a, b, window)
    return len(out) + len(back)


def route_busyness_directed(store: HistoryStore, a: int, b: int, window: Window) -> int:
    """Trips from a to b only."""
    store.station(a)
    store.station(b)
    return sum(1 for i in store.trips_between(a, b)
               if window.contains(store.trips[i].start_at))


def _sample_near(col: StationStatusColumn, instant: Timestamp) -> int | None:
    """Bikes from the reading nearest ``instant`` within the match radius.

    Past readings win: the newest one at or before the instant, falling back
    to the earliest one after it.
    """
    lo = bisect.bisect_left(col.times, instant - MATCH_RADIUS)
    hi = bisect.bisect_right(col.times, instant + MATCH_RADIUS)
    if lo == hi:
        return None
    j = bisect.bisect_right(col.times, instant) - 1
    if j >= lo:
        return col.bikes[j]
    return col.bikes[lo]


def wait_probability_series(store: HistoryStore, station_id: int, anchor: Timestamp,
                            lookback: int = LOOKBACK,
                            weights: Sequence[float] = BASE_WEIGHTS) -> WaitProbabilitySeries:
    """Per-minute probability of finding a bike over the next half hour.

    Each minute mixes the three availability factors evaluated at that
    clock time, normalized by the station's dock count and clamped to
    [0, 1]. Minutes with no usable sample in any factor read 0.0. Raises
    NoHistoryError only when the whole horizon is like that.
    """
    station = store.station(station_id)
    col = store.status_column(station_id)
    dates = _dates_with_data(col)
    max_bikes = station.dock_count

    points = []
    any_sample = False
    for k in range(HORIZON_MINUTES):
        t = anchor + timedelta(minutes=k)
        groups = _factor_dates(dates, t.date(), lookback)
        values = []
        for ds in groups:
            samples = [v for v in (_sample_near(col, datetime.combine(d, t.time()))
                                   for d in ds) if v is not None]
            values.append(sum(samples) / len(samples) if samples else None)
        mixed, _ = combined_probability(values, weights)
        if mixed is None:
            points.append(WaitProbabilityPoint(k, t, 0.0, (None, None, None)))
            continue
        any_sample = True
        p = min(1.0, max(0.0, mixed / max_bikes))
        points.append(WaitProbabilityPoint(k, t, p, tuple(values)))
    if not any_sample:
        raise NoHistoryError(f"no matching readings around {anchor} for station {station_id}")
    return WaitProbabilitySeries(station_id, anchor, max_bikes, tuple(points))
