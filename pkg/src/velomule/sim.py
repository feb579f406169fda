"""Deterministic simulator: bikes ride random trips between stations,
generate sensor data, and offload it to every station in radio range.

The model is intentionally small. Bikes move in straight lines at constant
speed, a transfer is reliable whenever the bike is within the radio range
(closed ball), and a bike in range of several stations splits its buffer
equally among them. Contacts are single hop: bikes never relay for each
other, and nothing about the radio or transport layer is modeled.

Everything is driven by one seeded generator with a fixed draw order, so a
(config, seed) pair always produces a bit-identical trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from random import Random
from typing import Iterable, Sequence

from .errors import ConfigError, TraceError
from .ingest import HistoryStore

__all__ = [
    "SimStation",
    "SimConfig",
    "BikeState",
    "TraceEvent",
    "SimTrace",
    "SimWorld",
    "grid_stations",
    "stations_from_store",
    "init_simulation",
    "step",
    "offload",
    "run_simulation",
    "summarize_trace",
    "format_trace",
    "write_trace",
]

# Invented defaults, pinned here so traces stay reproducible: a city-bike
# cruising speed, a generous WiFi-class radio, and a light sensor payload.
DEFAULT_RADIO_RANGE_M = 100.0
DEFAULT_BIKE_SPEED_MS = 4.0
DEFAULT_SENSE_RATE_BPS = 8.0
DEFAULT_TICK_S = 1.0


@dataclass(frozen=True)
class SimStation:
    station_id: int
    x: float
    y: float


@dataclass(frozen=True)
class SimConfig:
    n_bikes: int
    stations: tuple
    radio_range: float = DEFAULT_RADIO_RANGE_M
    bike_speed: float = DEFAULT_BIKE_SPEED_MS
    sense_rate: float = DEFAULT_SENSE_RATE_BPS
    tick: float = DEFAULT_TICK_S
    max_start_delay: float = 0.0
    duration: float = 600.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_bikes < 1:
            raise ConfigError("n_bikes", "must be at least 1")
        if len(self.stations) < 2:
            raise ConfigError("stations", "need at least 2 stations")
        ids = [s.station_id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise ConfigError("stations", "station ids must be distinct")
        if not all(math.isfinite(s.x) and math.isfinite(s.y) for s in self.stations):
            raise ConfigError("stations", "coordinates must be finite")
        if not self.radio_range > 0:
            raise ConfigError("radio_range", "must be positive")
        if not self.bike_speed > 0:
            raise ConfigError("bike_speed", "must be positive")
        if self.sense_rate < 0:
            raise ConfigError("sense_rate", "must not be negative")
        if not self.tick > 0:
            raise ConfigError("tick", "must be positive")
        if self.max_start_delay < 0:
            raise ConfigError("max_start_delay", "must not be negative")
        if not self.duration > 0:
            raise ConfigError("duration", "must be positive")


@dataclass
class BikeState:
    bike_id: int
    source_station: int
    dest_station: int
    start_time: float
    position: tuple
    buffer: int = 0
    total_generated: int = 0
    total_sent: int = 0
    phase: str = "waiting"  # waiting | riding | arrived
    traveled: float = 0.0
    carry: float = 0.0  # fractional bytes not yet materialized


@dataclass(frozen=True)
class TraceEvent:
    kind: str  # generate | send | receive
    time: float
    bike_id: int
    station_id: int | None
    bytes: int


@dataclass(frozen=True)
class SimTrace:
    config: SimConfig
    events: tuple
    sent_by_bike: dict
    received_by_station: dict


@dataclass
class SimWorld:
    config: SimConfig
    bikes: list
    time: float = 0.0
    events: list = field(default_factory=list)

    def all_arrived(self) -> bool:
        return all(b.phase == "arrived" for b in self.bikes)


def grid_stations(rows: int = 2, cols: int = 3, spacing: float = 500.0) -> tuple:
    """Synthetic rows x cols station grid; ids count 1.. across each row.

    The default is the six-station layout the simulator falls back to when
    no dataset is loaded, spaced widely enough that the default radio range
    leaves real dead zones between stations.
    """
    out = []
    for r in range(rows):
        for c in range(cols):
            out.append(SimStation(r * cols + c + 1, c * spacing, r * spacing))
    return tuple(out)


_EARTH_RADIUS_M = 6371000.0


def stations_from_store(store: HistoryStore) -> tuple:
    """Project station coordinates onto a flat meter plane.

    Equirectangular projection about the centroid: good to well under a
    meter across a city-sized extent, and it keeps distances symmetric.
    """
    records = [store.stations[sid] for sid in store.station_ids()]
    if not records:
        return ()
    lat0 = math.radians(sum(r.latitude for r in records) / len(records))
    lon0 = math.radians(sum(r.longitude for r in records) / len(records))
    out = []
    for r in records:
        x = _EARTH_RADIUS_M * (math.radians(r.longitude) - lon0) * math.cos(lat0)
        y = _EARTH_RADIUS_M * (math.radians(r.latitude) - lat0)
        out.append(SimStation(r.station_id, x, y))
    return tuple(out)


def init_simulation(config: SimConfig) -> SimWorld:
    """Roll every bike's trip from the seed.

    Draw order is fixed per bike (source, destination, start delay) in
    bike_id order, so the same seed always yields the same world.
    """
    config.validate()
    rng = Random(config.seed)
    stations = config.stations
    bikes = []
    for bike_id in range(config.n_bikes):
        src = rng.randrange(len(stations))
        other = rng.randrange(len(stations) - 1)
        dst = other if other < src else other + 1
        start = rng.uniform(0.0, config.max_start_delay)
        bikes.append(BikeState(
            bike_id=bike_id,
            source_station=stations[src].station_id,
            dest_station=stations[dst].station_id,
            start_time=start,
            position=(stations[src].x, stations[src].y),
        ))
    return SimWorld(config=config, bikes=bikes)


def offload(bike_id: int, in_range_stations: Sequence[int], bytes_available: int) -> list:
    """Split the buffer equally among the stations currently in range.

    Every station gets floor(bytes/k); the remainder goes one byte each to
    stations in ascending id order. Returns (station_id, bytes) pairs in
    ascending id order, zero allocations included.
    """
    ids = sorted(in_range_stations)
    if not ids:
        return []
    base, remainder = divmod(bytes_available, len(ids))
    return [(sid, base + (1 if i < remainder else 0)) for i, sid in enumerate(ids)]


def _station_positions(config: SimConfig) -> dict:
    return {s.station_id: (s.x, s.y) for s in config.stations}


def _in_range(config: SimConfig, positions: dict, at: tuple) -> list:
    reach = config.radio_range
    out = []
    for sid, (sx, sy) in positions.items():
        if math.hypot(at[0] - sx, at[1] - sy) <= reach:  # closed boundary
            out.append(sid)
    return out


def step(world: SimWorld, tick: float | None = None) -> SimWorld:
    """Advance every bike across one tick, then run offloads.

    All events land on the tick's end time. Within a tick, bikes are
    processed in bike_id order and each bike logs generation before its
    send/receive pairs.
    """
    config = world.config
    if tick is None:
        tick = config.tick
    positions = _station_positions(config)
    coords = {s.station_id: (s.x, s.y) for s in config.stations}
    t_end = world.time + tick

    for bike in world.bikes:
        if bike.phase == "arrived" or bike.start_time >= t_end:
            continue
        src = coords[bike.source_station]
        dst = coords[bike.dest_station]
        seg_len = math.hypot(dst[0] - src[0], dst[1] - src[1])

        bike.phase = "riding"
        ride_from = max(world.time, bike.start_time)
        dt = t_end - ride_from
        remaining = (seg_len - bike.traveled) / config.bike_speed
        arriving = remaining <= dt
        dt_ride = min(dt, remaining)

        if arriving:
            bike.traveled = seg_len
            bike.position = dst
        else:
            bike.traveled += config.bike_speed * dt_ride
            if seg_len > 0:
                f = bike.traveled / seg_len
                bike.position = (src[0] + (dst[0] - src[0]) * f,
                                 src[1] + (dst[1] - src[1]) * f)

        bike.carry += config.sense_rate * dt_ride
        generated = int(bike.carry)
        if generated >= 1:
            bike.carry -= generated
            bike.buffer += generated
            bike.total_generated += generated
            world.events.append(TraceEvent("generate", t_end, bike.bike_id, None, generated))

        in_range = _in_range(config, positions, bike.position)
        if in_range and bike.buffer > 0:
            for sid, amount in offload(bike.bike_id, in_range, bike.buffer):
                if amount == 0:
                    continue
                world.events.append(TraceEvent("send", t_end, bike.bike_id, sid, amount))
                world.events.append(TraceEvent("receive", t_end, bike.bike_id, sid, amount))
                bike.total_sent += amount
            bike.buffer = 0

        if arriving:
            bike.phase = "arrived"

    world.time = t_end
    return world


def run_simulation(config: SimConfig) -> SimTrace:
    """Run to the duration (whole ticks) or until every bike has arrived."""
    world = init_simulation(config)
    n_ticks = int(config.duration / config.tick + 1e-9)
    for i in range(n_ticks):
        if world.all_arrived():
            break
        world.time = i * config.tick  # recomputed to avoid float accumulation
        step(world)

    sent, received = summarize_trace(world.events)
    for bike in world.bikes:
        sent.setdefault(bike.bike_id, 0)
    for station in config.stations:
        received.setdefault(station.station_id, 0)
    return SimTrace(config=config, events=tuple(world.events),
                    sent_by_bike=sent, received_by_station=received)


def summarize_trace(events: Iterable[TraceEvent]):
    """Fold an event stream into per-bike sent and per-station received totals.

    Raises TraceError when the stream violates the reliable-transfer pairing:
    a receive without its send, or a send never matched by a receive.
    """
    sent: dict[int, int] = {}
    received: dict[int, int] = {}
    pending: dict[tuple, int] = {}
    for ev in events:
        if ev.kind == "generate":
            continue
        key = (ev.time, ev.bike_id, ev.station_id, ev.bytes)
        if ev.kind == "send":
            sent[ev.bike_id] = sent.get(ev.bike_id, 0) + ev.bytes
            pending[key] = pending.get(key, 0) + 1
        elif ev.kind == "receive":
            if pending.get(key, 0) == 0:
                raise TraceError(f"receive without matching send: {ev}")
            pending[key] -= 1
            received[ev.station_id] = received.get(ev.station_id, 0) + ev.bytes
        else:
            raise TraceError(f"unknown event kind: {ev.kind}")
    unmatched = sum(pending.values())
    if unmatched:
        raise TraceError(f"{unmatched} send event(s) without a matching receive")
    return sent, received


def format_trace(trace: SimTrace) -> str:
    """Render the line-oriented trace text, bit-exact.

    One line per event (`g`, `s`, `r`), times with exactly 3 decimals,
    then a `#` summary block listing every bike and station in id order.
    """
    lines = []
    for ev in trace.events:
        stamp = f"{ev.time:.3f}"
        if ev.kind == "generate":
            lines.append(f"g {stamp} {ev.bike_id} {ev.bytes}")
        elif ev.kind == "send":
            lines.append(f"s {stamp} {ev.bike_id} {ev.station_id} {ev.bytes}")
        else:
            lines.append(f"r {stamp} {ev.bike_id} {ev.station_id} {ev.bytes}")
    for bike_id in sorted(trace.sent_by_bike):
        lines.append(f"# bike {bike_id} sent {trace.sent_by_bike[bike_id]}")
    for station_id in sorted(trace.received_by_station):
        lines.append(f"# station {station_id} received {trace.received_by_station[station_id]}")
    return "\n".join(lines) + "\n"


def write_trace(trace: SimTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_trace(trace))
