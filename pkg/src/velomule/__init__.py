"""velomule: bike-share analytics and a data-muling bike simulator.

The package splits into five parts: `ingest` builds an immutable indexed
store from the three CSV datasets, `analytics` answers availability and
busyness queries over it, `sim` runs the deterministic bike simulator,
`report` emits labeled figure tables, and `cli`/`service` expose all of it
from the command line and over HTTP.
"""

from .analytics import (
    AvailabilityForecast,
    BusynessReport,
    LoadFactorReading,
    TripTimeStats,
    WaitProbabilitySeries,
    Window,
    availability_forecast,
    busyness,
    busyness_by_hour,
    load_factor,
    rank_stations,
    route_busyness,
    trip_time,
    wait_probability_series,
)
from .config import RuntimeConfig, load_config
from .errors import (
    ConfigError,
    NoDataError,
    NoHistoryError,
    ParseError,
    ReferentialError,
    RowError,
    SchemaError,
    TraceError,
    UnknownStationError,
    VelomuleError,
)
from .ingest import (
    HistoryStore,
    StationRecord,
    StatusRecord,
    TripRecord,
    build_store,
    load_history,
    parse_station_csv,
    parse_status_csv,
    parse_trip_csv,
)
from .report import ReportTable, write_all
from .sim import (
    SimConfig,
    SimStation,
    SimTrace,
    grid_stations,
    run_simulation,
    stations_from_store,
    write_trace,
)
from .timestamps import Timestamp, parse_timestamp, render_timestamp

__version__ = "0.1.0"
