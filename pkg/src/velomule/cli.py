"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error. Every error goes to
stderr with an `error:` prefix. The `analyze` subcommands print the same
JSON payloads the query service returns, so the two stay interchangeable
(`analyze wait` prints bare per-minute lines by default; pass --json for
the service shape).
"""

from __future__ import annotations

import argparse
import sys
from datetime import timedelta

from . import report as report_mod
from . import service
from .analytics import Window, rank_stations
from .config import RuntimeConfig, load_config
from .errors import ConfigError, ParseError, VelomuleError
from .ingest import HistoryStore, load_history
from .sim import SimConfig, grid_stations, run_simulation, stations_from_store, write_trace
from .timestamps import parse_date, render_date

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; our CLI contract says 1."""

    def error(self, message):
        message = _friendly(message)
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _friendly(message: str) -> str:
    prefix = "the following arguments are required: "
    if message.startswith(prefix):
        return "missing " + message[len(prefix):]
    return message


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--stations", help="station roster CSV")
    parser.add_argument("--status", help="dock status CSV")
    parser.add_argument("--trips", help="trip log CSV")
    parser.add_argument("--config", help="JSON config file (or VELOMULE_CONFIG)")
    parser.add_argument("--cache-dir", dest="cache_dir", help="binary store cache directory")
    parser.add_argument("--strict", action="store_true", default=None,
                        help="fail on the first malformed or dangling row")
    parser.add_argument("--weights",
                        help="forecast factor weights, e.g. 0.25,0.5,0.25")


def _runtime_config(args) -> RuntimeConfig:
    flags = {key: getattr(args, key, None)
             for key in ("stations", "status", "trips", "cache_dir", "strict", "weights")}
    return load_config(getattr(args, "config", None), flags=flags)


def _load_store(cfg: RuntimeConfig) -> HistoryStore:
    for key in ("stations", "status", "trips"):
        if getattr(cfg, key) is None:
            raise _UsageError(f"missing --{key}")
    return load_history(cfg.stations, cfg.status, cfg.trips, strict=cfg.strict,
                        columns=cfg.columns, cache_dir=cfg.cache_dir)


def _parse_flag_timestamp(text: str, flag: str):
    try:
        return service.parse_cli_timestamp(text)
    except ParseError as exc:
        raise _UsageError(f"invalid {flag}: {exc}") from exc


def _parse_flag_date(text: str, flag: str):
    try:
        return parse_date(text)
    except ParseError as exc:
        raise _UsageError(f"invalid {flag}: {exc}") from exc


def _parse_flag_window(text: str, flag: str) -> Window:
    try:
        return service.parse_window_text(text)
    except (ParseError, ValueError) as exc:
        raise _UsageError(f"invalid {flag}: {exc}") from exc


def _full_window(store: HistoryStore) -> Window:
    bounds = store.trip_time_bounds()
    if bounds is None:
        raise VelomuleError("store has no trips; pass --window explicitly")
    return Window(bounds[0], bounds[1] + timedelta(seconds=1))


def _window_or_default(args, store: HistoryStore) -> Window:
    if args.window is not None:
        return _parse_flag_window(args.window, "--window")
    return _full_window(store)


def _print(payload) -> None:
    sys.stdout.write(service.render_payload(payload))


def _cmd_ingest(args) -> int:
    cfg = _runtime_config(args)
    store = _load_store(cfg)
    _print(store.summary.as_dict())
    return 0


def _cmd_analyze(args) -> int:
    cfg = _runtime_config(args)
    store = _load_store(cfg)
    sub = args.analyze_command
    if sub == "forecast":
        target = _parse_flag_date(args.date, "--date")
        _print(service.forecast_payload(store, args.station, target, cfg.weights))
    elif sub == "busy":
        window = _window_or_default(args, store)
        _print(service.busyness_payload(store, args.station, window))
    elif sub == "hours":
        window = _window_or_default(args, store)
        _print(service.hours_payload(store, args.station, window))
    elif sub == "rank":
        window = _window_or_default(args, store)
        _print(service.rank_payload(store, window))
    elif sub == "load":
        at = _parse_flag_timestamp(args.at, "--at")
        _print(service.load_payload(store, args.station, at))
    elif sub == "trip":
        window = _window_or_default(args, store)
        _print(service.route_payload(store, args.from_station, args.to_station, window))
    elif sub == "wait":
        at = _parse_flag_timestamp(args.at, "--at")
        payload = service.wait_payload(store, args.station, at, cfg.weights)
        if args.json:
            _print(payload)
        elif payload["points"] is None:
            raise VelomuleError(payload["note"])
        else:
            for point in payload["points"]:
                print(f"{point['minute']} {point['probability']!r}")
    return 0


def _sim_stations(args):
    cfg = _runtime_config(args)
    if not args.grid and all(getattr(cfg, k) is not None
                             for k in ("stations", "status", "trips")):
        return stations_from_store(_load_store(cfg))
    return grid_stations()


def _cmd_simulate(args) -> int:
    sim_config = SimConfig(
        n_bikes=args.bikes,
        stations=_sim_stations(args),
        radio_range=args.radio_range,
        bike_speed=args.speed,
        sense_rate=args.sense_rate,
        tick=args.tick,
        max_start_delay=args.max_start_delay,
        duration=args.duration,
        seed=args.seed,
    )
    try:
        sim_config.validate()
    except ConfigError as exc:  # the values came straight from flags
        raise _UsageError(str(exc)) from exc
    trace = run_simulation(sim_config)
    write_trace(trace, args.out)
    print(args.out)
    return 0


def _cmd_report(args) -> int:
    cfg = _runtime_config(args)
    store = _load_store(cfg)

    status_bounds = store.status_time_bounds()
    if args.date is not None:
        target = _parse_flag_date(args.date, "--date")
    elif status_bounds is not None:
        target = status_bounds[1].date() + timedelta(days=1)
    else:
        raise VelomuleError("store has no status readings; pass --date explicitly")

    window = _window_or_default(args, store)

    if args.at is not None:
        load_at = _parse_flag_timestamp(args.at, "--at")
    elif status_bounds is not None:
        load_at = status_bounds[1]
    else:
        raise VelomuleError("store has no status readings; pass --at explicitly")

    arrival = (_parse_flag_timestamp(args.arrival, "--arrival")
               if args.arrival is not None else load_at)
    wait_station = (args.wait_station if args.wait_station is not None
                    else rank_stations(store, window)[0][0])

    trace = None
    if not args.no_sim:
        sim_config = SimConfig(
            n_bikes=args.sim_bikes,
            stations=stations_from_store(store),
            max_start_delay=60.0,
            duration=args.sim_duration,
            seed=args.sim_seed,
        )
        sim_config.validate()
        trace = run_simulation(sim_config)

    written = report_mod.write_all(
        store, args.out,
        forecast_date=target,
        hour=args.hour,
        window=window,
        load_at=load_at,
        wait_station=wait_station,
        arrival=arrival,
        trace=trace,
        render=not args.no_render,
    )
    for name in sorted(written):
        for path in written[name]:
            print(path)
    return 0


def _cmd_serve(args) -> int:
    cfg = _runtime_config(args)
    store = _load_store(cfg)
    host, _, port_text = args.addr.rpartition(":")
    if not host or not port_text.isdigit():
        raise _UsageError(f"invalid --addr: {args.addr!r} (expected HOST:PORT)")
    try:
        server = service.serve(store, (host, int(port_text)), cfg.weights)
    except OSError as exc:
        raise VelomuleError(f"cannot bind {args.addr}: {exc}") from exc
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="velomule",
                     description="Bike-share analytics and data-muling bike simulator.")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p_ingest = commands.add_parser("ingest", help="parse the CSVs and print a build summary")
    _add_data_flags(p_ingest)
    p_ingest.set_defaults(func=_cmd_ingest)

    p_analyze = commands.add_parser("analyze", help="run one analytics query")
    analyze_subs = p_analyze.add_subparsers(dest="analyze_command", required=True,
                                            metavar="QUERY")

    def analyze_sub(name, help_text):
        sp = analyze_subs.add_parser(name, help=help_text)
        _add_data_flags(sp)
        sp.set_defaults(func=_cmd_analyze)
        return sp

    sp = analyze_sub("forecast", "expected bikes available on a date")
    sp.add_argument("--station", type=int, required=True)
    sp.add_argument("--date", required=True, help="YYYY-MM-DD")

    sp = analyze_sub("busy", "arrivals plus departures in a window")
    sp.add_argument("--station", type=int, required=True)
    sp.add_argument("--window", help="START..END (default: full trip span)")

    sp = analyze_sub("hours", "busyness split into 24 hour bins")
    sp.add_argument("--station", type=int, required=True)
    sp.add_argument("--window", help="START..END (default: full trip span)")

    sp = analyze_sub("rank", "stations ordered by busyness")
    sp.add_argument("--window", help="START..END (default: full trip span)")

    sp = analyze_sub("load", "bikes plus empty docks at an instant")
    sp.add_argument("--station", type=int, required=True)
    sp.add_argument("--at", required=True, help="YYYY-MM-DD HH:MM:SS")

    sp = analyze_sub("trip", "trip time stats between two stations")
    sp.add_argument("--from", dest="from_station", type=int, required=True)
    sp.add_argument("--to", dest="to_station", type=int, required=True)
    sp.add_argument("--window", help="START..END (default: full trip span)")

    sp = analyze_sub("wait", "31-minute bike availability series")
    sp.add_argument("--station", type=int, required=True)
    sp.add_argument("--at", required=True, help="arrival time YYYY-MM-DD HH:MM:SS")
    sp.add_argument("--json", action="store_true", help="print the service JSON shape")

    p_sim = commands.add_parser("simulate", help="run the bike data-muling simulator")
    _add_data_flags(p_sim)
    p_sim.add_argument("--bikes", type=int, required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--duration", type=float, default=600.0)
    p_sim.add_argument("--out", required=True, help="trace file to write")
    p_sim.add_argument("--grid", action="store_true",
                       help="use the synthetic 6-station grid even with data flags")
    p_sim.add_argument("--radio-range", dest="radio_range", type=float, default=100.0)
    p_sim.add_argument("--speed", type=float, default=4.0)
    p_sim.add_argument("--sense-rate", dest="sense_rate", type=float, default=8.0)
    p_sim.add_argument("--tick", type=float, default=1.0)
    p_sim.add_argument("--max-start-delay", dest="max_start_delay", type=float, default=60.0)
    p_sim.set_defaults(func=_cmd_simulate)

    p_report = commands.add_parser("report", help="write all figure tables to a directory")
    _add_data_flags(p_report)
    p_report.add_argument("--out", required=True, help="output directory")
    p_report.add_argument("--date", help="forecast date (default: day after last reading)")
    p_report.add_argument("--hour", type=int, default=8)
    p_report.add_argument("--window", help="START..END (default: full trip span)")
    p_report.add_argument("--at", help="load factor instant (default: last reading)")
    p_report.add_argument("--wait-station", dest="wait_station", type=int,
                          help="station for the wait series (default: busiest)")
    p_report.add_argument("--arrival", help="wait series anchor (default: last reading)")
    p_report.add_argument("--no-render", dest="no_render", action="store_true",
                          help="skip PNG rendering")
    p_report.add_argument("--no-sim", dest="no_sim", action="store_true",
                          help="skip the simulator summary table")
    p_report.add_argument("--sim-bikes", dest="sim_bikes", type=int, default=10)
    p_report.add_argument("--sim-seed", dest="sim_seed", type=int, default=42)
    p_report.add_argument("--sim-duration", dest="sim_duration", type=float, default=600.0)
    p_report.set_defaults(func=_cmd_report)

    p_serve = commands.add_parser("serve", help="start the read-only JSON query service")
    _add_data_flags(p_serve)
    p_serve.add_argument("--addr", default="127.0.0.1:8080", help="HOST:PORT")
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:  # malformed config file or environment
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VelomuleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
