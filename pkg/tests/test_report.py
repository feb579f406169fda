import json
import math
from datetime import date, datetime, timedelta

import pytest

from velomule import analytics as A
from velomule import report as R
from velomule.errors import NoHistoryError
from velomule.ingest import StationRecord, StatusRecord, build_store
from velomule.sim import SimConfig, grid_stations, run_simulation

from synth import synth_dataset


@pytest.fixture(scope="module")
def scenario():
    return synth_dataset(2024)


def test_round_sig():
    assert R.round_sig(None) is None
    assert R.round_sig(15) == 15
    assert R.round_sig(15.0) == 15
    assert str(R.round_sig(15.0)) == "15"
    assert R.round_sig(11.01388888888889) == 11.0139
    assert R.round_sig(0.4545454545454545) == 0.454545
    assert R.round_sig(1234567.0) == 1234567


def test_table_rejects_duplicate_labels():
    with pytest.raises(ValueError):
        R.ReportTable("t", "x", "y", (("a", 1), ("a", 2)), "p")


def test_table_rejects_non_finite_values():
    with pytest.raises(ValueError):
        R.ReportTable("t", "x", "y", (("a", math.inf),), "p")


def test_fig_forecast_matches_direct_calls(scenario):
    stations, status, trips, store = scenario
    target = date(2016, 6, 10)
    table = R.fig_forecast(store, target)
    assert [label for label, _ in table.rows] == [str(s) for s in store.station_ids()]
    for sid in store.station_ids():
        direct = A.availability_forecast(store, sid, target).n_expected
        assert table.value(str(sid)) == R.round_sig(direct)
    assert table.notes == ()


def test_fig_forecast_null_row_for_missing_history():
    rows = [StatusRecord(2, 5, 10, datetime(2016, 5, 25, 10, 0, 0))]
    stations = [
        StationRecord(2, "A", 37.33, -121.89, 15, "SJ", date(2013, 8, 6)),
        StationRecord(3, "B", 37.34, -121.89, 15, "SJ", date(2013, 8, 6)),
    ]
    table = R.fig_forecast(build_store(stations, rows, []), date(2016, 6, 1))
    assert table.value("2") is not None
    assert table.value("3") is None
    notes = dict(table.notes)
    assert "3" in notes and notes["3"]


def test_fig_busy_by_hour_matches_direct_calls(scenario):
    stations, status, trips, store = scenario
    table = R.fig_busy_by_hour(store, 8)
    bounds = store.trip_time_bounds()
    window = A.Window(bounds[0], bounds[1] + timedelta(seconds=1))
    for sid in store.station_ids():
        direct = A.busyness_by_hour(store, sid, window)[8].total
        assert table.value(str(sid)) == direct


def test_fig_busy_by_hour_per_day_normalizes(scenario):
    stations, status, trips, store = scenario
    raw = R.fig_busy_by_hour(store, 8)
    per_day = R.fig_busy_by_hour(store, 8, per_day=True)
    bounds = store.trip_time_bounds()
    days = (bounds[1] + timedelta(seconds=1) - bounds[0]).total_seconds() / 86400.0
    for (label, value), (_, normalized) in zip(raw.rows, per_day.rows):
        assert normalized == R.round_sig(value / days)


def test_fig_busy_by_hour_rejects_bad_hour(scenario):
    with pytest.raises(ValueError):
        R.fig_busy_by_hour(scenario[3], 24)


def test_fig_busy_by_hour_without_trips_is_all_null():
    stations = [StationRecord(2, "A", 37.33, -121.89, 15, "SJ", date(2013, 8, 6)),
                StationRecord(3, "B", 37.34, -121.89, 15, "SJ", date(2013, 8, 6))]
    table = R.fig_busy_by_hour(build_store(stations, [], []), 8)
    assert all(value is None for _, value in table.rows)
    assert len(table.notes) == 2


def test_fig_trips_per_station_sums_to_window_total(scenario):
    stations, status, trips, store = scenario
    window = A.Window(datetime(2016, 5, 5), datetime(2016, 6, 5))
    table = R.fig_trips_per_station(store, window)
    # Full-scan total: every trip departs exactly once.
    expected_total = sum(1 for t in trips if window.start <= t.start_at < window.end)
    assert sum(value for _, value in table.rows) == expected_total


def test_fig_load_factor_mixes_values_and_nulls(scenario):
    stations, status, trips, store = scenario
    at = datetime(2016, 5, 20, 12, 0, 0)
    table = R.fig_load_factor(store, at)
    for sid in store.station_ids():
        assert table.value(str(sid)) == A.load_factor(store, sid, at).total
    early = R.fig_load_factor(store, datetime(2016, 1, 1))
    assert all(value is None for _, value in early.rows)
    assert len(early.notes) == len(store.station_ids())


def test_fig_wait_series_has_31_rows(scenario):
    stations, status, trips, store = scenario
    sid = store.station_ids()[0]
    table = R.fig_wait_series(store, sid, datetime(2016, 6, 1, 15, 45, 0))
    assert len(table.rows) == 31
    assert [label for label, _ in table.rows] == [str(m) for m in range(31)]
    series = A.wait_probability_series(store, sid, datetime(2016, 6, 1, 15, 45, 0))
    for point in series.points:
        assert table.value(str(point.minute)) == R.round_sig(point.probability)


def test_fig_wait_series_without_history_is_null_rows():
    stations = [StationRecord(2, "A", 37.33, -121.89, 15, "SJ", date(2013, 8, 6)),
                StationRecord(3, "B", 37.34, -121.89, 15, "SJ", date(2013, 8, 6))]
    store = build_store(stations, [], [])
    with pytest.raises(NoHistoryError):
        A.wait_probability_series(store, 2, datetime(2016, 6, 1, 15, 45, 0))
    table = R.fig_wait_series(store, 2, datetime(2016, 6, 1, 15, 45, 0))
    assert len(table.rows) == 31
    assert all(value is None for _, value in table.rows)
    assert len(table.notes) == 31


def test_sim_summary_table():
    cfg = SimConfig(n_bikes=3, stations=grid_stations(), max_start_delay=30.0,
                    duration=400.0, seed=9)
    trace = run_simulation(cfg)
    table = R.sim_summary(trace)
    labels = [label for label, _ in table.rows]
    assert labels[:3] == ["bike 0", "bike 1", "bike 2"]
    assert labels[3:] == [f"station {sid}" for sid in range(1, 7)]
    for bike_id, sent in trace.sent_by_bike.items():
        assert table.value(f"bike {bike_id}") == sent
    for sid, received in trace.received_by_station.items():
        assert table.value(f"station {sid}") == received


def _sample_table():
    return R.ReportTable(
        title="Sample",
        x_label="station",
        y_label="value",
        rows=(("2", 15), ("3", 11.0139), ("4", None), ("5", 0.454545)),
        provenance="sample(p=1)",
        notes=(("4", "no reading"),),
    )


def test_csv_round_trip(tmp_path):
    table = _sample_table()
    path = tmp_path / "t.csv"
    R.write_table_csv(table, path)
    assert R.read_table_csv(path) == table


def test_csv_format_details(tmp_path):
    path = tmp_path / "t.csv"
    R.write_table_csv(_sample_table(), path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    assert lines[0].startswith("# ")
    assert lines[1] == "label,value"
    assert lines[2] == "2,15"  # integers carry no decimal padding
    assert lines[3] == "3,11.0139"
    assert lines[4] == "4,"  # null row
    assert "\r" not in text


def test_csv_without_metadata_still_reads(tmp_path):
    path = tmp_path / "bare.csv"
    path.write_text("label,value\na,1\nb,2.5\n", encoding="utf-8")
    table = R.read_table_csv(path)
    assert table.rows == (("a", 1), ("b", 2.5))


def test_json_round_trip(tmp_path):
    table = _sample_table()
    path = tmp_path / "t.json"
    R.write_table_json(table, path)
    assert R.read_table_json(path) == table
    payload = json.loads(path.read_text(encoding="utf-8"))
    assert payload["rows"][0] == {"label": "2", "value": 15}
    assert payload["rows"][2] == {"label": "4", "value": None}


def test_tables_regenerate_byte_identically(tmp_path, scenario):
    stations, status, trips, store = scenario
    args = dict(
        forecast_date=date(2016, 6, 10),
        hour=8,
        window=A.Window(datetime(2016, 5, 5), datetime(2016, 6, 5)),
        load_at=datetime(2016, 5, 20, 12, 0, 0),
        wait_station=store.station_ids()[0],
        arrival=datetime(2016, 6, 1, 15, 45, 0),
        render=False,
    )
    first = tmp_path / "a"
    second = tmp_path / "b"
    R.write_all(store, first, **args)
    R.write_all(store, second, **args)
    for name in ("fig4", "fig5", "fig6", "fig7", "fig8", "fig9"):
        for ext in (".csv", ".json"):
            a = (first / f"{name}{ext}").read_bytes()
            b = (second / f"{name}{ext}").read_bytes()
            assert a == b, f"{name}{ext} differs between runs"


def test_write_all_produces_all_outputs(tmp_path, scenario):
    stations, status, trips, store = scenario
    trace = run_simulation(SimConfig(n_bikes=2, stations=grid_stations(),
                                     duration=300.0, seed=3))
    written = R.write_all(
        store, tmp_path,
        forecast_date=date(2016, 6, 10),
        hour=8,
        window=A.Window(datetime(2016, 5, 5), datetime(2016, 6, 5)),
        load_at=datetime(2016, 5, 20, 12, 0, 0),
        wait_station=store.station_ids()[0],
        arrival=datetime(2016, 6, 1, 15, 45, 0),
        trace=trace,
        render=True,
    )
    for name in ("fig4", "fig5", "fig6", "fig7", "fig8", "fig9"):
        assert (tmp_path / f"{name}.csv").exists()
        assert (tmp_path / f"{name}.json").exists()
        assert (tmp_path / f"{name}.png").stat().st_size > 0
    assert (tmp_path / "sim_summary.csv").exists()
    assert set(written) == {"fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "sim_summary"}
    # Every table read back from disk equals its in-memory twin.
    table = R.read_table_csv(tmp_path / "fig9.csv")
    assert table == R.fig_wait_series(store, store.station_ids()[0],
                                      datetime(2016, 6, 1, 15, 45, 0))
