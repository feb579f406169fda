import json
import threading
from concurrent.futures import ThreadPoolExecutor
from datetime import date, datetime
from urllib.error import HTTPError
from urllib.request import urlopen

import pytest

from velomule import service
from velomule.analytics import Window

from synth import synth_dataset


@pytest.fixture(scope="module")
def scenario():
    return synth_dataset(2024)


@pytest.fixture(scope="module")
def base_url(scenario):
    server = service.serve(scenario[3], ("127.0.0.1", 0))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    yield f"http://{host}:{port}"
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def _get(base_url, path):
    try:
        with urlopen(base_url + path, timeout=10) as resp:
            return resp.status, json.loads(resp.read().decode("utf-8"))
    except HTTPError as exc:
        return exc.code, json.loads(exc.read().decode("utf-8"))


def test_stations_listing(base_url, scenario):
    status, payload = _get(base_url, "/stations")
    assert status == 200
    assert payload == service.stations_payload(scenario[3])
    assert [s["station_id"] for s in payload] == scenario[3].station_ids()
    assert {"name", "latitude", "longitude", "dock_count"} <= set(payload[0])


def test_forecast_endpoint_matches_builder(base_url, scenario):
    store = scenario[3]
    status, payload = _get(base_url, "/stations/25/forecast?date=2016-06-10")
    assert status == 200
    assert payload == service.forecast_payload(store, 25, date(2016, 6, 10))
    assert payload["n_expected"] is not None
    assert payload["samples_used"] is not None


def test_wait_endpoint_accepts_t_separator(base_url, scenario):
    store = scenario[3]
    status, payload = _get(base_url, "/stations/25/wait?at=2016-06-01T15:45:00")
    assert status == 200
    expected = service.wait_payload(store, 25, datetime(2016, 6, 1, 15, 45, 0))
    assert payload == expected
    assert len(payload["points"]) == 31
    assert all(0.0 <= p["probability"] <= 1.0 for p in payload["points"])


def test_load_endpoint(base_url, scenario):
    store = scenario[3]
    status, payload = _get(base_url, "/stations/25/load?at=2016-05-20T12:00:00")
    assert status == 200
    assert payload == service.load_payload(store, 25, datetime(2016, 5, 20, 12, 0, 0))
    assert payload["total"] == payload["bikes"] + payload["docks"]


def test_load_endpoint_before_history_carries_note(base_url):
    status, payload = _get(base_url, "/stations/25/load?at=2001-01-01T00:00:00")
    assert status == 200
    assert payload["bikes"] is None
    assert "note" in payload


def test_routes_endpoint(base_url, scenario):
    store = scenario[3]
    window_text = "2016-05-01T00:00:00..2016-06-20T00:00:00"
    status, payload = _get(base_url, f"/routes/25/40?window={window_text}")
    assert status == 200
    window = Window(datetime(2016, 5, 1), datetime(2016, 6, 20))
    assert payload == service.route_payload(store, 25, 40, window)
    assert payload["trips_either_direction"] >= (payload["n_total"] or 0)


def test_route_loop(base_url):
    window_text = "2016-05-01T00:00:00..2016-06-20T00:00:00"
    status, payload = _get(base_url, f"/routes/25/25?window={window_text}")
    assert status == 200
    assert payload["is_loop"] is True


def test_unknown_station_is_404(base_url):
    status, payload = _get(base_url, "/stations/999/load?at=2016-05-20T12:00:00")
    assert status == 404
    assert "999" in payload["error"]
    status, payload = _get(base_url, "/stations/999/forecast?date=2016-06-10")
    assert status == 404
    status, payload = _get(base_url, "/routes/25/999?window=2016-05-01T00:00:00..2016-06-20T00:00:00")
    assert status == 404


def test_unknown_path_is_404(base_url):
    status, payload = _get(base_url, "/nope")
    assert status == 404
    status, payload = _get(base_url, "/stations/25/unknown?x=1")
    assert status == 404


@pytest.mark.parametrize(
    "path",
    [
        "/stations/abc/load?at=2016-05-20T12:00:00",  # non-integer id
        "/stations/25/load",  # missing parameter
        "/stations/25/load?at=yesterday",  # malformed timestamp
        "/stations/25/forecast?date=2016-13-01",  # malformed date
        "/routes/25/40?window=2016-05-01T00:00:00",  # malformed window
        "/routes/25/40?window=2016-06-20T00:00:00..2016-05-01T00:00:00",  # reversed
        "/routes/25/x?window=2016-05-01T00:00:00..2016-06-20T00:00:00",
    ],
)
def test_malformed_requests_are_400(base_url, path):
    status, payload = _get(base_url, path)
    assert status == 400
    assert "error" in payload


def test_concurrent_identical_requests_agree(base_url):
    paths = [
        "/stations/25/wait?at=2016-06-01T15:45:00",
        "/stations/25/forecast?date=2016-06-10",
        "/stations",
    ]
    with ThreadPoolExecutor(max_workers=8) as pool:
        for path in paths:
            bodies = list(pool.map(lambda _: _get(base_url, path), range(8)))
            assert all(b == bodies[0] for b in bodies)


def test_requests_leave_store_unchanged(base_url, scenario):
    import pickle
    store = scenario[3]
    before = pickle.dumps((store.trips, store.status, store.summary))
    for _ in range(3):
        _get(base_url, "/stations/25/wait?at=2016-06-01T15:45:00")
        _get(base_url, "/stations/25/load?at=2016-05-20T12:00:00")
    assert pickle.dumps((store.trips, store.status, store.summary)) == before
