"""Property tests: invariants of the mixing math and agreement with the
naive reference implementations on randomized datasets."""

from datetime import date, datetime, timedelta
from random import Random

import pytest
from hypothesis import given, settings, strategies as st

from velomule import analytics as A
from velomule.errors import NoDataError, NoHistoryError

import oracles
from synth import synth_dataset

_VALUES = st.tuples(*[st.one_of(st.none(), st.floats(0, 50)) for _ in range(3)])


@given(_VALUES)
def test_combined_probability_is_convex(values):
    mixed, weights = A.combined_probability(values)
    present = [v for v in values if v is not None]
    if not present:
        assert mixed is None
        assert weights == (0.0, 0.0, 0.0)
        return
    assert min(present) - 1e-9 <= mixed <= max(present) + 1e-9
    assert abs(sum(weights) - 1.0) <= 1e-12
    for w, v in zip(weights, values):
        assert (w == 0.0) == (v is None) or v is not None


@given(_VALUES, st.integers(0, 2), st.floats(0.001, 20))
def test_combined_probability_monotone_in_each_factor(values, which, bump):
    if values[which] is None:
        values = list(values)
        values[which] = 0.0
        values = tuple(values)
    before, _ = A.combined_probability(values)
    bumped = list(values)
    bumped[which] += bump
    after, _ = A.combined_probability(tuple(bumped))
    assert after >= before - 1e-9


@given(st.integers(0, 10_000))
def test_weights_renormalize_to_unit_sum(seed):
    rng = Random(seed)
    values = tuple(rng.uniform(0, 30) if rng.random() < 0.7 else None for _ in range(3))
    mixed, weights = A.combined_probability(values)
    if mixed is not None:
        assert abs(sum(weights) - 1.0) <= 1e-12


def _ids(stations):
    return [s.station_id for s in stations]


@pytest.mark.parametrize("seed", range(6))
def test_busyness_matches_oracle(seed):
    stations, status, trips, store = synth_dataset(seed, n_stations=4, n_days=25,
                                                   per_day=6, n_trips=150)
    rng = Random(seed * 7 + 1)
    for _ in range(5):
        w0 = datetime(2016, 5, 1) + timedelta(seconds=rng.randrange(25 * 86400))
        w1 = w0 + timedelta(seconds=rng.randrange(1, 15 * 86400))
        sid = rng.choice(_ids(stations))
        b = A.busyness(store, sid, A.Window(w0, w1))
        assert (b.incoming, b.outgoing, b.total) == oracles.busyness(trips, sid, (w0, w1))
        hours = A.busyness_by_hour(store, sid, A.Window(w0, w1))
        assert [(h.incoming, h.outgoing, h.total) for h in hours] == \
            oracles.busyness_by_hour(trips, sid, (w0, w1))
        assert sum(h.total for h in hours) == b.total


@pytest.mark.parametrize("seed", range(6))
def test_forecast_matches_oracle(seed):
    stations, status, trips, store = synth_dataset(seed, n_stations=4, n_days=30,
                                                   per_day=6, n_trips=50)
    rng = Random(seed * 7 + 2)
    for _ in range(5):
        sid = rng.choice(_ids(stations))
        target = date(2016, 5, 1) + timedelta(days=rng.randrange(40))
        expected = oracles.forecast(status, sid, target)
        try:
            f = A.availability_forecast(store, sid, target)
        except NoHistoryError:
            assert expected is None
            continue
        assert expected is not None
        assert f.samples_used == expected["counts"]
        for got, want in zip(f.factor_values, expected["values"]):
            assert (got is None) == (want is None)
            if got is not None:
                assert got == pytest.approx(want, rel=1e-9)
        assert f.n_expected == pytest.approx(expected["n"], rel=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_load_factor_matches_oracle(seed):
    stations, status, trips, store = synth_dataset(seed, n_stations=4, n_days=20,
                                                   per_day=8, n_trips=50)
    rng = Random(seed * 7 + 3)
    for _ in range(8):
        sid = rng.choice(_ids(stations))
        at = datetime(2016, 5, 1) + timedelta(seconds=rng.randrange(20 * 86400))
        expected = oracles.load_factor(status, sid, at)
        try:
            lf = A.load_factor(store, sid, at)
        except NoDataError:
            assert expected is None
            continue
        assert (lf.bikes, lf.docks, lf.total, lf.observed_at) == expected


@pytest.mark.parametrize("seed", range(6))
def test_trip_time_and_routes_match_oracle(seed):
    stations, status, trips, store = synth_dataset(seed, n_stations=4, n_days=25,
                                                   per_day=4, n_trips=250)
    rng = Random(seed * 7 + 4)
    ids = _ids(stations)
    for _ in range(6):
        a, b = rng.choice(ids), rng.choice(ids)
        w0 = datetime(2016, 5, 1) + timedelta(seconds=rng.randrange(25 * 86400))
        w1 = w0 + timedelta(seconds=rng.randrange(1, 20 * 86400))
        win = A.Window(w0, w1)
        expected = oracles.trip_time(trips, a, b, (w0, w1))
        try:
            tt = A.trip_time(store, a, b, win)
        except NoDataError:
            assert expected is None
        else:
            n_xy, n_yx, mean, lo, hi = expected
            assert (tt.n_out, tt.n_back, tt.min_s, tt.max_s) == (n_xy, n_yx, lo, hi)
            assert tt.mean_s == pytest.approx(mean, rel=1e-9)
            assert tt.min_s <= tt.mean_s <= tt.max_s
        assert A.route_busyness(store, a, b, win) == oracles.route_count(trips, a, b, (w0, w1))
        assert A.route_busyness(store, a, b, win) == A.route_busyness(store, b, a, win)
        directed = (A.route_busyness_directed(store, a, b, win)
                    + A.route_busyness_directed(store, b, a, win))
        if a != b:
            assert directed == A.route_busyness(store, a, b, win)


@pytest.mark.parametrize("seed", range(6))
def test_wait_series_matches_oracle(seed):
    stations, status, trips, store = synth_dataset(seed, n_stations=3, n_days=30,
                                                   per_day=30, n_trips=20)
    docks = {s.station_id: s.dock_count for s in stations}
    rng = Random(seed * 7 + 5)
    for _ in range(3):
        sid = rng.choice(_ids(stations))
        anchor = datetime(2016, 5, 1) + timedelta(minutes=rng.randrange(30 * 1440))
        expected = oracles.wait_series(status, sid, docks[sid], anchor)
        try:
            series = A.wait_probability_series(store, sid, anchor)
        except NoHistoryError:
            assert expected is None
            continue
        assert expected is not None
        assert len(series.points) == 31
        for point, (p, values) in zip(series.points, expected):
            assert 0.0 <= point.probability <= 1.0
            assert point.probability == pytest.approx(p, abs=1e-9)
            for got, want in zip(point.factor_values, values):
                assert (got is None) == (want is None)
                if got is not None:
                    assert got == pytest.approx(want, rel=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_rank_matches_oracle(seed):
    stations, status, trips, store = synth_dataset(seed, n_stations=5, n_days=20,
                                                   per_day=3, n_trips=200)
    w = (datetime(2016, 5, 3), datetime(2016, 5, 18))
    ranked = A.rank_stations(store, A.Window(*w))
    assert ranked == oracles.rank(trips, _ids(stations), w)
    totals = [t for _, t in ranked]
    assert totals == sorted(totals, reverse=True)
