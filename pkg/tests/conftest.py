import numpy as np
import pytest

from tripcast.trajectory import RawTrip

PORTO = (41.1579, -8.6291)


def make_trip(trip_id, points, start_ts=1_400_000_000, call_type="A", origin_call=None,
              origin_stand=None, taxi_id=20000001, day_type="A", missing_flag=False):
    return RawTrip(trip_id=trip_id, call_type=call_type, origin_call=origin_call,
                   origin_stand=origin_stand, taxi_id=taxi_id, start_ts=start_ts,
                   day_type=day_type, missing_flag=missing_flag,
                   polyline=np.asarray(points, dtype=float).reshape(-1, 2))


def straight_line(origin, n, step_deg=(0.001, 0.0)):
    o = np.asarray(origin, dtype=float)
    return o + np.arange(n)[:, None] * np.asarray(step_deg)


def random_walk(rng, n, origin=PORTO, step=0.002):
    steps = rng.normal(scale=step, size=(n, 2))
    steps[0] = 0
    return np.asarray(origin) + np.cumsum(steps, axis=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
