import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trafficrl.errors import ParameterError
from trafficrl.sim.arrivals import (
    arrival_schedule,
    sample_interarrival,
    section_rng,
    weibull_from_uniform,
    weibull_mean,
)


def test_shape_one_is_exponential_at_u_e_inverse():
    assert weibull_from_uniform(math.exp(-1), 1.0, 10.0) == pytest.approx(10.0, abs=1e-12)


def test_shape_two_mean_matches_gamma():
    rng = np.random.default_rng(7)
    draws = weibull_from_uniform(rng.random(1_000_000), 2.0, 10.0)
    assert abs(draws.mean() - 10 * math.gamma(1.5)) < 0.05
    assert weibull_mean(2.0, 10.0) == pytest.approx(8.862269254527579, abs=1e-12)


@pytest.mark.parametrize("shape, scale", [(0, 10), (2, 0), (-1, 5), (2, -3)])
def test_non_positive_parameters_rejected(shape, scale):
    with pytest.raises(ParameterError):
        sample_interarrival(np.random.default_rng(0), shape, scale)


def test_sample_interarrival_is_positive_and_seeded():
    a = [sample_interarrival(np.random.default_rng(3), 2.0, 10.0) for _ in range(3)]
    assert a[0] == a[1] == a[2] > 0


def test_deterministic_schedule_is_evenly_spaced():
    sched = arrival_schedule("deterministic", 2.0, 10.0, 100.0, section_rng(0, 0))
    gaps = np.diff(sched)
    assert np.allclose(gaps, weibull_mean(2.0, 10.0))
    assert sched[-1] < 100.0


def test_schedule_streams_differ_per_section():
    a = arrival_schedule("weibull", 2.0, 10.0, 500.0, section_rng(1, 0))
    b = arrival_schedule("weibull", 2.0, 10.0, 500.0, section_rng(1, 1))
    assert not np.array_equal(a[:10], b[:10])


@given(st.floats(0.3, 5.0), st.floats(0.5, 100.0), st.floats(1e-9, 1 - 1e-9))
def test_inverse_cdf_roundtrip(shape, scale, u):
    x = weibull_from_uniform(u, shape, scale)
    # survival function of the Weibull evaluated at x recovers u
    assert math.exp(-((x / scale) ** shape)) == pytest.approx(u, rel=1e-9, abs=1e-12)
