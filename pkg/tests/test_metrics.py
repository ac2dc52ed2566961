import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopaoa.gaussian import Gaussian
from coopaoa.geometry import VehicleState
from coopaoa.metrics import cdf_at, direction_rmse, error_cdf, heading_errors, position_errors, position_rmse


def test_single_vehicle_345():
    assert position_rmse([Gaussian([3.0, 4.0, 0.0], np.eye(3))], [VehicleState(0, 0, 0)]) == pytest.approx(5.0)


def test_two_vehicles():
    est = np.array([[3.0, 4.0, 0.0], [6.0, 8.0, 0.0]])
    assert position_rmse(est, np.zeros((2, 3))) == pytest.approx(math.sqrt(62.5))
    est = np.array([[5.0, 5.0, 0.0], [-5.0, 5.0, 0.0]])
    assert position_rmse(est, np.zeros((2, 3))) == pytest.approx(math.sqrt(50.0))


def test_heading_wraps():
    est = np.array([[0, 0, math.pi - 0.1]])
    tru = np.array([[0, 0, -math.pi + 0.1]])
    assert direction_rmse(est, tru) == pytest.approx(0.2)


def test_exclusion():
    est = np.array([[100.0, 0, 0], [1.0, 0, 0]])
    assert position_rmse(est, np.zeros((2, 3)), exclude={0}) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        position_rmse(est, np.zeros((2, 3)), exclude={0, 1})


def test_cdf():
    e = [1.0, 2.0, 5.0]
    assert cdf_at(e, 4.0) == pytest.approx(2 / 3)
    assert error_cdf(e) == [(1.0, 1 / 3), (2.0, 2 / 3), (5.0, 1.0)]
    assert error_cdf([1.0, 1.0, 2.0]) == [(1.0, 2 / 3), (2.0, 1.0)]


def test_empty_cdf():
    with pytest.raises(ValueError):
        error_cdf([])


@given(st.integers(0, 2**32 - 1))
def test_relabelling_invariant_and_bounded(seed):
    rng = np.random.default_rng(seed)
    est = rng.normal(0, 10, (7, 3))
    tru = rng.normal(0, 10, (7, 3))
    p = rng.permutation(7)
    assert position_rmse(est[p], tru[p]) == pytest.approx(position_rmse(est, tru))
    assert direction_rmse(est[p], tru[p]) == pytest.approx(direction_rmse(est, tru))
    assert np.all(heading_errors(est, tru) <= math.pi)
    assert np.all(position_errors(est, tru) >= 0)
