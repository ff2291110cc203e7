import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoinoma.aoi import (AoiAccumulator, aoi_bounds, demand_matrix, evolve_aoi,
                         scalarize, validate_demand)

DELTA = 1e-3


def test_evolve_reset_on_decode():
    ages = np.full((2, 2), 3 * DELTA)
    out = evolve_aoi(ages, np.array([[True, False], [False, True]]), DELTA)
    assert out[0, 0] == DELTA and out[1, 1] == DELTA
    assert out[0, 1] == pytest.approx(4 * DELTA)
    assert out[1, 0] == pytest.approx(4 * DELTA)


def test_bounds_worked_example():
    # 10 vehicles, 2 demands each, delta=1, T=100
    R = np.zeros((10, 4), dtype=int)
    R[:, :2] = 1
    lo, hi = aoi_bounds(R, 1.0, 100)
    assert lo == 20.0
    assert hi == 1010.0


def test_bounds_degenerate_horizon():
    R = np.ones((2, 2), dtype=int)
    lo, hi = aoi_bounds(R, 1e-3, 1)
    assert lo == hi


def test_scalarize_pure_power():
    assert scalarize(5.0, 0.25, 0.0, (2.0, 8.0), 1.0) == pytest.approx(0.25)


def test_scalarize_utopia_aoi():
    assert scalarize(2.0, 0.7, 1.0, (2.0, 8.0), 1.0) == 0.0


def test_scalarize_midpoint_symmetry():
    assert scalarize(5.0, 0.5, 0.5, (2.0, 8.0), 1.0) == pytest.approx(0.5)


def test_scalarize_rejects_degenerate_bounds():
    with pytest.raises(ValueError):
        scalarize(1.0, 0.5, 0.5, (2.0, 2.0), 1.0)


@given(st.floats(0.01, 0.99), st.floats(0.0, 1.0))
@settings(max_examples=50, deadline=None)
def test_scalarize_in_unit_interval(frac_aoi, frac_p):
    lo, hi = 2.0, 9.0
    val = scalarize(lo + frac_aoi * (hi - lo), frac_p * 1.0, 0.37, (lo, hi), 1.0)
    assert 0.0 <= val <= 1.0


def test_scalarize_monotonicity():
    lo, hi = 1.0, 5.0
    a1 = scalarize(2.0, 0.5, 0.5, (lo, hi), 1.0)
    a2 = scalarize(3.0, 0.5, 0.5, (lo, hi), 1.0)
    assert a2 > a1
    b1 = scalarize(2.0, 0.4, 0.5, (lo, hi), 1.0)
    b2 = scalarize(2.0, 0.6, 0.5, (lo, hi), 1.0)
    assert b2 > b1


def test_demand_matrix_row_sums():
    rng = np.random.default_rng(0)
    R = demand_matrix(12, 5, 3, rng)
    assert R.shape == (12, 5)
    assert (R.sum(axis=1) == 3).all()


def test_demand_validation():
    with pytest.raises(ValueError):
        validate_demand(np.array([[1, 0], [0, 0]]))
    with pytest.raises(ValueError):
        validate_demand(np.array([[2, 0], [0, 1]]))


def test_never_decode_attains_upper_bound_exactly():
    # ramp from a virtual zero: ages t*delta, average delta*(T+1)/2 per pair
    R = np.array([[1, 0], [1, 1]])
    T = 17
    acc = AoiAccumulator(R)
    ages = np.zeros((2, 2))
    decoded = np.zeros((2, 2), dtype=bool)
    for _ in range(T):
        ages = evolve_aoi(ages, decoded, DELTA)
        acc.push(ages)
    lo, hi = aoi_bounds(R, DELTA, T)
    assert acc.average() == pytest.approx(hi, rel=1e-12)


def test_always_decode_attains_lower_bound_exactly():
    R = np.array([[1, 1], [0, 1]])
    T = 23
    acc = AoiAccumulator(R)
    ages = np.zeros((2, 2))
    decoded = np.ones((2, 2), dtype=bool)
    for _ in range(T):
        ages = evolve_aoi(ages, decoded, DELTA)
        acc.push(ages)
    lo, _ = aoi_bounds(R, DELTA, T)
    assert acc.average() == pytest.approx(lo, rel=1e-12)


def test_time_average_identity():
    # accumulator total matches an independent triple-sum
    rng = np.random.default_rng(4)
    R = (rng.random((3, 4)) < 0.6).astype(int)
    R[R.sum(axis=1) == 0, 0] = 1
    T = 40
    acc = AoiAccumulator(R)
    ages = np.zeros((3, 4))
    history = []
    for _ in range(T):
        decoded = rng.random((3, 4)) < 0.3
        ages = evolve_aoi(ages, decoded, DELTA)
        history.append(ages.copy())
        acc.push(ages)
    manual = sum(float((R * a).sum()) for a in history) / T
    assert acc.average() == pytest.approx(manual, rel=1e-12)
