import numpy as np
import pytest

from aoinoma.channel import (channel_vector, large_scale_attenuation,
                             mrt_beamformer, snapshot, steering_vector)
from aoinoma.geometry import GeometrySample, VehicleState

FC = 3e9
C0 = 2.99e8


def test_steering_zero_angle_all_ones():
    np.testing.assert_allclose(steering_vector(0.0, 4), np.ones(4), atol=1e-15)


def test_steering_endfire_alternates():
    np.testing.assert_allclose(steering_vector(np.pi / 2, 2), [1.0, -1.0], atol=1e-12)


def test_steering_30_degrees():
    # sin(pi/6) = 1/2 -> phases k*pi/2
    np.testing.assert_allclose(steering_vector(np.pi / 6, 3), [1.0, 1j, -1.0], atol=1e-12)


def test_channel_element_magnitude():
    # independent evaluation: 2.99e8 / (4*pi*3e9*100^2)
    geom = GeometrySample(distance=100.0, angle=0.7, doppler=120.0)
    h = channel_vector(geom, FC, C0, 8)
    expect = 2.99e8 / (4.0 * np.pi * 3e9 * 1e4)
    np.testing.assert_allclose(np.abs(h) ** 2, expect, rtol=1e-9)
    assert expect == pytest.approx(7.9312213e-07, rel=1e-6)


def test_channel_distance_squared_law():
    g1 = GeometrySample(distance=50.0, angle=0.3, doppler=0.0)
    g2 = GeometrySample(distance=100.0, angle=0.3, doppler=0.0)
    h1 = channel_vector(g1, FC, C0, 4)
    h2 = channel_vector(g2, FC, C0, 4)
    np.testing.assert_allclose(np.abs(h2) ** 2, np.abs(h1) ** 2 / 4.0, rtol=1e-12)


def test_zero_doppler_channel_is_real_up_to_steering():
    geom = GeometrySample(distance=80.0, angle=0.0, doppler=0.0)
    h = channel_vector(geom, FC, C0, 5)
    assert np.all(np.abs(h.imag) < 1e-18)


def test_beamformer_unit_norm_and_single_vehicle_gain():
    geom = GeometrySample(distance=120.0, angle=0.9, doppler=30.0)
    h = channel_vector(geom, FC, C0, 16)[None, :]
    chi = np.array([large_scale_attenuation(geom, FC, C0)])
    w = mrt_beamformer(h, chi)
    assert np.linalg.norm(w) ** 2 == pytest.approx(1.0, abs=1e-9)
    gain = np.abs(h[0].conj() @ w) ** 2
    assert gain == pytest.approx(np.linalg.norm(h[0]) ** 2, rel=1e-9)


def test_two_identical_channels_match_single():
    geom = GeometrySample(distance=70.0, angle=0.4, doppler=10.0)
    h = channel_vector(geom, FC, C0, 8)
    chi = large_scale_attenuation(geom, FC, C0)
    w1 = mrt_beamformer(h[None, :], np.array([chi]))
    w2 = mrt_beamformer(np.stack([h, h]), np.array([chi, chi]))
    np.testing.assert_allclose(w1, w2, atol=1e-12)


def test_mrt_dominates_random_beams():
    # Cauchy-Schwarz: no unit vector beats beamforming straight at the user
    rng = np.random.default_rng(7)
    geom = GeometrySample(distance=100.0, angle=1.1, doppler=55.0)
    h = channel_vector(geom, FC, C0, 64)
    chi = np.array([large_scale_attenuation(geom, FC, C0)])
    w = mrt_beamformer(h[None, :], chi)
    g_mrt = np.abs(h.conj() @ w) ** 2
    for _ in range(1000):
        u = rng.normal(size=64) + 1j * rng.normal(size=64)
        u /= np.linalg.norm(u)
        assert np.abs(h.conj() @ u) ** 2 <= g_mrt * (1 + 1e-12)


def test_gain_invariant_to_common_phase():
    rng = np.random.default_rng(3)
    geos = [GeometrySample(distance=d, angle=a, doppler=0.0)
            for d, a in [(60.0, 0.2), (90.0, 1.3), (150.0, 2.1)]]
    H = np.stack([channel_vector(g, FC, C0, 8) for g in geos])
    chi = np.array([large_scale_attenuation(g, FC, C0) for g in geos])
    w = mrt_beamformer(H, chi)
    gains = np.abs(H.conj() @ w) ** 2
    phase = np.exp(1j * rng.uniform(0, 2 * np.pi))
    w2 = mrt_beamformer(H * phase, chi)
    gains2 = np.abs((H * phase).conj() @ w2) ** 2
    np.testing.assert_allclose(gains, gains2, rtol=1e-9)


def test_gain_never_exceeds_channel_norm():
    rng = np.random.default_rng(11)
    vehicles = [VehicleState(x=float(rng.uniform(0, 3000)), y=1.5,
                             speed=12.0, direction=1) for _ in range(6)]
    snap = snapshot(vehicles, (1500.0, 50.0), FC, C0, 16)
    norms = np.linalg.norm(snap.vectors, axis=1) ** 2
    assert np.all(snap.gains <= norms * (1 + 1e-12))
    assert np.linalg.norm(snap.beamformer) ** 2 == pytest.approx(1.0, abs=1e-9)


def test_degenerate_beamformer_rejected():
    with pytest.raises(ValueError):
        mrt_beamformer(np.zeros((1, 4), dtype=complex), np.array([1.0 + 0j]))
