"""Complex channel vectors, array steering, and the shared transmit beamformer.

The transmitter carries a half-wavelength uniform linear array. Each
vehicle's channel is a deterministic function of its geometry: a free
space amplitude (inverse distance), the array steering phases, and a
Doppler phase factor. The beamformer is a maximum-ratio combination of
all vehicle channels, rescaled to unit power so the power budget lives
entirely in the per-process allocations.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import sample_geometry


@dataclass(frozen=True)
class ChannelSnapshot:
    """Per-slot channel state for all vehicles."""
    vectors: np.ndarray        # (V, N) complex
    large_scale: np.ndarray    # (V,) complex, attenuation with Doppler phase
    gains: np.ndarray          # (V,) effective power gain |h^H w|^2
    angles: np.ndarray         # (V,) rad
    distances: np.ndarray      # (V,) m
    beamformer: np.ndarray     # (N,) complex, unit norm


def steering_vector(angle, n_elements):
    """Half-wavelength ULA steering vector: element k is exp(j*k*pi*sin(angle))."""
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    k = np.arange(n_elements)
    return np.exp(1j * k * np.pi * np.sin(angle))


def channel_vector(geom, fc, c0, n_elements):
    """Channel column for one vehicle.

    Every element has magnitude sqrt(c0 / (4*pi*fc*distance^2)); phases
    come from the conjugated steering vector and the Doppler factor
    exp(j*2*pi*doppler).
    """
    if geom.distance <= 0:
        raise ValueError("distance must be positive")
    amp = np.sqrt(c0 / (4.0 * np.pi * fc * geom.distance ** 2))
    return amp * np.conj(steering_vector(geom.angle, n_elements)) * np.exp(2j * np.pi * geom.doppler)


def large_scale_attenuation(geom, fc, c0):
    """Complex attenuation: power-like magnitude with the opposite Doppler phase."""
    return (c0 / (4.0 * np.pi * fc * geom.distance ** 2)) * np.exp(-2j * np.pi * geom.doppler)


def mrt_beamformer(vectors, large_scale):
    """Maximum-ratio transmit beamformer over all vehicle channels.

    w is proportional to sum_i h_i / sqrt(N * |chi_i|), rescaled to unit
    norm. Raises if the weighted channel sum degenerates to zero.
    """
    vectors = np.asarray(vectors)
    if vectors.ndim != 2 or vectors.shape[0] < 1:
        raise ValueError("need at least one vehicle channel")
    n = vectors.shape[1]
    weights = 1.0 / np.sqrt(n * np.abs(large_scale))
    raw = (vectors * weights[:, None]).sum(axis=0)
    norm = np.linalg.norm(raw)
    if norm == 0.0:
        raise ValueError("degenerate channel sum, beamformer undefined")
    return raw / norm


def snapshot(vehicles, rsu, fc, c0, n_elements):
    """Compute the full channel state for the current vehicle positions."""
    geos = [sample_geometry(v, rsu, fc, c0) for v in vehicles]
    vectors = np.stack([channel_vector(g, fc, c0, n_elements) for g in geos])
    chi = np.array([large_scale_attenuation(g, fc, c0) for g in geos])
    w = mrt_beamformer(vectors, chi)
    gains = np.abs(vectors.conj() @ w) ** 2
    return ChannelSnapshot(
        vectors=vectors,
        large_scale=chi,
        gains=gains,
        angles=np.array([g.angle for g in geos]),
        distances=np.array([g.distance for g in geos]),
        beamformer=w,
    )
