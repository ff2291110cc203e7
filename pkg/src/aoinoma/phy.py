"""Superposition-coding SINR, short-packet decode errors, and the SIC chain.

All vehicles receive the same superposed message. A shared decoding
order fixes which process is stripped first; a vehicle that fails any
position in the chain loses that position and everything after it,
whether or not it cares about those processes.
"""

import itertools
import math

import numpy as np

from . import backend

_LN2 = math.log(2.0)


def all_orders(n_processes):
    """Every full decoding order (tuple of 0-based process indices)."""
    if n_processes > 6:
        raise ValueError("full order enumeration capped at 6 processes")
    return list(itertools.permutations(range(n_processes)))


def validate_order(order, n_processes):
    order = tuple(int(x) for x in order)
    if len(set(order)) != len(order):
        raise ValueError("decoding order must not repeat processes")
    if any(not 0 <= x < n_processes for x in order):
        raise ValueError("decoding order indices out of range")
    if len(order) > n_processes:
        raise ValueError("decoding order longer than process count")
    return order


def sinr(gain, order, powers, sigma2, position):
    """SINR at one vehicle for the message at ``position`` (0-based) of ``order``.

    The numerator holds that position's power through the vehicle's
    effective gain; the denominator sums the not-yet-stripped powers plus
    noise.
    """
    if not 0 <= position < len(order):
        raise ValueError("position outside the decoding order")
    p_here = powers[order[position]]
    tail = sum(powers[order[m]] for m in range(position + 1, len(order)))
    return p_here * gain / (gain * tail + sigma2)


def rate_nats(payload_bits, tx_time, bandwidth):
    """Coding rate in nats per channel use for an update of ``payload_bits``."""
    return payload_bits * _LN2 / (tx_time * bandwidth)


def decode_error(gamma, payload_bits, tx_time, bandwidth):
    """Decoding error probability at SINR ``gamma`` in the short-packet regime.

    Gaussian tail of sqrt(n / dispersion) * (ln(1+gamma) - rate), with
    n = tx_time * bandwidth channel uses and dispersion 1 - (1+gamma)^-2.
    """
    if gamma <= 0:
        raise ValueError("SINR must be positive")
    n = tx_time * bandwidth
    if n < 1:
        raise ValueError("blocklength below one symbol")
    return float(backend.decode_error_numpy(gamma, n, rate_nats(payload_bits, tx_time, bandwidth)))


def sic_chain(gains, order, powers, sigma2, payload_bits, tx_time, bandwidth, eps_max):
    """Run the decode chain for every vehicle under one shared order.

    gains: (V,) effective gains; powers: (F,) watts per process.
    Returns (sinr, eps, decoded), each (V, len(order)), where decoded is
    True only on the maximal passing prefix of the order. Zero allocated
    power yields eps = 1 rather than an error so idle actions are legal.
    """
    order = validate_order(order, len(powers))
    p_in_order = np.asarray([powers[l] for l in order], dtype=np.float64)
    n = tx_time * bandwidth
    return backend.sic_chain_kernel(
        np.asarray(gains, dtype=np.float64), p_in_order, sigma2, n,
        rate_nats(payload_bits, tx_time, bandwidth), eps_max)


def decoded_processes(order, decoded_positions, n_processes):
    """Map per-position decode flags back to a (V, F) per-process mask."""
    V = decoded_positions.shape[0]
    out = np.zeros((V, n_processes), dtype=bool)
    for pos, proc in enumerate(order):
        out[:, proc] = decoded_positions[:, pos]
    return out
