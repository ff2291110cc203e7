import math

import mpmath
import numpy as np
import pytest

from aoinoma import backend
from aoinoma.phy import (all_orders, decode_error, decoded_processes, rate_nats,
                         sic_chain, sinr, validate_order)

L_BITS = 1024
TX_TIME = 0.9e-3
BW = 1e7
N_SYM = TX_TIME * BW  # 9000 channel uses


def q_tail_mp(x):
    """High-precision Gaussian tail via mpmath erfc."""
    return float(0.5 * mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)))


def eps_oracle(gamma):
    g = mpmath.mpf(gamma)
    disp = 1 - 1 / (1 + g) ** 2
    rate = mpmath.mpf(L_BITS) * mpmath.log(2) / N_SYM
    arg = mpmath.sqrt(N_SYM / disp) * (mpmath.log(1 + g) - rate)
    return q_tail_mp(arg)


def test_sinr_first_position():
    assert sinr(2.0, (0, 1), [0.6, 0.4], 0.1, 0) == pytest.approx(1.2 / 0.9, rel=1e-12)


def test_sinr_second_position():
    assert sinr(2.0, (0, 1), [0.6, 0.4], 0.1, 1) == pytest.approx(8.0, rel=1e-12)


def test_last_position_no_interference():
    g, s2 = 0.7, 0.05
    p = [0.2, 0.3, 0.5]
    assert sinr(g, (2, 0, 1), p, s2, 2) == pytest.approx(p[1] * g / s2, rel=1e-12)


def test_decode_error_half_at_rate_point():
    rate = rate_nats(L_BITS, TX_TIME, BW)
    gamma_star = math.exp(rate) - 1.0
    assert decode_error(gamma_star, L_BITS, TX_TIME, BW) == pytest.approx(0.5, abs=1e-12)


def test_decode_error_vanishes_at_high_sinr():
    assert decode_error(1e6, L_BITS, TX_TIME, BW) < 1e-300


def test_decode_error_against_high_precision_oracle():
    for gamma in (0.05, 0.0821, 0.1, 0.12, 0.2, 1.0):
        expect = eps_oracle(gamma)
        got = decode_error(gamma, L_BITS, TX_TIME, BW)
        assert got == pytest.approx(expect, rel=1e-9), gamma


def test_decode_error_rejects_nonpositive_sinr():
    with pytest.raises(ValueError):
        decode_error(0.0, L_BITS, TX_TIME, BW)
    with pytest.raises(ValueError):
        decode_error(-1.0, L_BITS, TX_TIME, BW)


def test_decode_error_strictly_decreasing():
    # strict inside the transition band; both tails saturate in float64
    gammas = np.linspace(0.06, 0.2, 100)
    eps = [decode_error(g, L_BITS, TX_TIME, BW) for g in gammas]
    assert all(a > b for a, b in zip(eps, eps[1:]))
    wide = [decode_error(g, L_BITS, TX_TIME, BW)
            for g in np.linspace(0.001, 5.0, 100)]
    assert all(a >= b for a, b in zip(wide, wide[1:]))


def test_sic_prefix_property():
    rng = np.random.default_rng(2)
    for _ in range(50):
        gains = rng.uniform(1e-7, 1e-4, size=4)
        powers = rng.uniform(0.0, 0.4, size=3)
        _, _, dec = sic_chain(gains, (2, 0, 1), powers, 1e-6, L_BITS, TX_TIME,
                              BW, 1e-3)
        for row in dec:
            # once False, False forever
            assert not np.any(np.diff(row.astype(int)) > 0)


def test_sic_first_failure_blocks_rest():
    # huge power at later positions, none at the first: nothing decodes
    gains = np.array([1e-4])
    powers = np.array([0.0, 0.9])
    _, eps, dec = sic_chain(gains, (0, 1), powers, 1e-6, L_BITS, TX_TIME, BW, 1e-6)
    assert eps[0, 0] == 1.0
    assert not dec.any()


def test_sic_all_pass_when_all_strong():
    gains = np.array([1e-3, 2e-3])
    powers = np.array([0.5, 0.5])
    _, eps, dec = sic_chain(gains, (1, 0), powers, 1e-9, L_BITS, TX_TIME, BW, 1e-6)
    assert dec.all()
    assert (eps <= 1e-6).all()


def test_sinr_depends_only_on_successor_set():
    # fixed process power; interference = gain * sum of later powers
    gains = 3e-5
    powers = [0.2, 0.3, 0.1]
    s2 = 1e-6
    a = sinr(gains, (0, 1, 2), powers, s2, 1)   # successors of 1: {2}
    b = sinr(gains, (2, 1, 0), powers, s2, 1)   # wait: position 1 is process 1 in both
    assert a == pytest.approx(powers[1] * gains / (gains * powers[2] + s2), rel=1e-12)
    assert b == pytest.approx(powers[1] * gains / (gains * powers[0] + s2), rel=1e-12)


def test_interference_monotonicity():
    gains = 5e-5
    s2 = 1e-6
    lo = sinr(gains, (0, 1), [0.3, 0.1], s2, 0)
    hi = sinr(gains, (0, 1), [0.3, 0.4], s2, 0)
    assert hi < lo


def test_order_validation():
    with pytest.raises(ValueError):
        validate_order((0, 0), 2)
    with pytest.raises(ValueError):
        validate_order((0, 5), 2)
    assert validate_order((1, 0), 2) == (1, 0)


def test_all_orders_count_and_cap():
    assert len(all_orders(3)) == 6
    with pytest.raises(ValueError):
        all_orders(7)


def test_decoded_processes_mapping():
    dec_pos = np.array([[True, True, False], [True, False, False]])
    mask = decoded_processes((2, 0, 1), dec_pos, 3)
    np.testing.assert_array_equal(mask, [[True, False, True], [False, False, True]])


def test_backend_parity_sic_chain():
    rng = np.random.default_rng(9)
    rate = rate_nats(L_BITS, TX_TIME, BW)
    for _ in range(20):
        gains = rng.uniform(1e-8, 1e-3, size=5)
        powers = rng.uniform(0.0, 0.5, size=4)
        ref = backend.sic_chain_numpy(gains, powers, 1e-6, N_SYM, rate, 1e-6)
        got = backend.sic_chain_kernel(gains, powers, 1e-6, N_SYM, rate, 1e-6)
        for r, g in zip(ref, got):
            np.testing.assert_allclose(np.asarray(g, dtype=float),
                                       np.asarray(r, dtype=float), rtol=1e-9,
                                       atol=1e-300)
