"""Numerical kernels with a numba fast path and a pure-numpy fallback.

The hot inner loops of the simulator live here: the per-slot SIC decode
chain evaluated for every vehicle, the Monte-Carlo hypervolume counter,
and the exhaustive per-slot action scan. Each kernel has a reference
numpy implementation; when numba is importable the same routines are
compiled with ``@njit`` and used instead.

Backend selection is controlled by the environment variable
``AOINOMA_BACKEND``:

* unset or ``"auto"`` -- numba if available, else numpy
* ``"numba"``         -- force numba (raises if numba is missing)
* ``"numpy"``         -- force the pure-numpy path

``active_backend()`` reports which one is in use.
"""

import math
import os

import numpy as np
from scipy.special import erfc as _sp_erfc

_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# pure-numpy reference implementations
# ---------------------------------------------------------------------------

def gaussian_tail_numpy(q):
    """Upper-tail probability of the standard normal, accurate deep in the tail."""
    return 0.5 * _sp_erfc(np.asarray(q, dtype=np.float64) / _SQRT2)


def decode_error_numpy(gamma, n_symbols, rate_nats):
    """Short-packet decoding error probability for SINR array ``gamma``.

    Gaussian tail of the gap between instantaneous capacity ln(1+gamma)
    and the coding rate (nats per symbol), scaled by the channel
    dispersion 1 - (1+gamma)^-2 over ``n_symbols`` channel uses.
    gamma <= 0 maps to error probability 1 (nothing transmitted).
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    out = np.ones(gamma.shape, dtype=np.float64)
    # dispersion underflows to 0 below gamma ~ 1e-16; capacity is then far
    # under any positive rate, so the error saturates at 1
    pos = (1.0 + gamma) ** 2 > 1.0
    g = gamma[pos]
    disp = 1.0 - 1.0 / (1.0 + g) ** 2
    arg = np.sqrt(n_symbols / disp) * (np.log1p(g) - rate_nats)
    out[pos] = 0.5 * _sp_erfc(arg / _SQRT2)
    return out


def sic_chain_numpy(gains, powers_in_order, sigma2, n_symbols, rate_nats, eps_max):
    """Evaluate the SIC decode chain for every vehicle.

    gains: (V,) effective channel power gains
    powers_in_order: (K,) transmit powers listed in decoding order
    Returns (sinr, eps, decoded) each of shape (V, K). A position decodes
    only if it and every earlier position in the order meet ``eps_max``.
    """
    gains = np.asarray(gains, dtype=np.float64)
    p = np.asarray(powers_in_order, dtype=np.float64)
    V, K = gains.shape[0], p.shape[0]
    # interference at position l = gain * (sum of powers after l)
    tail = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
    sig = gains[:, None] * p[None, :]
    inter = gains[:, None] * tail[None, :]
    sinr = sig / (inter + sigma2)
    eps = decode_error_numpy(sinr, n_symbols, rate_nats)
    ok = eps <= eps_max
    decoded = np.logical_and.accumulate(ok, axis=1)
    return sinr, eps, decoded


def hv_mc_count_numpy(points, samples):
    """Number of ``samples`` dominated by at least one of ``points`` (minimization)."""
    if len(points) == 0:
        return 0
    points = np.asarray(points, dtype=np.float64)
    samples = np.asarray(samples, dtype=np.float64)
    dom = (points[None, :, 0] <= samples[:, 0, None]) & (
        points[None, :, 1] <= samples[:, 1, None]
    )
    return int(np.count_nonzero(dom.any(axis=1)))


def exhaustive_scan_numpy(gains, orders, alphas, p_max, sigma2, n_symbols,
                          rate_nats, eps_max, ages, demand, delta, aging,
                          aoi_weight, power_weight):
    """Scan all (order, power-grid) candidates, return the slot-greedy best.

    orders: (nO, F) int array of process indices per decode position
    alphas: (nA, F) feasible power fractions per process
    ages/demand: (V, F); ``aging`` is the per-slot age increment applied to
    non-refreshed entries (zero on the degenerate first slot).
    Score per candidate: aoi_weight * sum_r(age') + power_weight * total power.
    Returns (best_order_idx, best_alpha_idx, best_score).
    """
    gains = np.asarray(gains, dtype=np.float64)
    ages = np.asarray(ages, dtype=np.float64)
    demand = np.asarray(demand, dtype=np.float64)
    nO, F = orders.shape
    nA = alphas.shape[0]
    V = gains.shape[0]
    grown = ages + aging
    base_aoi = float(np.sum(demand * grown))
    powers = alphas * p_max                       # (nA, F) per process
    total_p = powers.sum(axis=1)                  # (nA,)
    best = (0, 0, np.inf)
    for o in range(nO):
        order = orders[o]
        p_ord = powers[:, order]                  # (nA, F) in decode order
        tail = np.concatenate(
            [np.cumsum(p_ord[:, ::-1], axis=1)[:, ::-1][:, 1:],
             np.zeros((nA, 1))], axis=1)
        sig = gains[None, :, None] * p_ord[:, None, :]       # (nA, V, F)
        inter = gains[None, :, None] * tail[:, None, :]
        sinr = sig / (inter + sigma2)
        eps = decode_error_numpy(sinr, n_symbols, rate_nats)
        dec_pos = np.logical_and.accumulate(eps <= eps_max, axis=2)
        dec_proc = np.zeros((nA, V, F), dtype=bool)
        dec_proc[:, :, order] = dec_pos
        # decoding saves (grown - delta) on each satisfied demanded entry
        saved = (dec_proc * demand[None, :, :] * (grown - delta)[None, :, :]).sum(axis=(1, 2))
        score = aoi_weight * (base_aoi - saved) + power_weight * total_p
        a = int(np.argmin(score))
        if score[a] < best[2]:
            best = (o, a, float(score[a]))
    return best


# ---------------------------------------------------------------------------
# numba fast path
# ---------------------------------------------------------------------------

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def _decode_error(gamma, n_symbols, rate_nats):
        sq = (1.0 + gamma) * (1.0 + gamma)
        if sq <= 1.0:
            return 1.0        # zero power, or dispersion underflow
        disp = 1.0 - 1.0 / sq
        arg = math.sqrt(n_symbols / disp) * (math.log1p(gamma) - rate_nats)
        return 0.5 * math.erfc(arg / _SQRT2)

    @njit(cache=True)
    def sic_chain(gains, powers_in_order, sigma2, n_symbols, rate_nats, eps_max):
        V = gains.shape[0]
        K = powers_in_order.shape[0]
        sinr = np.empty((V, K))
        eps = np.empty((V, K))
        decoded = np.zeros((V, K), dtype=np.bool_)
        for i in range(V):
            g = gains[i]
            chain_ok = True
            tail = 0.0
            for m in range(K):
                tail += powers_in_order[m]
            for l in range(K):
                tail -= powers_in_order[l]
                s = powers_in_order[l] * g / (g * tail + sigma2)
                e = _decode_error(s, n_symbols, rate_nats)
                sinr[i, l] = s
                eps[i, l] = e
                chain_ok = chain_ok and (e <= eps_max)
                decoded[i, l] = chain_ok
        return sinr, eps, decoded

    @njit(cache=True)
    def hv_mc_count(points, samples):
        n = samples.shape[0]
        k = points.shape[0]
        count = 0
        for s in range(n):
            x = samples[s, 0]
            y = samples[s, 1]
            for j in range(k):
                if points[j, 0] <= x and points[j, 1] <= y:
                    count += 1
                    break
        return count

    @njit(cache=True)
    def exhaustive_scan(gains, orders, alphas, p_max, sigma2, n_symbols,
                        rate_nats, eps_max, ages, demand, delta, aging,
                        aoi_weight, power_weight):
        nO = orders.shape[0]
        nA = alphas.shape[0]
        F = orders.shape[1]
        V = gains.shape[0]
        base_aoi = 0.0
        for i in range(V):
            for f in range(F):
                base_aoi += demand[i, f] * (ages[i, f] + aging)
        best_o = 0
        best_a = 0
        best_score = np.inf
        for o in range(nO):
            for a in range(nA):
                total_p = 0.0
                for f in range(F):
                    total_p += alphas[a, f] * p_max
                saved = 0.0
                for i in range(V):
                    g = gains[i]
                    tail = total_p
                    chain_ok = True
                    for l in range(F):
                        proc = orders[o, l]
                        p = alphas[a, proc] * p_max
                        tail -= p
                        s = p * g / (g * tail + sigma2)
                        if chain_ok and _decode_error(s, n_symbols, rate_nats) <= eps_max:
                            if demand[i, proc] > 0.0:
                                saved += ages[i, proc] + aging - delta
                        else:
                            chain_ok = False
                score = aoi_weight * (base_aoi - saved) + power_weight * total_p
                if score < best_score:
                    best_o = o
                    best_a = a
                    best_score = score
        return best_o, best_a, best_score

    return {
        "sic_chain": sic_chain,
        "hv_mc_count": hv_mc_count,
        "exhaustive_scan": exhaustive_scan,
    }


def _select_backend():
    choice = os.environ.get("AOINOMA_BACKEND", "auto").lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"AOINOMA_BACKEND must be auto|numba|numpy, got {choice!r}")
    if choice == "numpy":
        return "numpy", None
    try:
        kernels = _build_numba()
        return "numba", kernels
    except ImportError:
        if choice == "numba":
            raise
        return "numpy", None


_NAME, _NUMBA = _select_backend()


def active_backend():
    return _NAME


def _wrap_sic(gains, powers_in_order, sigma2, n_symbols, rate_nats, eps_max):
    return _NUMBA["sic_chain"](
        np.ascontiguousarray(gains, dtype=np.float64),
        np.ascontiguousarray(powers_in_order, dtype=np.float64),
        float(sigma2), float(n_symbols), float(rate_nats), float(eps_max))


def _wrap_hv(points, samples):
    return int(_NUMBA["hv_mc_count"](
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(samples, dtype=np.float64)))


def _wrap_scan(gains, orders, alphas, p_max, sigma2, n_symbols, rate_nats,
               eps_max, ages, demand, delta, aging, aoi_weight, power_weight):
    o, a, s = _NUMBA["exhaustive_scan"](
        np.ascontiguousarray(gains, dtype=np.float64),
        np.ascontiguousarray(orders, dtype=np.int64),
        np.ascontiguousarray(alphas, dtype=np.float64),
        float(p_max), float(sigma2), float(n_symbols), float(rate_nats),
        float(eps_max),
        np.ascontiguousarray(ages, dtype=np.float64),
        np.ascontiguousarray(demand, dtype=np.float64),
        float(delta), float(aging), float(aoi_weight), float(power_weight))
    return int(o), int(a), float(s)


if _NAME == "numba":
    sic_chain_kernel = _wrap_sic
    hv_mc_count = _wrap_hv
    exhaustive_scan = _wrap_scan
else:
    sic_chain_kernel = sic_chain_numpy
    hv_mc_count = hv_mc_count_numpy
    exhaustive_scan = exhaustive_scan_numpy
