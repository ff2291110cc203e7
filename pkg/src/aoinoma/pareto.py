"""Pareto-front assembly, dominance filtering, hypervolume, and baselines.

Fronts are sets of (average age, average power) pairs, one per
preference weight, tagged with the policy family that produced them.
Front quality is summarized by the dominated hypervolume against the
analytic worst-case reference corner, estimated by Monte Carlo.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .aoi import scalarize
from .config import seed_streams
from .env import DisseminationEnv


@dataclass
class ParetoPoint:
    zeta: float
    avg_aoi: float
    avg_power: float
    tag: str
    seed: int
    dominated: bool = False


@dataclass
class HypervolumeResult:
    value: float
    reference: tuple
    n_samples: int
    std_error: float


def dominance_filter(points):
    """Indices of the non-dominated points, in stable input order.

    A point falls only to strict dominance: another point no worse in
    both coordinates and better in at least one. Duplicates survive.
    Sweep over x-sorted groups, so cost is sort-dominated.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return []
    pts = pts.reshape(-1, 2)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    survivors = []
    best_y_prev = np.inf          # min y among strictly smaller x
    i = 0
    n = len(order)
    while i < n:
        j = i
        x = pts[order[i], 0]
        while j < n and pts[order[j], 0] == x:
            j += 1
        group = order[i:j]
        y_min = pts[group, 1].min()
        if y_min < best_y_prev:
            survivors.extend(int(k) for k in group if pts[k, 1] == y_min)
        best_y_prev = min(best_y_prev, y_min)
        i = j
    return sorted(survivors)


def hypervolume_mc(points, reference, n_samples, rng):
    """Monte-Carlo dominated hypervolume for a two-objective minimization front.

    Every point must sit inside the reference corner. Samples are drawn
    uniformly over the box spanned by the points' coordinatewise minimum
    and the reference; the estimate is the box area times the dominated
    fraction.
    """
    ref = np.asarray(reference, dtype=np.float64)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        return HypervolumeResult(0.0, tuple(ref), 0, 0.0)
    if (pts > ref).any():
        raise ValueError("every front point must be <= the reference point")
    lo = pts.min(axis=0)
    widths = ref - lo
    area = float(np.prod(widths))
    if area == 0.0:
        return HypervolumeResult(0.0, tuple(ref), 0, 0.0)
    samples = lo + rng.random((int(n_samples), 2)) * widths
    hits = backend.hv_mc_count(pts, samples)
    frac = hits / n_samples
    value = area * frac
    sem = area * np.sqrt(max(frac * (1.0 - frac), 0.0) / n_samples)
    return HypervolumeResult(float(value), tuple(ref), int(n_samples), float(sem))


def random_policy_eval(cfg, episodes, seed, zeta=None):
    """Uniform order + uniform power fractions; returns mean (aoi, power, objective)."""
    rng = seed_streams(seed)["eval"]
    env = DisseminationEnv(cfg, seed=seed, zeta=cfg.zeta if zeta is None else zeta)
    pairs = []
    for _ in range(episodes):
        env.reset()
        done = False
        while not done:
            order = int(rng.integers(env.n_orders))
            alphas = rng.random(cfg.processes)
            _, _, done = env.step(order, alphas)
        pairs.append((env.avg_aoi(), env.avg_power()))
    pairs = np.asarray(pairs)
    aoi_m, p_m = float(pairs[:, 0].mean()), float(pairs[:, 1].mean())
    obj = scalarize(aoi_m, p_m, env.zeta, env.bounds, cfg.p_max) \
        if env.bounds[1] > env.bounds[0] else float("nan")
    return aoi_m, p_m, obj, pairs


def feasible_power_grid(n_processes, levels):
    """All per-process fraction tuples on a uniform grid with sum <= 1."""
    steps = np.linspace(0.0, 1.0, levels)
    grids = np.stack(np.meshgrid(*([steps] * n_processes), indexing="ij"),
                     axis=-1).reshape(-1, n_processes)
    return grids[grids.sum(axis=1) <= 1.0 + 1e-12]


def exhaustive_search(cfg, power_levels=10, zeta=None, seed=0, episodes=1):
    """Per-slot greedy scan over all orders and a discrete power grid.

    Each slot the scan minimizes the slot's contribution to the
    scalarized objective: preference-weighted normalized age plus
    normalized transmitted power. Exact for a one-decision horizon;
    greedy otherwise. Small instances only.
    """
    if cfg.processes > 4:
        raise ValueError("exhaustive search capped at 4 processes")
    if power_levels > 10:
        raise ValueError("exhaustive search capped at 10 power levels")
    zeta = cfg.zeta if zeta is None else float(zeta)
    env = DisseminationEnv(cfg, seed=seed, zeta=zeta)
    orders = np.asarray(env.orders, dtype=np.int64)
    alphas = feasible_power_grid(cfg.processes, power_levels)
    pairs = []
    actions = []
    for _ in range(episodes):
        env.reset()
        lo, hi = env.bounds
        if hi <= lo:
            raise ValueError("degenerate age bounds: horizon too short")
        aoi_w = zeta / (hi - lo)
        pow_w = (1.0 - zeta) / cfg.p_max
        done = False
        while not done:
            o, a, _ = backend.exhaustive_scan(
                env.snapshot.gains, orders, alphas, cfg.p_max, cfg.noise_power,
                env._tx_time * cfg.bandwidth_hz, env._rate, cfg.eps_max,
                env.ages, env.R.astype(np.float64), env.delta,
                env.aging_increment(), aoi_w, pow_w)
            actions.append((env.t + 1, o, alphas[a].copy()))
            _, _, done = env.step(int(o), alphas[a])
        pairs.append((env.avg_aoi(), env.avg_power()))
    pairs = np.asarray(pairs)
    aoi_m, p_m = float(pairs[:, 0].mean()), float(pairs[:, 1].mean())
    obj = scalarize(aoi_m, p_m, zeta, env.bounds, cfg.p_max)
    return actions, (aoi_m, p_m, obj, pairs)


def build_front(provider, zeta_grid, reference, n_samples, rng, tag, seed=0):
    """Evaluate ``provider(zeta) -> (avg_aoi, avg_power)`` across the grid.

    Returns the tagged points (dominated flags filled in) and the
    Monte-Carlo hypervolume of the in-reference non-dominated subset.
    """
    points = []
    for z in zeta_grid:
        a, p = provider(z)
        points.append(ParetoPoint(zeta=float(z), avg_aoi=float(a),
                                  avg_power=float(p), tag=tag, seed=seed))
    coords = np.array([[pt.avg_aoi, pt.avg_power] for pt in points])
    keep = set(dominance_filter(coords))
    for i, pt in enumerate(points):
        pt.dominated = i not in keep
    ref = np.asarray(reference, dtype=np.float64)
    in_box = [i for i in keep if (coords[i] <= ref).all()]
    hv = hypervolume_mc(coords[in_box], reference, n_samples, rng) if in_box \
        else HypervolumeResult(0.0, tuple(ref), 0, 0.0)
    return points, hv
