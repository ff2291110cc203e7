"""Demand matrix, age-of-information evolution, bounds, and scalarization.

Ages are tracked per (vehicle, process) pair; only pairs the vehicle
actually demands enter any sum. A successful decode resets the pair's
age to one slot, otherwise it grows by one slot. The two episode
objectives (time-average age, time-average power) collapse into one
dimensionless number through a preference-weighted convex combination of
their min-max normalized values.
"""

import numpy as np


def demand_matrix(n_vehicles, n_processes, per_vehicle, rng):
    """Random 0/1 demand with exactly ``per_vehicle`` processes per row."""
    if not 1 <= per_vehicle <= n_processes:
        raise ValueError("per-vehicle demand must be in [1, n_processes]")
    R = np.zeros((n_vehicles, n_processes), dtype=np.int8)
    for i in range(n_vehicles):
        picks = rng.choice(n_processes, size=per_vehicle, replace=False)
        R[i, picks] = 1
    return R


def validate_demand(R):
    R = np.asarray(R)
    if R.ndim != 2 or not np.isin(R, (0, 1)).all():
        raise ValueError("demand must be a 0/1 matrix")
    if (R.sum(axis=1) < 1).any():
        raise ValueError("every vehicle must demand at least one process")
    return R.astype(np.int8)


def evolve_aoi(ages, decoded, delta):
    """One-slot age update: reset to ``delta`` where decoded, else grow by it."""
    return np.where(decoded, delta, ages + delta)


def aoi_bounds(R, delta, horizon):
    """(min, max) attainable time-average total age over ``horizon`` slots.

    The maximum corresponds to no pair ever refreshing (ages ramp
    linearly), the minimum to every demanded pair refreshing every slot.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    total_demand = float(np.sum(R))
    return delta * total_demand, delta * (horizon + 1) / 2.0 * total_demand


def scalarize(avg_aoi, avg_power, zeta, bounds, p_max):
    """Preference-weighted combination of normalized age and power, in [0, 1]."""
    lo, hi = bounds
    if hi <= lo:
        raise ValueError("degenerate age bounds: horizon too short to trade off")
    if not 0.0 <= zeta <= 1.0:
        raise ValueError("preference weight must lie in [0, 1]")
    return zeta * (avg_aoi - lo) / (hi - lo) + (1.0 - zeta) * avg_power / p_max


class AoiAccumulator:
    """Running per-episode totals for the time-average age identity.

    Feed the post-slot ages each slot; ``average()`` is the demand
    weighted time-average total age up to the current slot.
    """

    def __init__(self, R):
        self.R = np.asarray(R, dtype=np.float64)
        self.total = 0.0
        self.slots = 0

    def push(self, ages):
        self.total += float(np.sum(self.R * ages))
        self.slots += 1

    def average(self):
        if self.slots == 0:
            return 0.0
        return self.total / self.slots
