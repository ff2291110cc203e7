"""Episodic decision environment: state encoding, hybrid actions, reward.

Each slot the agent picks a decoding order and per-process power
fractions; the environment runs the SIC chain at every vehicle, evolves
the ages, advances mobility, and emits a reward that exponentiates the
running normalized age and power averages, minus a hinge penalty for
overcommitted power.

Age bookkeeping: every demanded pair starts the episode at one slot of
age, and on the first slot every pair sits at exactly one slot of age
whether or not it refreshed (fresh processes cannot be staler than the
slot that carries them). From the second slot on, a miss grows the age
and a decode resets it. This makes the analytic bounds exact: a
never-decoding run averages (horizon+1)/2 slots per pair, an
always-decoding run averages one slot.
"""

from dataclasses import dataclass

import numpy as np

from . import aoi as aoi_mod
from . import channel as channel_mod
from . import geometry as geom_mod
from . import phy as phy_mod


@dataclass
class Transition:
    state: np.ndarray
    order_index: int
    alphas: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


def encode_state(chi, ages, R):
    """2F state vector: per-process demand-weighted |chi| sums, then age sums."""
    R = np.asarray(R, dtype=np.float64)
    chi_feat = R.T @ np.abs(np.asarray(chi))
    age_feat = (R * ages).sum(axis=0)
    return np.concatenate([chi_feat, age_feat])


class StateNormalizer:
    """Min-max style scaling so both feature blocks land near [0, 1].

    Channel features are divided by their analytic maximum (all vehicles
    demanding, all at the closest approach distance); age features by the
    analytic per-process maximum (all vehicles demanding, ages at the
    never-decode ramp midpoint bound).
    """

    def __init__(self, cfg):
        dmin, _ = cfg.road.distance_bounds()
        chi_max = cfg.light_speed / (4.0 * np.pi * cfg.carrier_hz * dmin ** 2)
        delta = cfg.road.slot_duration
        horizon = cfg.road.horizon
        self.f = cfg.processes
        self.chi_scale = cfg.vehicles * chi_max
        self.age_scale = cfg.vehicles * delta * (horizon + 1) / 2.0

    def __call__(self, state):
        out = np.asarray(state, dtype=np.float64).copy()
        out[:self.f] /= self.chi_scale
        out[self.f:] /= self.age_scale
        return out


class DisseminationEnv:
    """One learning environment instance; not safe to step concurrently."""

    def __init__(self, cfg, seed=None, zeta=None):
        self.cfg = cfg
        self.zeta = cfg.zeta if zeta is None else float(zeta)
        self.delta = cfg.road.slot_duration
        self.horizon = cfg.road.horizon
        self.orders = phy_mod.all_orders(cfg.processes)
        self.n_orders = len(self.orders)
        self.state_dim = 2 * cfg.processes
        self.normalizer = StateNormalizer(cfg)
        self._tx_time = cfg.road.transmission_time
        self._rate = phy_mod.rate_nats(cfg.payload_bits, self._tx_time, cfg.bandwidth_hz)
        self._seed_seq = np.random.SeedSequence(cfg.seed if seed is None else seed)
        self._episode = 0
        self._t = None

    # -- episode control ----------------------------------------------------

    def reset(self, seed=None):
        if seed is None and self.cfg.frozen_episode_seed is not None:
            seed = self.cfg.frozen_episode_seed
        if seed is None:
            rng = np.random.default_rng(self._seed_seq.spawn(1)[0])
        else:
            rng = np.random.default_rng(seed)
        self._rng = rng
        self._episode += 1
        cfg = self.cfg
        self.vehicles = geom_mod.init_vehicles(cfg.road, cfg.vehicles, cfg.speed_range, rng)
        if cfg.explicit_demand is not None:
            self.R = aoi_mod.validate_demand(cfg.explicit_demand)
        else:
            self.R = aoi_mod.demand_matrix(cfg.vehicles, cfg.processes,
                                           cfg.demand_per_vehicle, rng)
        self.bounds = aoi_mod.aoi_bounds(self.R, self.delta, self.horizon)
        self.total_demand = float(self.R.sum())
        self.ages = np.where(self.R > 0, self.delta, 0.0)
        self._aoi_sum = 0.0
        self._power_sum = 0.0
        self._t = 0
        self._snapshot = self._take_snapshot()
        self.trace = []
        return self._state()

    def _take_snapshot(self):
        return channel_mod.snapshot(
            self.vehicles, self.cfg.road.rsu_position, self.cfg.carrier_hz,
            self.cfg.light_speed, self.cfg.antennas)

    def _state(self):
        return encode_state(self._snapshot.large_scale, self.ages, self.R)

    @property
    def t(self):
        return self._t

    @property
    def done(self):
        return self._t is not None and self._t >= self.horizon

    @property
    def snapshot(self):
        return self._snapshot

    def aging_increment(self):
        """Age growth a miss incurs this slot (zero on the first slot)."""
        return 0.0 if self._t == 0 else self.delta

    # -- dynamics -----------------------------------------------------------

    def resolve_order(self, order):
        if np.isscalar(order) or isinstance(order, (int, np.integer)):
            return int(order), self.orders[int(order)]
        order = phy_mod.validate_order(order, self.cfg.processes)
        return self.orders.index(order), order

    def step(self, order, alphas):
        if self._t is None:
            raise RuntimeError("call reset() before step()")
        if self.done:
            raise RuntimeError("episode finished, call reset()")
        cfg = self.cfg
        order_idx, order_t = self.resolve_order(order)
        alphas = np.clip(np.asarray(alphas, dtype=np.float64), 0.0, 1.0)
        if alphas.shape != (cfg.processes,):
            raise ValueError("need one power fraction per process")
        powers = alphas * cfg.p_max
        self._t += 1

        _, _, dec_pos = phy_mod.sic_chain(
            self._snapshot.gains, order_t, powers, cfg.noise_power,
            cfg.payload_bits, self._tx_time, cfg.bandwidth_hz, cfg.eps_max)
        decoded = phy_mod.decoded_processes(order_t, dec_pos, cfg.processes)

        grow = self.delta if self._t > 1 else 0.0
        self.ages = np.where(decoded, self.delta, self.ages + grow)
        slot_aoi = float(np.sum(self.R * self.ages))
        self._aoi_sum += slot_aoi
        slot_power = float(powers[list(order_t)].sum()) if len(order_t) < cfg.processes \
            else float(powers.sum())
        self._power_sum += slot_power

        reward = self._reward(alphas)
        self._snapshot_next()
        s_next = self._state()
        done = self.done
        self.trace.append((self._t, order_idx, alphas.copy(), reward,
                           (self.R * self.ages).sum(axis=0), slot_power))
        return s_next, reward, done

    def _snapshot_next(self):
        self.vehicles = geom_mod.advance_mobility(
            self.vehicles, self.delta, self.cfg.road.segment_length)
        self._snapshot = self._take_snapshot()

    def _reward(self, alphas):
        t = self._t
        lo = self.delta * self.total_demand
        hi_t = self.delta * (t + 1) / 2.0 * self.total_demand
        avg_aoi_t = self._aoi_sum / t
        den = hi_t - lo
        aoi_term = (avg_aoi_t - lo) / den if den > 0 else 0.0
        power_term = (self._power_sum / t) / self.cfg.p_max
        hinge = self.cfg.train.penalty * max(float(alphas.sum()) - 1.0, 0.0)
        return float(np.exp(-self.zeta * aoi_term - (1.0 - self.zeta) * power_term) - hinge)

    # -- episode summaries ---------------------------------------------------

    def avg_aoi(self):
        return self._aoi_sum / self._t if self._t else 0.0

    def avg_power(self):
        return self._power_sum / self._t if self._t else 0.0

    def objective(self):
        """Scalarized episode objective at this environment's preference weight."""
        return aoi_mod.scalarize(self.avg_aoi(), self.avg_power(), self.zeta,
                                 self.bounds, self.cfg.p_max)
