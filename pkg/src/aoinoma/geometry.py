"""Road layout, vehicle mobility, and per-slot geometric quantities.

A straight multi-lane segment along the x-axis with a fixed roadside
transmitter. Vehicles move at constant speed along their lane and wrap
around at the segment boundaries so the population stays constant.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RoadConfig:
    segment_length: float = 3000.0      # m
    lane_count: int = 2
    lane_width: float = 3.0             # m
    rsu_position: tuple = (1500.0, 50.0)
    slot_duration: float = 1e-3         # s, full slot
    acquisition_time: float = 1e-4      # s, spent measuring vehicle parameters
    horizon: int = 500                  # slots per episode

    def __post_init__(self):
        if self.segment_length <= 0:
            raise ValueError("segment_length must be positive")
        if self.lane_count < 1:
            raise ValueError("lane_count must be >= 1")
        if not 0 < self.acquisition_time < self.slot_duration:
            raise ValueError("acquisition_time must lie in (0, slot_duration)")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def transmission_time(self):
        """Portion of the slot left for payload transmission."""
        return self.slot_duration - self.acquisition_time

    def lane_y(self, lane):
        return (lane + 0.5) * self.lane_width

    def distance_bounds(self):
        """Analytic min/max vehicle-to-RSU distance over the road area."""
        x0, y0 = self.rsu_position
        xs = (0.0, self.segment_length)
        dmin, dmax = np.inf, 0.0
        for lane in range(self.lane_count):
            dy = y0 - self.lane_y(lane)
            xc = min(max(x0, 0.0), self.segment_length)
            dmin = min(dmin, float(np.hypot(xc - x0, dy)))
            for x in xs:
                dmax = max(dmax, float(np.hypot(x - x0, dy)))
        return dmin, dmax


@dataclass
class VehicleState:
    x: float
    y: float
    speed: float        # m/s, nonnegative
    direction: int      # +1 or -1 along the x-axis

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be nonnegative")
        if self.direction not in (-1, 1):
            raise ValueError("direction must be +1 or -1")


@dataclass(frozen=True)
class GeometrySample:
    distance: float     # m
    angle: float        # rad, in [0, pi]
    doppler: float      # Hz


def init_vehicles(road, count, speed_range, rng):
    """Place ``count`` vehicles uniformly on the segment.

    Lane drawn uniformly; odd lanes run in -x, even lanes in +x. Speeds
    are uniform over ``speed_range``.
    """
    lo, hi = speed_range
    vehicles = []
    for _ in range(count):
        lane = int(rng.integers(road.lane_count))
        vehicles.append(VehicleState(
            x=float(rng.uniform(0.0, road.segment_length)),
            y=road.lane_y(lane),
            speed=float(rng.uniform(lo, hi)),
            direction=1 if lane % 2 == 0 else -1,
        ))
    return vehicles


def advance_mobility(vehicles, dt, segment_length):
    """Constant-velocity advance by ``dt`` with wrap-around at the ends."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    out = []
    for v in vehicles:
        x = (v.x + v.direction * v.speed * dt) % segment_length
        out.append(VehicleState(x=x, y=v.y, speed=v.speed, direction=v.direction))
    return out


def sample_geometry(vehicle, rsu, fc, c0):
    """Distance, azimuth angle, and Doppler shift of one vehicle.

    angle = arccos((x - x0) / distance), so a vehicle straight ahead of
    the array broadside sees pi/2; doppler = speed * fc * cos(angle) / c0.
    """
    x0, y0 = rsu
    dx = vehicle.x - x0
    dist = float(np.hypot(dx, vehicle.y - y0))
    if dist == 0.0:
        raise ValueError("vehicle coincides with the RSU position")
    angle = float(np.arccos(np.clip(dx / dist, -1.0, 1.0)))
    doppler = vehicle.speed * fc * np.cos(angle) / c0
    return GeometrySample(distance=dist, angle=angle, doppler=float(doppler))
