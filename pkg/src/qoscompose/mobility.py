"""Random-waypoint mobility and unit-disk connectivity."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .config import MobilityParams, RadioParams


def in_range(a, b, r: RadioParams) -> bool:
    """Unit-disk link test; the boundary counts as in range."""
    return math.hypot(a[0] - b[0], a[1] - b[1]) <= r.range


@dataclass
class MobilityState:
    """One leg of a random-waypoint trajectory.

    The node leaves ``origin`` at ``leg_start``, reaches ``waypoint`` at
    ``arrive`` and rests there until ``depart``. Positions are always computed
    from the leg origin, so querying at coarse or fine steps gives the same
    answer.
    """

    origin: tuple[float, float]
    waypoint: tuple[float, float]
    speed: float
    leg_start: float
    arrive: float
    depart: float
    time: float = 0.0

    @property
    def velocity(self) -> tuple[float, float]:
        dx = self.waypoint[0] - self.origin[0]
        dy = self.waypoint[1] - self.origin[1]
        dist = math.hypot(dx, dy)
        if dist == 0 or self.speed == 0:
            return (0.0, 0.0)
        return (dx / dist * self.speed, dy / dist * self.speed)

    def position_at(self, t: float) -> tuple[float, float]:
        if t >= self.arrive:
            return self.waypoint
        vx, vy = self.velocity
        dt = t - self.leg_start
        return (self.origin[0] + vx * dt, self.origin[1] + vy * dt)

    @property
    def position(self) -> tuple[float, float]:
        return self.position_at(self.time)


def static_state(pos, t: float = 0.0) -> MobilityState:
    pos = (float(pos[0]), float(pos[1]))
    return MobilityState(pos, pos, 0.0, t, math.inf, math.inf, t)


def new_leg(origin, t: float, rng: random.Random, params: MobilityParams,
            arena) -> MobilityState:
    if params.speed_max <= 0:
        return static_state(origin, t)
    waypoint = (rng.uniform(0.0, arena[0]), rng.uniform(0.0, arena[1]))
    speed = rng.uniform(params.speed_min, params.speed_max)
    travel = math.hypot(waypoint[0] - origin[0], waypoint[1] - origin[1]) / speed
    return MobilityState(tuple(origin), waypoint, speed, t, t + travel, t + travel + params.pause, t)


def initial_state(rng: random.Random, params: MobilityParams, arena) -> MobilityState:
    origin = (rng.uniform(0.0, arena[0]), rng.uniform(0.0, arena[1]))
    return new_leg(origin, 0.0, rng, params, arena)


def mobility_step(state: MobilityState, dt: float, rng: random.Random,
                  params: MobilityParams, arena) -> MobilityState:
    """Advance by ``dt`` seconds, starting new legs after each pause.

    Arrival inside the step clamps the node at the waypoint.
    """
    if dt < 0:
        raise ValueError("cannot step backwards in time")
    t = state.time + dt
    while t >= state.depart:
        state = new_leg(state.waypoint, state.depart, rng, params, arena)
    state.time = t
    return state
