"""Inner-loop and plant: differential-drive kinematics, power, battery, sensing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import kernels


class BoundsError(ValueError):
    pass


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class PlantParams:
    wheel_radius: float = 0.0325
    wheelbase: float = 0.09925
    v_max: float = 0.8
    omega_max: float = 7.0 * math.pi
    sensor_count: int = 8
    sensor_fov: float = math.radians(5.0)
    sensor_range: float = 0.8
    ps_detect_range: float = 0.1
    battery_capacity: float = 100.0
    power_p1: float = 0.15
    power_p2: float = 0.01

    def problems(self) -> list[str]:
        out = []
        for name, val in vars(self).items():
            if not val > 0:
                out.append(f"plant.{name} must be > 0 (got {val})")
        if self.sensor_fov * self.sensor_count >= 2.0 * math.pi:
            out.append("plant.blind_spots: sensor_fov * sensor_count must be < 2*pi")
        return out

    @property
    def max_power(self) -> float:
        """Power with both wheels at their largest reachable combined speed."""
        spin = max(2.0 * self.v_max, self.omega_max * self.wheelbase) / self.wheel_radius
        return self.power_p1 * spin + self.power_p2


@dataclass(frozen=True)
class RoverState:
    x: float
    y: float
    theta: float
    v: float = 0.0
    omega: float = 0.0
    battery: float = 100.0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class WheelCommand:
    omega_l: float
    omega_r: float


@dataclass(frozen=True)
class PowerStation:
    x: float
    y: float

    @property
    def location(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class World:
    obstacles: tuple[tuple[tuple[float, float], ...], ...] = ()
    stations: tuple[PowerStation, ...] = ()

    @cached_property
    def packed(self):
        return kernels.pack_polygons(self.obstacles)


@dataclass(frozen=True)
class SensorReading:
    ir: tuple[float, ...]
    detected_ps: PowerStation | None
    d_o: float


@dataclass(frozen=True)
class StepResult:
    state: RoverState
    energy: float
    recharged: bool = False
    depleted: bool = False
    pre_recharge_battery: float | None = None
    events: tuple = field(default=())


def wheel_speeds(v: float, omega: float, params: PlantParams, tol: float = 1e-9) -> WheelCommand:
    if v < -tol or v > params.v_max + tol or abs(omega) > params.omega_max + tol:
        raise BoundsError(f"(v={v}, omega={omega}) outside plant bounds")
    two_r = 2.0 * params.wheel_radius
    lw = omega * params.wheelbase
    return WheelCommand((2.0 * v - lw) / two_r, (2.0 * v + lw) / two_r)


def power(cmd: WheelCommand, params: PlantParams) -> float:
    return params.power_p1 * (abs(cmd.omega_l) + abs(cmd.omega_r)) + params.power_p2


def _sinc(x: float) -> float:
    if abs(x) < 1e-6:
        return 1.0 - x * x / 6.0
    return math.sin(x) / x


def arc_displacement(theta: float, v: float, omega: float, t: float) -> tuple[float, float]:
    """Displacement of a constant-(v, omega) arc; stable as omega -> 0.

    Equivalent to ``(v/omega)(sin th2 - sin th1, cos th1 - cos th2)``.
    """
    half = 0.5 * omega * t
    chord = v * t * _sinc(half)
    mid = theta + half
    return chord * math.cos(mid), chord * math.sin(mid)


def integrate_pose(state: RoverState, v: float, omega: float, t: float) -> RoverState:
    dx, dy = arc_displacement(state.theta, v, omega, t)
    return replace(state, x=state.x + dx, y=state.y + dy, theta=state.theta + omega * t, v=v, omega=omega)


def clamp_command(v: float, omega: float, params: PlantParams) -> tuple[float, float]:
    return min(max(v, 0.0), params.v_max), min(max(omega, -params.omega_max), params.omega_max)


def sense(state: RoverState, world: World, params: PlantParams) -> SensorReading:
    edges, offsets = world.packed
    ir = kernels.sense(state.x, state.y, state.theta, edges, params.sensor_count,
                       params.sensor_fov, params.sensor_range)
    d_o = kernels.signed_distance(state.x, state.y, edges, offsets) if len(world.obstacles) else math.inf
    return SensorReading(tuple(float(d) for d in ir), detect_station(state, world, params), float(d_o))


def detect_station(state: RoverState, world: World, params: PlantParams) -> PowerStation | None:
    """Closest station within detection range with a clear line of sight."""
    edges, _ = world.packed
    best, best_d = None, math.inf
    for ps in world.stations:
        d = math.hypot(ps.x - state.x, ps.y - state.y)
        if d <= params.ps_detect_range and d < best_d and kernels.segment_clear(state.x, state.y, ps.x, ps.y, edges):
            best, best_d = ps, d
    return best


def plant_step(state: RoverState, target: tuple[float, float], params: PlantParams, t: float,
               world: World | None = None, recharge: bool = False, drain: bool = True) -> StepResult:
    """Apply ``target`` instantly, integrate for ``t`` and account energy.

    With ``recharge`` set, reaching any accessible station refills the battery.
    """
    v, omega = clamp_command(*target, params)
    energy = power(wheel_speeds(v, omega, params), params) * t
    nxt = integrate_pose(state, v, omega, t)
    battery = state.battery - energy if drain else state.battery
    depleted = drain and battery <= 0.0
    nxt = replace(nxt, battery=battery)
    if recharge and world is not None and detect_station(nxt, world, params) is not None:
        return StepResult(replace(nxt, battery=params.battery_capacity), energy, True, depleted, battery)
    return StepResult(nxt, energy, False, depleted)


def derived_energy_constants(params: PlantParams, mp_period_s: float, nav_period_s: float) -> dict[str, float]:
    """Lower bounds the configured ES constants must dominate."""
    e_mp = params.max_power * mp_period_s
    n = math.ceil((math.pi / params.omega_max) / nav_period_s - 1e-12)
    turn_w = math.pi / (n * nav_period_s)
    e_180 = power(wheel_speeds(0.0, turn_w, params), params) * n * nav_period_s
    return {"E_MP": e_mp, "E_180": e_180, "BE_MP": e_mp}


def ray_headings(state: RoverState, params: PlantParams) -> np.ndarray:
    return state.theta + 2.0 * math.pi * np.arange(params.sensor_count) / params.sensor_count
