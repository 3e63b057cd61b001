"""Navigation component for the energy-safety case study.

Nav nests a collision-freedom Simplex (go-to-target / stop) inside its
advanced controller and falls back to a backtracking controller whenever
Mission Planning publishes ``ctlr = BC``.  Backtracking retraces the recorded
waypoint log in reverse, solving the one-period inverse kinematics in the
least-squares sense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .assurance import Mode
from .rover import PlantParams, PowerStation, arc_displacement, clamp_command, wrap_angle


class EmptyLog(LookupError):
    pass


class NavMode(str, Enum):
    GO = "go_to_target"
    STOP = "avoid_obstacles"
    TURN = "turn_180"
    BACKTRACK = "backtrack"
    DONE = "backtrack_done"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class NavGains:
    heading_gain: float = 8.0
    arrival_radius: float = 0.02
    safety_margin: float = 0.05
    # obstacle blending for the advanced controller; 0 disables it
    avoid_weight: float = 0.0
    avoid_range: float = 0.5


@dataclass(frozen=True)
class NavCommand:
    v_T: float
    omega_T: float


STOP = NavCommand(0.0, 0.0)


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    heading: float
    tick: int
    energy: float = 0.0


@dataclass(frozen=True)
class WaypointLog:
    entries: tuple[Waypoint, ...]
    anchor_ps: PowerStation | None = None

    @classmethod
    def anchored(cls, wp: Waypoint, ps: PowerStation | None) -> WaypointLog:
        return cls((wp,), ps)

    def __len__(self):
        return len(self.entries)

    @property
    def anchor(self) -> Waypoint:
        return self.entries[0]

    @property
    def last(self) -> Waypoint:
        return self.entries[-1]

    def forward_energy(self, energy_now: float) -> float:
        return energy_now - self.entries[0].energy

    def backtrack_energy(self) -> float:
        """Energy recorded between the anchor and the newest entry."""
        return self.entries[-1].energy - self.entries[0].energy


def record_waypoint(W: WaypointLog, wp: Waypoint, station: PowerStation | None = None) -> WaypointLog:
    """Append ``wp``; a station visit restarts the log with ``wp`` as anchor."""
    if station is not None:
        return WaypointLog.anchored(wp, station)
    if W.entries and W.entries[-1].tick == wp.tick:
        return W
    return WaypointLog(W.entries + (wp,), W.anchor_ps)


def go_to_target(x: float, y: float, theta: float, target, params: PlantParams,
                 gains: NavGains = NavGains(), t_nav: float = 0.1, ir=None) -> NavCommand:
    """Proportional heading steering with a cosine speed taper.

    Passing ``ir`` with a positive ``avoid_weight`` blends a repulsion from
    sensed obstacles into the desired heading.
    """
    dx, dy = target[0] - x, target[1] - y
    dist = math.hypot(dx, dy)
    if dist <= gains.arrival_radius:
        return STOP
    gx, gy = dx / dist, dy / dist
    if ir is not None and gains.avoid_weight > 0.0:
        n = len(ir)
        ax = ay = 0.0
        for k, d in enumerate(ir):
            if d < gains.avoid_range:
                push = gains.avoid_weight * (gains.avoid_range - d) / gains.avoid_range
                ang = theta + 2.0 * math.pi * k / n
                ax -= push * math.cos(ang)
                ay -= push * math.sin(ang)
        gx, gy = gx + ax, gy + ay
    err = wrap_angle(math.atan2(gy, gx) - theta)
    omega = gains.heading_gain * err
    v = min(params.v_max, dist / t_nav) * max(0.0, math.cos(err))
    return NavCommand(*clamp_command(v, omega, params))


def avoid_obstacles(*_args) -> NavCommand:
    return STOP


def cf_dm(ir, params: PlantParams, delta: float, reach: float | None = None, t_nav: float = 0.1) -> str:
    """Collision-freedom decision: ``"BC2"`` if a sensed obstacle could come within ``delta``.

    ``reach`` is how far the rover may travel before the next decision;
    it defaults to the worst case ``v_max * t_nav``.
    """
    if reach is None:
        reach = params.v_max * t_nav
    return "BC2" if min(ir) - reach <= delta else "AC2"


def solve_step(a, b, t: float) -> tuple[float, float]:
    """Least-squares (v, omega) taking pose ``a`` to pose ``b`` in time ``t``.

    Poses are ``(x, y, heading)``.  The heading equation fixes omega exactly;
    v then minimises the squared error of the two position equations.
    """
    dth = wrap_angle(b[2] - a[2])
    dx, dy = b[0] - a[0], b[1] - a[1]
    if dth == 0.0:
        return math.hypot(dx, dy) / t, 0.0
    omega = dth / t
    # unit-speed displacement over t
    ux, uy = arc_displacement(a[2], 1.0, omega, t)
    norm = ux * ux + uy * uy
    if norm == 0.0:
        return 0.0, omega
    return (ux * dx + uy * dy) / norm, omega


def backtrack_step(x: float, y: float, theta: float, W: WaypointLog, t_nav: float,
                   params: PlantParams | None = None) -> tuple[NavCommand, WaypointLog]:
    """Drive toward the waypoint before the newest one, heading reversed.

    The newest entry marks where the rover currently is; it is consumed and
    the returned log ends at the waypoint being targeted.
    """
    if len(W) < 2:
        raise EmptyLog("no waypoint left to backtrack to")
    wp = W.entries[-2]
    v, omega = solve_step((x, y, theta), (wp.x, wp.y, wp.heading + math.pi), t_nav)
    if params is not None:
        v, omega = clamp_command(v, omega, params)
    return NavCommand(v, omega), WaypointLog(W.entries[:-1], W.anchor_ps)


@dataclass(frozen=True)
class NavState:
    mode: NavMode = NavMode.GO
    log: WaypointLog = WaypointLog(())
    turn_goal: float | None = None
    turn_left: int = 0
    turn_rate: float = 0.0
    cf: str = "AC2"
    # backtrack accounting: energy still to spend on the log and the meter reading when this period began
    be_at_period: float = 0.0
    meter_at_period: float = 0.0
    # meter reading when the half turn began, and the waypoint the last backtrack step aimed at
    turn_meter: float = 0.0
    bt_target: Waypoint | None = None


@dataclass(frozen=True)
class NavInputs:
    ctlr: Mode
    target: tuple[float, float]
    x: float
    y: float
    theta: float
    ir: tuple[float, ...]
    station: PowerStation | None
    energy: float
    tick: int


def turn_schedule(params: PlantParams, t_nav: float) -> tuple[int, float]:
    """Whole Nav periods for an in-place half turn and the rate that fills them exactly."""
    n = max(1, math.ceil((math.pi / params.omega_max) / t_nav - 1e-12))
    return n, math.pi / (n * t_nav)


def nav_step(ns: NavState, inp: NavInputs, params: PlantParams, gains: NavGains,
             t_nav: float) -> tuple[NavState, NavCommand, tuple]:
    """One Navigation period for the energy-safety configuration."""
    wp = Waypoint(inp.x, inp.y, inp.theta, inp.tick, inp.energy)
    events = []
    if inp.ctlr == Mode.AC:
        if ns.mode in (NavMode.TURN, NavMode.BACKTRACK, NavMode.DONE):
            events.append(("nav_resume", inp.tick))
        log = record_waypoint(ns.log, wp, inp.station) if ns.log.entries else WaypointLog.anchored(wp, inp.station)
        proposal = go_to_target(inp.x, inp.y, inp.theta, inp.target, params, gains, t_nav, inp.ir)
        cf = cf_dm(inp.ir, params, gains.safety_margin, proposal.v_T * t_nav, t_nav)
        cmd = proposal if cf == "AC2" else avoid_obstacles()
        mode = NavMode.GO if cf == "AC2" else NavMode.STOP
        return NavState(mode, log, cf=cf), cmd, tuple(events)

    log = ns.log
    if ns.mode not in (NavMode.TURN, NavMode.BACKTRACK, NavMode.DONE):
        log = record_waypoint(log, wp) if log.entries else WaypointLog.anchored(wp, inp.station)
        n, rate = turn_schedule(params, t_nav)
        ns = replace(ns, mode=NavMode.TURN, log=log, turn_goal=inp.theta + math.pi, turn_left=n, turn_rate=rate,
                     turn_meter=inp.energy)
        events.append(("turn_start", inp.tick))
    if ns.mode == NavMode.TURN:
        left = ns.turn_left - 1
        nxt = replace(ns, turn_left=left, mode=NavMode.TURN if left > 0 else NavMode.BACKTRACK,
                      be_at_period=log.backtrack_energy(), meter_at_period=inp.energy)
        return nxt, NavCommand(0.0, ns.turn_rate), tuple(events)
    if ns.mode == NavMode.BACKTRACK and len(log) > 1:
        cmd, log = backtrack_step(inp.x, inp.y, inp.theta, log, t_nav, params)
        be_start = ns.log.backtrack_energy()
        return replace(ns, log=log, turn_goal=None, be_at_period=be_start, meter_at_period=inp.energy,
                       bt_target=log.last), cmd, tuple(events)
    if ns.mode == NavMode.BACKTRACK:
        events.append(("backtrack_complete", inp.tick))
    if inp.station is not None:
        log = WaypointLog.anchored(wp, inp.station)
    elif ns.mode == NavMode.BACKTRACK:
        events.append(("backtrack_exhausted_off_station", inp.tick))
    return replace(ns, mode=NavMode.DONE, log=log, be_at_period=0.0, meter_at_period=inp.energy,
                   bt_target=None), STOP, tuple(events)


def backtrack_remaining(ns: NavState, meter_now: float) -> float:
    """Backtracking energy still needed, interpolated within the current period."""
    if ns.mode == NavMode.BACKTRACK:
        return max(0.0, ns.be_at_period - (meter_now - ns.meter_at_period))
    if ns.mode == NavMode.DONE:
        return 0.0
    return ns.log.backtrack_energy()
