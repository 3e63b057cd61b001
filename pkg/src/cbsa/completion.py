"""Map-aware mission completion: A* paths, primitive plans and time bounds.

The baseline Navigation controller follows an A* cell path using only two
primitives, in-place turns and straight runs, each stretched to a whole
number of Navigation periods.  ``time_upper_bound`` certifies how long that
takes; Mission Planning's decision module switches to the baseline while the
worst-case bound from anywhere reachable in one more period still beats the
deadline.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .assurance import Mode
from .rover import PlantParams, clamp_command, wrap_angle

_TINY = 1e-12


class Unreachable(LookupError):
    pass


@dataclass(frozen=True)
class GridMap:
    cell_size: float
    origin: tuple[float, float]
    occupancy: np.ndarray  # [ix, iy] -> True if blocked
    inflation: float = 0.05

    @classmethod
    def from_polygons(cls, polygons, bounds, cell_size=0.05, inflation=0.05) -> GridMap:
        """Rasterise ``polygons``; a cell is blocked if any point of it lies within ``inflation``."""
        xmin, ymin, xmax, ymax = bounds
        nx = int(math.ceil((xmax - xmin) / cell_size - 1e-9))
        ny = int(math.ceil((ymax - ymin) / cell_size - 1e-9))
        occ = np.zeros((nx, ny), dtype=np.bool_)
        if polygons:
            edges, offsets = kernels.pack_polygons(polygons)
            ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
            cx = xmin + (ii.ravel() + 0.5) * cell_size
            cy = ymin + (jj.ravel() + 0.5) * cell_size
            sd = kernels.signed_distance_many(np.ascontiguousarray(cx), np.ascontiguousarray(cy), edges, offsets)
            occ = (sd <= inflation + cell_size * math.sqrt(0.5)).reshape(nx, ny)
        return cls(cell_size, (float(xmin), float(ymin)), occ, inflation)

    @property
    def shape(self):
        return self.occupancy.shape

    @property
    def bounds(self):
        nx, ny = self.shape
        return (self.origin[0], self.origin[1],
                self.origin[0] + nx * self.cell_size, self.origin[1] + ny * self.cell_size)

    @property
    def half_diagonal(self) -> float:
        return self.cell_size * math.sqrt(0.5)

    def cell_of(self, p) -> tuple[int, int] | None:
        i = int(math.floor((p[0] - self.origin[0]) / self.cell_size))
        j = int(math.floor((p[1] - self.origin[1]) / self.cell_size))
        nx, ny = self.shape
        if 0 <= i < nx and 0 <= j < ny:
            return i, j
        return None

    def center(self, cell) -> tuple[float, float]:
        return (self.origin[0] + (cell[0] + 0.5) * self.cell_size,
                self.origin[1] + (cell[1] + 0.5) * self.cell_size)

    def is_free(self, cell) -> bool:
        return cell is not None and not bool(self.occupancy[cell])

    def point_free(self, p, tol=1e-9) -> bool:
        """True if some cell touching ``p`` is free."""
        for dx in (-tol, tol):
            for dy in (-tol, tol):
                if self.is_free(self.cell_of((p[0] + dx, p[1] + dy))):
                    return True
        return False


def astar_path(m: GridMap, a, b) -> tuple[list[tuple[int, int]], float]:
    """Cell path from ``a`` to ``b`` and its octile length in metres."""
    ca, cb = m.cell_of(a), m.cell_of(b)
    if not m.is_free(ca) or not m.is_free(cb):
        raise Unreachable(f"endpoint in a blocked or out-of-map cell: {a} -> {b}")
    path, cost = kernels.astar(m.occupancy, ca[0], ca[1], cb[0], cb[1])
    if len(path) == 0:
        raise Unreachable(f"no path {a} -> {b}")
    return [(int(i), int(j)) for i, j in path], float(cost) * m.cell_size


@dataclass(frozen=True)
class Segment:
    """Turn in place by ``turn`` then drive ``length`` straight to ``end``."""

    turn: float
    length: float
    end: tuple[float, float]
    heading: float


@dataclass(frozen=True)
class PrimitivePlan:
    segments: tuple[Segment, ...]
    duration: float  # ideal time at baseline speeds
    final_heading: float | None
    start: tuple[float, float] = (0.0, 0.0)

    @property
    def primitives(self):
        out = []
        for s in self.segments:
            if abs(s.turn) > _TINY:
                out.append(("turn", s.turn))
            if s.length > _TINY:
                out.append(("straight", s.length))
        return out


@dataclass(frozen=True)
class BcSpeeds:
    v_bc: float = 0.4
    omega_bc: float = math.pi
    t_nav: float = 0.1

    @property
    def eps_t(self) -> float:
        return self.t_nav


def _corners(cells):
    keep = [cells[0]]
    for k in range(1, len(cells) - 1):
        d0 = (cells[k][0] - cells[k - 1][0], cells[k][1] - cells[k - 1][1])
        d1 = (cells[k + 1][0] - cells[k][0], cells[k + 1][1] - cells[k][1])
        if d0 != d1:
            keep.append(cells[k])
    if len(cells) > 1:
        keep.append(cells[-1])
    return keep


def build_plan(m: GridMap, a, b, heading: float | None, speeds: BcSpeeds,
               worst_approach: bool = False) -> PrimitivePlan:
    """Turn/straight plan from ``a`` to ``b`` along the A* path.

    ``heading=None`` charges a worst-case half turn up front.  With
    ``worst_approach`` the plan also charges a half-diagonal run into the
    start cell's centre, which makes it valid for any start inside that cell.
    """
    a = (float(a[0]), float(a[1]))
    b = (float(b[0]), float(b[1]))
    if a == b and not worst_approach:
        return PrimitivePlan((), 0.0, heading, a)
    cells, _ = astar_path(m, a, b)
    pts = [a]
    if len(cells) > 1:
        pts += [m.center(c) for c in _corners(cells)]
    pts.append(b)
    clean = [pts[0]]
    for p in pts[1:]:
        if math.hypot(p[0] - clean[-1][0], p[1] - clean[-1][1]) > _TINY:
            clean.append(p)
    segs = []
    h = heading
    if worst_approach:
        segs.append(Segment(math.pi, m.half_diagonal, a, float("nan")))
        h = None
    for p, q in zip(clean, clean[1:]):
        direction = math.atan2(q[1] - p[1], q[0] - p[0])
        turn = math.pi if h is None else wrap_angle(direction - h)
        segs.append(Segment(turn, math.hypot(q[0] - p[0], q[1] - p[1]), q, direction))
        h = direction
    dur = sum(abs(s.turn) / speeds.omega_bc + s.length / speeds.v_bc for s in segs)
    return PrimitivePlan(tuple(segs), dur, h, a)


def periods_for(amount: float, rate: float, t_nav: float) -> int:
    if amount <= _TINY:
        return 0
    return max(1, math.ceil(amount / rate / t_nav - 1e-9))


def plan_execution_time(plan: PrimitivePlan, speeds: BcSpeeds) -> float:
    n = 0
    for s in plan.segments:
        n += periods_for(abs(s.turn), speeds.omega_bc, speeds.t_nav)
        n += periods_for(s.length, speeds.v_bc, speeds.t_nav)
    return n * speeds.t_nav


def plan_bound(plan: PrimitivePlan, speeds: BcSpeeds) -> float:
    """Ideal duration plus one period of slack per junction, never below quantised execution."""
    if not plan.segments:
        return 0.0
    formula = plan.duration + speeds.eps_t * (len(plan.segments) - 1)
    return max(formula, plan_execution_time(plan, speeds))


def time_upper_bound(m: GridMap, a, b, v_bc: float = 0.4, omega_bc: float = math.pi,
                     heading: float | None = None, t_nav: float = 0.1) -> float:
    speeds = BcSpeeds(v_bc, omega_bc, t_nav)
    return plan_bound(build_plan(m, a, b, heading, speeds), speeds)


def mission_time_bound(m: GridMap, p, Tseq, speeds: BcSpeeds = BcSpeeds(), heading: float | None = None,
                       cache: dict | None = None) -> float:
    """``tu(p, T1) + sum tu(Ti, Ti+1)``, each leg with unknown heading after the first."""
    if not Tseq:
        return 0.0
    total = plan_bound(build_plan(m, p, Tseq[0], heading, speeds), speeds)
    return total + chain_bound(m, tuple(map(tuple, Tseq)), speeds, cache)


def chain_bound(m: GridMap, Tseq: tuple, speeds: BcSpeeds, cache: dict | None = None) -> float:
    key = ("chain", Tseq)
    if cache is not None and key in cache:
        return cache[key]
    total = 0.0
    for a, b in zip(Tseq, Tseq[1:]):
        total += plan_bound(build_plan(m, a, b, None, speeds), speeds)
    if cache is not None:
        cache[key] = total
    return total


def reachable_region(p, s_mp: int, dt: float, v_max: float, m: GridMap) -> list[tuple[int, int]]:
    """In-map cells meeting the closed disk of radius ``v_max * s_mp * dt`` around ``p``."""
    r = v_max * s_mp * dt
    cs = m.cell_size
    nx, ny = m.shape
    i0 = max(0, int(math.floor((p[0] - r - m.origin[0]) / cs)))
    i1 = min(nx - 1, int(math.floor((p[0] + r - m.origin[0]) / cs)))
    j0 = max(0, int(math.floor((p[1] - r - m.origin[1]) / cs)))
    j1 = min(ny - 1, int(math.floor((p[1] + r - m.origin[1]) / cs)))
    out = []
    for i in range(i0, i1 + 1):
        x0 = m.origin[0] + i * cs
        qx = min(max(p[0], x0), x0 + cs)
        for j in range(j0, j1 + 1):
            y0 = m.origin[1] + j * cs
            qy = min(max(p[1], y0), y0 + cs)
            if math.hypot(qx - p[0], qy - p[1]) <= r + 1e-12:
                out.append((i, j))
    return out


def cell_bound(m: GridMap, cell, Tseq, speeds: BcSpeeds, cache: dict | None = None) -> float:
    """Mission bound valid from any pose inside ``cell``."""
    key = ("cell", cell, tuple(map(tuple, Tseq)))
    if cache is not None and key in cache:
        return cache[key]
    first = plan_bound(build_plan(m, m.center(cell), Tseq[0], None, speeds, worst_approach=True), speeds)
    val = first + chain_bound(m, tuple(map(tuple, Tseq)), speeds, cache)
    if cache is not None:
        cache[key] = val
    return val


@dataclass
class McDecision:
    switch: bool
    worst_bound: float
    diagnostic: str = ""


def mc_dm_switch(m: GridMap, p, Tseq, remaining_time: float, s_mp: int, dt: float,
                 v_max: float, speeds: BcSpeeds = BcSpeeds(), cache: dict | None = None) -> McDecision:
    """Stay on the advanced controller only if every reachable cell still has slack."""
    if not Tseq:
        return McDecision(False, 0.0)
    if remaining_time <= 0:
        return McDecision(True, math.inf, "deadline already passed")
    worst = 0.0
    for cell in reachable_region(p, s_mp, dt, v_max, m):
        if not m.is_free(cell):
            return McDecision(True, math.inf, f"reachable cell {cell} is blocked on the inflated map")
        try:
            worst = max(worst, cell_bound(m, cell, Tseq, speeds, cache))
        except Unreachable as exc:
            return McDecision(True, math.inf, f"unreachable: {exc}")
    slack = remaining_time - s_mp * dt
    if worst < slack:
        return McDecision(False, worst)
    return McDecision(True, worst, f"worst bound {worst:.4g} s over the reachable region >= {slack:.4g} s left")


def precompute_bounds(m: GridMap, Tseq, speeds: BcSpeeds, cache: dict) -> int:
    """Fill ``cache`` with the bound for every free cell; returns how many were stored."""
    n = 0
    nx, ny = m.shape
    for i in range(nx):
        for j in range(ny):
            if m.occupancy[i, j]:
                continue
            try:
                cell_bound(m, (i, j), Tseq, speeds, cache)
                n += 1
            except Unreachable:
                pass
    return n


# --------------------------------------------------------------- controllers


def straight_waypoints(targets, rng=None, m=None):
    return [(tuple(t), k) for k, t in enumerate(targets)]


def detour_waypoints(targets, rng: random.Random, m: GridMap, radius: float = 0.5, tries: int = 20):
    """Stand-in advanced planner: a random free detour point before every target."""
    out = []
    for k, t in enumerate(targets):
        for _ in range(tries):
            ang = rng.uniform(-math.pi, math.pi)
            rad = radius * math.sqrt(rng.random())
            q = (t[0] + rad * math.cos(ang), t[1] + rad * math.sin(ang))
            if m.is_free(m.cell_of(q)):
                out.append((q, None))
                break
        out.append((tuple(t), k))
    return out


AC_PLANNERS = {"straight": straight_waypoints, "detour": detour_waypoints}


@dataclass(frozen=True)
class McState:
    targets: tuple
    waypoints: tuple  # ((x, y), target index or None)
    visited: int = 0
    ctlr: Mode = Mode.AC
    wp_index: int = 0
    # targets already visited when the baseline took over
    base_visited: int = 0

    @property
    def tseq(self) -> tuple:
        return tuple(self.targets[self.visited:])

    @property
    def T(self):
        if self.ctlr == Mode.BC or self.wp_index >= len(self.waypoints):
            return self.targets[self.visited] if self.visited < len(self.targets) else self.targets[-1]
        return self.waypoints[self.wp_index][0]


def mc_ac_advance(ms: McState, p, arrival_radius: float) -> tuple[McState, tuple]:
    events = []
    while ms.wp_index < len(ms.waypoints):
        q, tidx = ms.waypoints[ms.wp_index]
        if math.hypot(p[0] - q[0], p[1] - q[1]) > arrival_radius:
            break
        visited = ms.visited
        if tidx is not None and tidx == visited:
            visited += 1
            events.append(("target_visited", tidx))
        ms = replace(ms, wp_index=ms.wp_index + 1, visited=visited)
    return ms, tuple(events)


@dataclass(frozen=True)
class McNavState:
    mode: str = "AC2"
    primitives: tuple = ()  # (kind, amount, leg, is_leg_end)
    index: int = 0
    periods_left: int = 0
    rate: float = 0.0
    kind: str = ""
    legs_done: int = 0
    leg_bounds: tuple = ()
    base_visited: int = 0


def plan_mission(m: GridMap, pose, Tseq, speeds: BcSpeeds):
    """Chained per-leg plans from the actual pose; returns (primitives, per-leg bounds)."""
    prims, bounds = [], []
    pos, h = (pose[0], pose[1]), pose[2]
    for leg, tgt in enumerate(Tseq):
        plan = build_plan(m, pos, tgt, h, speeds)
        bounds.append(plan_bound(plan, speeds))
        items = plan.primitives
        for k, (kind, amt) in enumerate(items):
            prims.append((kind, amt, leg, k == len(items) - 1))
        if not items:
            prims.append(("noop", 0.0, leg, True))
        pos = (float(tgt[0]), float(tgt[1]))
        if plan.final_heading is not None:
            h = plan.final_heading
    return tuple(prims), tuple(bounds)


def mc_bc_step(ns: McNavState, speeds: BcSpeeds, params: PlantParams) -> tuple[McNavState, tuple[float, float], tuple]:
    """Emit one period of the active primitive, starting the next one when due."""
    events = []
    idx, left, rate, kind, legs_done = ns.index, ns.periods_left, ns.rate, ns.kind, ns.legs_done
    while left == 0:
        if kind and idx > 0:
            _, _, leg, end = ns.primitives[idx - 1]
            if end and legs_done <= leg:
                legs_done = leg + 1
                events.append(("bc_leg_done", leg))
        if idx >= len(ns.primitives):
            return replace(ns, index=idx, periods_left=0, kind="", legs_done=legs_done), (0.0, 0.0), tuple(events)
        pkind, amount, leg, _ = ns.primitives[idx]
        if idx == 0 or ns.primitives[idx - 1][2] != leg:
            events.append(("bc_leg_start", leg))
        idx += 1
        if pkind == "turn":
            left = periods_for(abs(amount), speeds.omega_bc, speeds.t_nav)
            rate = amount / (left * speeds.t_nav)
        elif pkind == "straight":
            left = periods_for(amount, speeds.v_bc, speeds.t_nav)
            rate = amount / (left * speeds.t_nav)
        else:
            left = 0
        kind = pkind
    cmd = (0.0, rate) if kind == "turn" else (rate, 0.0)
    cmd = clamp_command(*cmd, params)
    return replace(ns, index=idx, periods_left=left - 1, rate=rate, kind=kind, legs_done=legs_done), cmd, tuple(events)
