"""Seeded random scenarios for property suites and batch runs."""

from __future__ import annotations

import math
import random
from dataclasses import replace

from . import completion as mcmod
from .navigation import NavGains
from .rover import PowerStation
from .scenario import McConfig, Scenario, validate

BOX = (-2.0, -2.0, 2.0, 2.0)


def random_polygon(rng: random.Random, center, radius: float, n: int | None = None):
    """Convex polygon with jittered vertex angles; interior angles stay well above 30 degrees for n <= 6."""
    n = n or rng.randint(3, 6)
    base = rng.uniform(0, 2 * math.pi)
    angs = sorted(base + 2 * math.pi * (k + rng.uniform(-0.15, 0.15)) / n for k in range(n))
    return tuple((center[0] + radius * math.cos(a), center[1] + radius * math.sin(a)) for a in angs)


def _free_point(rng, obstacles, margin, box=BOX, inset=0.2):
    from shapely import Point, Polygon

    shapes = [Polygon(p) for p in obstacles]
    for _ in range(200):
        q = (rng.uniform(box[0] + inset, box[2] - inset), rng.uniform(box[1] + inset, box[3] - inset))
        if all(sh.distance(Point(q)) > margin for sh in shapes):
            return q
    raise RuntimeError("could not place a free point")


def _obstacles(rng, count, sep, box=BOX, rmin=0.15, rmax=0.35):
    from shapely import Polygon

    out = []
    for _ in range(count * 20):
        if len(out) == count:
            break
        r = rng.uniform(rmin, rmax)
        c = (rng.uniform(box[0] + 0.3, box[2] - 0.3), rng.uniform(box[1] + 0.3, box[3] - 0.3))
        poly = random_polygon(rng, c, r)
        if all(Polygon(poly).distance(Polygon(o)) > sep + 0.01 for o in out):
            out.append(poly)
    return tuple(out)


def random_es_scenario(seed: int) -> Scenario:
    """Valid energy-safety scenario; the starting charge is low enough that most runs switch."""
    rng = random.Random(seed)
    for _ in range(100):
        obstacles = _obstacles(rng, rng.randint(0, 3), 0.8)
        gains = NavGains(avoid_weight=rng.choice([0.0, 1.5]), avoid_range=0.35)
        stations = [_free_point(rng, obstacles, 0.25) for _ in range(rng.randint(1, 3))]
        start = stations[0]
        targets = [_free_point(rng, obstacles, 0.1) for _ in range(rng.randint(1, 4))]
        s = Scenario(
            name=f"es_random_{seed}", mode="ES_CF", gains=gains, obstacles=obstacles,
            stations=tuple(PowerStation(*p) for p in stations), targets=tuple(targets),
            start=(start[0], start[1], rng.uniform(-math.pi, math.pi)),
            initial_battery=rng.uniform(8.0, 60.0), seed=seed, max_ticks=1500)
        if not validate(s):
            return s
    raise RuntimeError(f"no valid scenario for seed {seed}")


def random_mc_scenario(seed: int, tight: bool = False) -> Scenario:
    """Mission-completion scenario whose deadline exceeds the initial certified bound.

    ``tight`` puts the deadline just above that bound so the decision module
    has to hand over almost at once; otherwise the slack is 10-60%.
    """
    rng = random.Random(seed)
    for _ in range(100):
        obstacles = _obstacles(rng, rng.randint(1, 3), 0.8)
        start = _free_point(rng, obstacles, 0.3)
        targets = tuple(_free_point(rng, obstacles, 0.3) for _ in range(rng.randint(1, 3)))
        mc = McConfig(deadline=1.0, ac=rng.choice(["straight", "detour"]), bounds=BOX)
        s = Scenario(name=f"mc_random_{seed}{'_tight' if tight else ''}", mode="MC",
                     gains=NavGains(avoid_weight=1.5, avoid_range=0.35), obstacles=obstacles, targets=targets,
                     start=(start[0], start[1], rng.uniform(-math.pi, math.pi)), seed=seed, mc=mc)
        grid = mcmod.GridMap.from_polygons(obstacles, BOX, mc.cell_size, mc.inflation)
        speeds = mcmod.BcSpeeds(mc.v_bc, mc.omega_bc, s.t_nav)
        try:
            bound = mcmod.mission_time_bound(grid, start, targets, speeds)
        except mcmod.Unreachable:
            continue
        slack = rng.uniform(0.05, 0.5) if tight else bound * rng.uniform(0.1, 0.6)
        deadline = bound + s.dt + slack
        s = replace(s, mc=replace(mc, deadline=deadline), max_ticks=int(math.ceil(deadline / s.dt)) + 40)
        if not validate(s):
            return s
    raise RuntimeError(f"no valid MC scenario for seed {seed}")
