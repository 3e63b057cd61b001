"""Scenario files: JSON loading and validation against the environment assumptions.

Schema (SI units, radians)::

    {
      "name": "...", "mode": "ES_CF" | "MC", "dt": 0.05,
      "periods": {"mp": 4, "nav": 2, "plant": 1},
      "plant": {PlantParams fields}, "energy": {E_MP, E_180, BE_MP, eps_BE},
      "nav": {NavGains fields},
      "obstacles": [[[x, y], ...], ...], "stations": [[x, y], ...],
      "targets": [[x, y], ...], "start": [x, y, theta],
      "initial_battery": optional, "seed": 0, "max_ticks": 4000,
      "limits": {"min_internal_angle_deg", "min_edge_length", "min_separation"},
      "mc": {"deadline", "cell_size", "inflation", "v_bc", "omega_bc", "ac", "bounds", "cache"},
      "contract_mutations": ["Nav:A_BE", ...]
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import shapely

from .mission import EnergyConstants
from .navigation import NavGains
from .rover import PlantParams, PowerStation, derived_energy_constants

MODES = ("ES_CF", "MC")


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class Limits:
    min_internal_angle_deg: float = 30.0
    min_edge_length: float = 0.05
    # None means the sensor range, which keeps adjacent cones on one obstacle
    min_separation: float | None = None


@dataclass(frozen=True)
class McConfig:
    deadline: float = 60.0
    cell_size: float = 0.05
    inflation: float = 0.05
    v_bc: float = 0.4
    omega_bc: float = math.pi
    ac: str = "straight"
    bounds: tuple[float, float, float, float] = (-2.0, -2.0, 2.0, 2.0)
    cache: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    mode: str = "ES_CF"
    dt: float = 0.05
    s_mp: int = 4
    s_nav: int = 2
    s_plant: int = 1
    plant: PlantParams = PlantParams()
    energy: EnergyConstants = EnergyConstants()
    gains: NavGains = NavGains()
    obstacles: tuple = ()
    stations: tuple[PowerStation, ...] = ()
    targets: tuple[tuple[float, float], ...] = ()
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    initial_battery: float | None = None
    seed: int = 0
    max_ticks: int = 4000
    limits: Limits = Limits()
    mc: McConfig = McConfig()
    contract_mutations: tuple[str, ...] = ()

    @property
    def battery0(self) -> float:
        return self.plant.battery_capacity if self.initial_battery is None else self.initial_battery

    @property
    def t_nav(self) -> float:
        return self.s_nav * self.dt

    @property
    def t_mp(self) -> float:
        return self.s_mp * self.dt


def _sub(cls, raw, where):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ParseError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    extra = set(raw) - known
    if extra:
        raise ParseError(f"unknown keys in {where}: {sorted(extra)}")
    vals = {k: (tuple(v) if isinstance(v, list) else v) for k, v in raw.items()}
    return cls(**vals)


def _points(raw, where, dim=2):
    try:
        pts = tuple(tuple(float(c) for c in p) for p in raw)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: {exc}") from None
    if any(len(p) != dim for p in pts):
        raise ParseError(f"{where}: every point needs {dim} coordinates")
    return pts


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ParseError("scenario must be a JSON object")
    known = {"name", "mode", "dt", "periods", "plant", "energy", "nav", "obstacles", "stations", "targets",
             "start", "initial_battery", "seed", "max_ticks", "limits", "mc", "contract_mutations", "notes"}
    extra = set(d) - known
    if extra:
        raise ParseError(f"unknown top-level keys: {sorted(extra)}")
    per = d.get("periods", {})
    if not isinstance(per, dict) or set(per) - {"mp", "nav", "plant"}:
        raise ParseError("periods must be an object with keys mp, nav, plant")
    start = _points([d.get("start", [0.0, 0.0, 0.0])], "start", 3)[0]
    try:
        return Scenario(
            name=str(d.get("name", "scenario")),
            mode=str(d.get("mode", "ES_CF")),
            dt=float(d.get("dt", 0.05)),
            s_mp=int(per.get("mp", 4)),
            s_nav=int(per.get("nav", 2)),
            s_plant=int(per.get("plant", 1)),
            plant=_sub(PlantParams, d.get("plant"), "plant"),
            energy=_sub(EnergyConstants, d.get("energy"), "energy"),
            gains=_sub(NavGains, d.get("nav"), "nav"),
            obstacles=tuple(_points(poly, f"obstacles[{i}]") for i, poly in enumerate(d.get("obstacles", []))),
            stations=tuple(PowerStation(*p) for p in _points(d.get("stations", []), "stations")),
            targets=_points(d.get("targets", []), "targets"),
            start=start,
            initial_battery=None if d.get("initial_battery") is None else float(d["initial_battery"]),
            seed=int(d.get("seed", 0)),
            max_ticks=int(d.get("max_ticks", 4000)),
            limits=_sub(Limits, d.get("limits"), "limits"),
            mc=_sub(McConfig, d.get("mc"), "mc"),
            contract_mutations=tuple(d.get("contract_mutations", ())),
        )
    except TypeError as exc:
        raise ParseError(str(exc)) from None


def interior_angles(poly) -> np.ndarray:
    """Interior angle at each vertex (radians), for either winding."""
    p = np.asarray(poly, dtype=float)
    prev, nxt = np.roll(p, 1, axis=0), np.roll(p, -1, axis=0)
    e_in, e_out = p - prev, nxt - p
    cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    dot = (e_in * e_out).sum(axis=1)
    turn = np.arctan2(cross, dot)
    area2 = np.sum(p[:, 0] * nxt[:, 1] - nxt[:, 0] * p[:, 1])
    if area2 < 0:
        turn = -turn
    return math.pi - turn


def validate(s: Scenario) -> list[str]:
    """Every violated assumption, named; empty when the scenario is usable."""
    out: list[str] = []
    if s.mode not in MODES:
        out.append(f"mode: must be one of {MODES}")
    if not s.dt > 0:
        out.append("dt: global tick must be > 0")
    if min(s.s_mp, s.s_nav, s.s_plant) < 1:
        out.append("periods: every period must be >= 1 tick")
    elif s.s_mp % s.s_nav or s.s_nav % s.s_plant:
        out.append("periods.divisibility: s_MP must be a multiple of s_Nav, and s_Nav of s_Plant")
    out += s.plant.problems()
    out += s.energy.problems()
    if not 0 < s.gains.arrival_radius < s.plant.ps_detect_range:
        out.append("nav.arrival_radius must lie in (0, d_PS)")
    if s.gains.safety_margin < 0:
        out.append("nav.safety_margin must be >= 0")
    if not 0 < s.battery0 <= s.plant.battery_capacity:
        out.append("initial_battery must lie in (0, B_max]")
    if not s.targets:
        out.append("targets: at least one target is required")
    if s.max_ticks < 1:
        out.append("max_ticks must be >= 1")

    lim = s.limits
    min_angle = math.radians(lim.min_internal_angle_deg)
    sep = s.plant.sensor_range if lim.min_separation is None else lim.min_separation
    shapes = []
    for i, poly in enumerate(s.obstacles):
        if len(poly) < 3:
            out.append(f"obstacle[{i}].polygon: needs at least 3 vertices")
            shapes.append(None)
            continue
        shp = shapely.Polygon(poly)
        if not shp.is_valid or shp.area <= 0:
            out.append(f"obstacle[{i}].polygon: not a simple polygon (stationary polyhedra assumption)")
        edges = np.linalg.norm(np.diff(np.vstack([poly, poly[:1]]), axis=0), axis=1)
        if edges.min() < lim.min_edge_length:
            out.append(f"obstacle[{i}].min_edge_length: shortest edge {edges.min():.4g} < {lim.min_edge_length}")
        ang = interior_angles(poly).min()
        if ang < min_angle - 1e-12:
            out.append(f"obstacle[{i}].min_internal_angle: {math.degrees(ang):.3g} deg "
                       f"< {lim.min_internal_angle_deg} deg")
        shapes.append(shp)
    for i in range(len(shapes)):
        for j in range(i + 1, len(shapes)):
            if shapes[i] is None or shapes[j] is None:
                continue
            d = shapes[i].distance(shapes[j])
            if d <= sep:
                out.append(f"obstacles[{i},{j}].separation: gap {d:.4g} <= {sep:.4g}, "
                           "adjacent sensors could see different obstacles")

    def blocked(pt, margin=0.0):
        q = shapely.Point(pt)
        return any(sh is not None and sh.distance(q) <= margin for sh in shapes)

    if blocked(s.start[:2], s.gains.safety_margin):
        out.append("start: inside or too close to an obstacle")
    for k, t in enumerate(s.targets):
        if blocked(t):
            out.append(f"targets[{k}]: inside an obstacle")
    for k, ps in enumerate(s.stations):
        if blocked(ps.location):
            out.append(f"stations[{k}]: inside an obstacle")

    if s.mode == "ES_CF":
        near = [ps for ps in s.stations
                if math.hypot(ps.x - s.start[0], ps.y - s.start[1]) <= s.plant.ps_detect_range]
        if not near:
            out.append("start.at_station: the rover must start within d_PS of a power station")
        need = derived_energy_constants(s.plant, s.t_mp, s.t_nav)
        for key, low in need.items():
            have = getattr(s.energy, key)
            if have < low - 1e-12:
                out.append(f"energy.{key}: configured {have:.4g} is below the derived worst case {low:.4g}")
    elif s.mode == "MC":
        mc = s.mc
        if not mc.deadline > 0:
            out.append("mc.deadline must be > 0")
        if not mc.cell_size > 0:
            out.append("mc.cell_size must be > 0")
        if mc.inflation < s.gains.safety_margin:
            out.append("mc.inflation must be >= nav.safety_margin")
        if not (0 < mc.v_bc <= s.plant.v_max and 0 < mc.omega_bc <= s.plant.omega_max):
            out.append("mc.v_bc / mc.omega_bc must be positive and within plant bounds")
        if mc.ac not in ("straight", "detour"):
            out.append("mc.ac must be 'straight' or 'detour'")
        x0, y0, x1, y1 = mc.bounds
        if not (x1 > x0 and y1 > y0):
            out.append("mc.bounds must be [xmin, ymin, xmax, ymax]")
        for k, p in enumerate((s.start[:2],) + tuple(s.targets)):
            if not (x0 <= p[0] < x1 and y0 <= p[1] < y1):
                out.append(f"mc.bounds: point {k} {p} outside the map")
    for m in s.contract_mutations:
        if m.count(":") != 1:
            out.append(f"contract_mutations: {m!r} must look like 'Component:TOKEN'")
    return out


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    s = scenario_from_dict(raw)
    problems = validate(s)
    if problems:
        raise ValidationError(problems)
    return s


def shipped(name: str) -> Path:
    """Path of a scenario bundled with the package."""
    return Path(__file__).with_name("scenarios") / f"{name}.json"
