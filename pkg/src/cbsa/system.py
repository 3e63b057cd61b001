"""System assembly: Mission Planning || Navigation || Plant, wired as in the architecture figure.

MP publishes ``ctlr`` on a hardwired line that Nav's decision module reads in
the same tick, so an MP switch to its baseline cascades into Nav.  Plant
outputs and Nav's waypoint log feed back into earlier components and are
therefore read one tick late.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

from . import completion as mcmod
from .assurance import (Contract, DischargeGraph, DischargeReport, Mode, SimplexInstance, check_discharge,
                        dm_decide, implies)
from .mission import (MissionState, choose_next_target, es_energy_requirement, mp_dm_switch,
                      recharge_controller)
from .navigation import (NavInputs, NavMode, NavState, WaypointLog, backtrack_remaining, cf_dm, go_to_target,
                         avoid_obstacles, nav_step)
from .rover import RoverState, World, detect_station, plant_step, sense
from .scenario import Scenario
from .sync import Component, Composition, RateEntry, ValueStore, compose_all

A_BE, A_P, A_TU = "A_BE", "A_P", "A_TU"
ES, CF, MC = "ES", "CF", "MC"


class DischargeError(RuntimeError):
    def __init__(self, report: DischargeReport):
        self.report = report
        super().__init__(str(report))


@dataclass
class System:
    scenario: Scenario
    composition: Composition
    store: ValueStore
    contracts: list[Contract]
    instances: list[SimplexInstance]
    discharge: DischargeReport
    world: World
    grid: mcmod.GridMap | None = None
    speeds: mcmod.BcSpeeds | None = None
    cache: dict | None = None
    component_periods: dict = field(default_factory=dict)


def _stamp(tick, events):
    return tuple((tick,) + tuple(e) for e in events)


# ------------------------------------------------------------------ derived views


def forward_energy(W: WaypointLog | None, meter: float) -> float:
    if W is None or not W.entries:
        return 0.0
    return max(0.0, meter - W.anchor.energy)


def energy_requirement(s: Scenario, ctlr: Mode, nav: NavState, meter: float, W: WaypointLog | None) -> tuple[float, float]:
    """``(E(p, PS), BE)`` for the current tick from the monitor's point of view."""
    k = s.energy
    if ctlr == Mode.AC or nav.mode in (NavMode.GO, NavMode.STOP):
        fe = forward_energy(W, meter)
        be = (1.0 + k.eps_BE) * fe
        if ctlr == Mode.BC:
            # the cascade has not reached Nav yet: the half turn is still ahead
            return k.E_180 + be, be
        return es_energy_requirement(ctlr, be, k.E_180), be
    if nav.mode == NavMode.TURN or (nav.turn_left == 0 and nav.mode == NavMode.BACKTRACK and nav.bt_target is None):
        be = nav.log.backtrack_energy()
        turn_left = max(0.0, k.E_180 - (meter - nav.turn_meter))
        return turn_left + be, be
    be = backtrack_remaining(nav, meter)
    return es_energy_requirement(Mode.BC, be, k.E_180), be


def plant_bounds_ok(s: Scenario, view) -> bool:
    p = s.plant
    return (-1e-9 <= view["v"] <= p.v_max + 1e-9 and abs(view["omega"]) <= p.omega_max + 1e-9
            and view["B"] <= p.battery_capacity + 1e-9)


# ------------------------------------------------------------------ components


def _plant_component(s: Scenario, world: World) -> Component:
    params, t = s.plant, s.s_plant * s.dt
    es = s.mode == "ES_CF"

    def f(view, tick):
        res = plant_step(view["rover"], (view["v_T"], view["omega_T"]), params, t, world,
                         recharge=es and view["ctlr"] == Mode.BC, drain=es)
        ev = []
        if res.recharged and view["rover"].battery < params.battery_capacity:
            ps = detect_station(res.state, world, params)
            ev.append(("recharge", round(res.pre_recharge_battery, 9), list(ps.location)))
        if res.depleted:
            ev.append(("battery_depleted",))
        return {"rover": res.state, "meter": view["meter"] + res.energy, "recharging": res.recharged,
                "plant_events": _stamp(tick, ev)}

    def g(view, tick):
        return plant_outputs(view["rover"], world, s)

    return Component("Plant", {"rover"}, {"v_T", "omega_T", "ctlr"},
                     {"x", "y", "theta", "v", "omega", "B", "ir", "station", "d_o", "meter", "recharging", "plant_events"},
                     [RateEntry(f, g, s.s_plant)])


def plant_outputs(r: RoverState, world: World, s: Scenario) -> dict:
    rd = sense(r, world, s.plant)
    return {"x": r.x, "y": r.y, "theta": r.theta, "v": r.v, "omega": r.omega, "B": r.battery,
            "ir": rd.ir, "station": rd.detected_ps, "d_o": rd.d_o}


def _mp_instance(s: Scenario) -> SimplexInstance:
    k = s.energy
    return SimplexInstance(
        "MP", advanced=choose_next_target, baseline=recharge_controller,
        dm=lambda v: mp_dm_switch(v["B"], v["FE"], k), period=s.s_mp, switch_out="ctlr",
        release=lambda v: v["B"] >= s.plant.battery_capacity - 1e-9 and v["nav_mode"] == NavMode.DONE)


def _mp_mc_instance(s: Scenario, grid, speeds, cache) -> SimplexInstance:
    def dm(v):
        rem = s.mc.deadline - v["elapsed"]
        return mcmod.mc_dm_switch(grid, (v["x"], v["y"]), v["tseq"], rem, s.s_mp, s.dt, s.plant.v_max,
                                  speeds, cache).switch

    return SimplexInstance("MP", advanced=mcmod.AC_PLANNERS[s.mc.ac], baseline=mcmod.plan_mission, dm=dm,
                           period=s.s_mp, switch_out="ctlr")


def _nav_instance(s: Scenario, baseline) -> SimplexInstance:
    return SimplexInstance("Nav", advanced="CF-instance", baseline=baseline, dm=lambda v: False,
                           period=s.s_nav, switch_in="ctlr", release=lambda v: v["ctlr"] == Mode.AC)


def _cf_instance(s: Scenario) -> SimplexInstance:
    return SimplexInstance("CF", advanced=go_to_target, baseline=avoid_obstacles,
                           dm=lambda v: cf_dm(v["ir"], s.plant, s.gains.safety_margin, t_nav=s.t_nav) == "BC2",
                           period=s.s_nav, release=lambda v: True)


def mp_es_decide(s: Scenario, ms: MissionState, view: dict, tick: int) -> tuple[MissionState, tuple]:
    """One MP period of the energy-safety configuration."""
    W = view["W"]
    fe = forward_energy(W, view["meter"])
    if W is not None and W.entries:
        ms = replace(ms, last_ps=W.anchor_ps)
    ms = replace(ms, FE=fe)
    inst = replace(_mp_instance(s), active=ms.ctlr, history=[])
    dv = {"B": view["B"], "FE": fe, "nav_mode": view["nav_mode"]}
    new = dm_decide(inst, dv, tick)
    events = []
    if new != ms.ctlr:
        events.append(("mp_switch", str(ms.ctlr), str(new), round(view["B"], 9), round(fe, 9)))
    ms = replace(ms, ctlr=new)
    if new == Mode.BC:
        ms = recharge_controller(ms)
    else:
        ms, ev = choose_next_target(ms, (view["x"], view["y"]), s.gains.arrival_radius)
        events += ev
    return ms, tuple(events)


def _mp_es_component(s: Scenario) -> Component:
    def f(view, tick):
        ms, ev = mp_es_decide(s, view["ms"], view, tick)
        return {"ms": ms, "T": ms.T, "ctlr": ms.ctlr, "FE": ms.FE, "mp_events": _stamp(tick, ev)}

    return Component("MP", {"ms"}, {"x", "y", "B", "meter", "W", "nav_mode"},
                     {"T", "ctlr", "FE", "mp_events"}, [RateEntry(f, None, s.s_mp)])


def _nav_es_component(s: Scenario) -> Component:
    def f(view, tick):
        prev = view["nav"]
        inst = replace(_nav_instance(s, "backtrack"),
                       active=Mode.BC if prev.mode in (NavMode.TURN, NavMode.BACKTRACK, NavMode.DONE) else Mode.AC)
        mode = dm_decide(inst, {"ctlr": view["ctlr"]}, tick)
        inp = NavInputs(mode, view["T"], view["x"], view["y"], view["theta"], view["ir"], view["station"],
                        view["meter"], tick)
        ns, cmd, ev = nav_step(prev, inp, s.plant, s.gains, s.t_nav)
        return {"nav": ns, "v_T": cmd.v_T, "omega_T": cmd.omega_T, "W": ns.log, "nav_mode": ns.mode,
                "nav_events": _stamp(tick, ev)}

    return Component("Nav", {"nav"}, {"T", "ctlr", "x", "y", "theta", "ir", "station", "meter"},
                     {"v_T", "omega_T", "W", "nav_mode", "nav_events"}, [RateEntry(f, None, s.s_nav)])


def mp_mc_decide(s: Scenario, ms: mcmod.McState, view: dict, tick: int, grid, speeds, cache):
    events = []
    p = (view["x"], view["y"])
    if ms.ctlr == Mode.BC:
        visited = min(len(ms.targets), ms.base_visited + view["legs_done"])
        for k in range(ms.visited, visited):
            events.append(("target_visited", k))
        return replace(ms, visited=visited), None, tuple(events)
    ms, ev = mcmod.mc_ac_advance(ms, p, s.gains.arrival_radius)
    events += ev
    # time of the pose MP sees; at tick 0 Nav cannot act before the first plant tick has passed
    observed = max(1, tick - 1) * s.dt
    decision = mcmod.mc_dm_switch(grid, p, ms.tseq, s.mc.deadline - observed, s.s_mp, s.dt, s.plant.v_max,
                                  speeds, cache)
    if decision.switch and ms.tseq:
        events.append(("mp_switch", "AC", "BC", round(decision.worst_bound, 9), decision.diagnostic))
        ms = replace(ms, ctlr=Mode.BC, base_visited=ms.visited)
    return ms, decision, tuple(events)


def _mp_mc_component(s: Scenario, grid, speeds, cache) -> Component:
    def f(view, tick):
        ms, dec, ev = mp_mc_decide(s, view["mc"], view, tick, grid, speeds, cache)
        bound = view["mc_bound"] if dec is None else dec.worst_bound
        return {"mc": ms, "T": ms.T, "ctlr": ms.ctlr, "tseq": ms.tseq, "mc_bound": bound,
                "mp_events": _stamp(tick, ev)}

    return Component("MP", {"mc"}, {"x", "y", "legs_done"}, {"T", "ctlr", "tseq", "mc_bound", "mp_events"},
                     [RateEntry(f, None, s.s_mp)])


def _nav_mc_component(s: Scenario, grid, speeds) -> Component:
    def f(view, tick):
        ns = view["mcnav"]
        inst = replace(_nav_instance(s, "primitive-executor"), active=Mode.BC if ns.mode == "BC" else Mode.AC)
        mode = dm_decide(inst, {"ctlr": view["ctlr"]}, tick)
        ev = []
        if mode == Mode.AC:
            prop = go_to_target(view["x"], view["y"], view["theta"], view["T"], s.plant, s.gains, s.t_nav, view["ir"])
            cf = cf_dm(view["ir"], s.plant, s.gains.safety_margin, prop.v_T * s.t_nav, s.t_nav)
            cmd = (prop.v_T, prop.omega_T) if cf == "AC2" else (0.0, 0.0)
            ns = replace(ns, mode=cf)
        else:
            if ns.mode != "BC":
                try:
                    prims, bounds = mcmod.plan_mission(grid, (view["x"], view["y"], view["theta"]),
                                                       view["tseq"], speeds)
                except mcmod.Unreachable as exc:
                    prims, bounds = (), ()
                    ev.append(("bc_unreachable", str(exc)))
                ns = mcmod.McNavState("BC", prims, leg_bounds=bounds)
                ev.append(("bc_plan", len(prims), tuple(round(b, 9) for b in bounds)))
            ns, cmd, more = mcmod.mc_bc_step(ns, speeds, s.plant)
            ev += more
        return {"mcnav": ns, "v_T": cmd[0], "omega_T": cmd[1], "legs_done": ns.legs_done, "nav_mode": ns.mode,
                "nav_events": _stamp(tick, ev)}

    return Component("Nav", {"mcnav"}, {"T", "ctlr", "tseq", "x", "y", "theta", "ir"},
                     {"v_T", "omega_T", "legs_done", "nav_mode", "nav_events"}, [RateEntry(f, None, s.s_nav)])


# ------------------------------------------------------------------ contracts


def build_contracts(s: Scenario) -> list[Contract]:
    eps = s.energy.eps_BE
    if s.mode == "MC":
        mp = Contract("MP", frozenset({"x", "y", "legs_done"}), frozenset({"T", "ctlr", "tseq"}),
                      assumption=lambda v: v["leg_time_ok"], guarantee=lambda v: v["mc_ok"],
                      assumption_tokens=frozenset({A_TU}), guarantee_tokens=frozenset({MC}))
        nav = Contract("Nav", frozenset({"T", "ctlr", "tseq", "x", "y", "theta", "ir"}),
                       frozenset({"v_T", "omega_T", "legs_done"}),
                       assumption=lambda v: v["plant_ok"], guarantee=lambda v: v["d_o"] > 0 and v["leg_time_ok"],
                       assumption_tokens=frozenset({A_P}), guarantee_tokens=frozenset({A_TU, CF}))
    else:
        mp = Contract("MP", frozenset({"x", "y", "B", "meter", "W", "nav_mode"}), frozenset({"T", "ctlr", "FE"}),
                      assumption=implies(lambda v: v["ctlr"] == Mode.BC,
                                         lambda v: v["BE"] <= (1 + eps) * v["FE_switch"] + 1e-6),
                      guarantee=lambda v: v["B"] > v["E_req"],
                      assumption_tokens=frozenset({A_BE}), guarantee_tokens=frozenset({ES}))
        nav = Contract("Nav", frozenset({"T", "ctlr", "x", "y", "theta", "ir", "station", "meter"}),
                       frozenset({"v_T", "omega_T", "W"}),
                       assumption=lambda v: v["plant_ok"],
                       guarantee=lambda v: v["d_o"] > 0 and (v["ctlr"] != Mode.BC
                                                             or v["BE"] <= (1 + eps) * v["FE_switch"] + 1e-6),
                       assumption_tokens=frozenset({A_P}), guarantee_tokens=frozenset({CF, A_BE}))
    plant = Contract("Plant", frozenset({"v_T", "omega_T", "ctlr"}), frozenset({"x", "y", "theta", "B", "ir"}),
                     guarantee=lambda v: v["plant_ok"], guarantee_tokens=frozenset({A_P}))
    contracts = [mp, nav, plant]
    for mut in s.contract_mutations:
        who, tok = mut.split(":")
        contracts = [c.without_guarantee(tok) if c.name == who else c for c in contracts]
    return contracts


# ------------------------------------------------------------------ assembly


def discharge_report(s: Scenario) -> DischargeReport:
    g = DischargeGraph(build_contracts(s), delayed_edges=frozenset({("Plant", "Nav"), ("Plant", "MP"), ("Nav", "MP")}))
    return check_discharge(g)


def assemble(s: Scenario) -> System:
    """Build the composed system and its initial store; raises DischargeError if contracts do not discharge."""
    report = discharge_report(s)
    if not report.passed:
        raise DischargeError(report)
    world = World(tuple(s.obstacles), tuple(s.stations))
    rover = RoverState(s.start[0], s.start[1], s.start[2], 0.0, 0.0, s.battery0)
    plant = _plant_component(s, world)
    cur = {"rover": rover, "meter": 0.0, "recharging": False, "v_T": 0.0, "omega_T": 0.0, "plant_events": (), "mp_events": (),
           "nav_events": ()}
    cur.update(plant_outputs(rover, world, s))
    grid = speeds = cache = None
    if s.mode == "MC":
        grid = mcmod.GridMap.from_polygons(s.obstacles, s.mc.bounds, s.mc.cell_size, s.mc.inflation)
        speeds = mcmod.BcSpeeds(s.mc.v_bc, s.mc.omega_bc, s.t_nav)
        cache = {} if s.mc.cache else None
        if cache is not None:
            mcmod.precompute_bounds(grid, tuple(s.targets), speeds, cache)
        rng = random.Random(s.seed)
        wps = mcmod.AC_PLANNERS[s.mc.ac](s.targets, rng, grid)
        ms = mcmod.McState(tuple(s.targets), tuple(wps))
        cur.update({"legs_done": 0, "mcnav": mcmod.McNavState(), "nav_mode": "AC2", "mc_bound": math.nan,
                    "ctlr": Mode.AC})
        ms, dec, ev = mp_mc_decide(s, ms, dict(cur), 0, grid, speeds, cache)
        cur.update({"mc": ms, "T": ms.T, "ctlr": ms.ctlr, "tseq": ms.tseq, "mc_bound": dec.worst_bound,
                    "mp_events": _stamp(0, ev)})
        parts = [_mp_mc_component(s, grid, speeds, cache), _nav_mc_component(s, grid, speeds), plant]
        baseline = "primitive-executor"
    else:
        nav0 = NavState()
        cur.update({"nav": nav0, "W": None, "nav_mode": nav0.mode})
        ms = MissionState(tuple(s.targets))
        ms, ev = mp_es_decide(s, ms, dict(cur), 0)
        cur.update({"ms": ms, "T": ms.T, "ctlr": ms.ctlr, "FE": ms.FE, "mp_events": _stamp(0, ev)})
        parts = [_mp_es_component(s), _nav_es_component(s), plant]
        baseline = "backtrack"
    comp = compose_all(*parts)
    store = ValueStore(cur, dict(cur))
    mp_inst = _mp_mc_instance(s, grid, speeds, cache) if s.mode == "MC" else _mp_instance(s)
    instances = [mp_inst, _nav_instance(s, baseline), _cf_instance(s)]
    return System(s, comp, store, build_contracts(s), instances, report, world, grid, speeds, cache,
                  {"MP": s.s_mp, "Nav": s.s_nav, "Plant": s.s_plant})
