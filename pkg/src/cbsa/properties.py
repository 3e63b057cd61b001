"""Online property checking and the scenario runner.

``PropertyChecker`` is a per-tick observer.  It evaluates ES (``B > E(p, PS)``
and ``B > 0``), CF (``d_o > 0``) and MC (targets visited in order before the
deadline), runs the per-component contract monitors, and at every MP decision
checks the inductive case chains of the energy-safety argument.  It also
measures each recharge episode (backtrack energy vs recorded forward energy,
deviation from the recorded waypoints) and each baseline leg of the MC plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .assurance import ContractMonitor, Mode
from .mission import mp_dm_switch
from .navigation import NavMode
from .scenario import Scenario
from .sync import ObserverAbort, SimClock, _late_reads, step
from .system import System, assemble, energy_requirement, forward_energy, plant_bounds_ok

TOL = 1e-6
CHECKS = ("es", "cf", "mc")


@dataclass(frozen=True)
class Violation:
    prop: str
    tick: int
    message: str
    context: dict = field(default_factory=dict)


@dataclass
class Episode:
    """One switch-to-baseline episode of the energy-safety configuration."""

    switch_tick: int
    fe_at_switch: float
    battery_at_switch: float
    switch_pos: tuple
    be_logged: float = math.nan
    bt_start_meter: float | None = None
    bt_end_meter: float | None = None
    arrival_battery: float | None = None
    arrival_tick: int | None = None
    recharged: bool = False
    max_deviation: float = 0.0
    off_station: bool = False

    @property
    def be_measured(self) -> float | None:
        if self.bt_start_meter is None or self.bt_end_meter is None:
            return None
        return self.bt_end_meter - self.bt_start_meter


@dataclass
class LegTiming:
    leg: int
    start_tick: int
    bound: float
    done_tick: int | None = None
    measured: float | None = None
    end_error: float | None = None


@dataclass
class RunResult:
    scenario: Scenario
    records: list[dict]
    events: list[dict]
    violations: list[Violation]
    ticks: int
    completed: bool
    aborted: bool
    episodes: list[Episode]
    legs: list[LegTiming]
    case_counts: dict
    visits: list[tuple[int, int]]
    switches: list[tuple[int, str, str]]

    def holds(self, prop: str) -> bool:
        return not any(v.prop == prop for v in self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations


CSV_COLUMNS = ("tick", "time", "x", "y", "theta", "v", "omega", "battery", "meter", "d_o", "ir_min", "station",
               "mp_ctlr", "nav_mode", "target_x", "target_y", "FE", "E_req", "es_ok", "cf_ok", "visited", "events")


class PropertyChecker:
    def __init__(self, system: System, checks=CHECKS, fail_fast: bool = False):
        self.sys = system
        self.s = system.scenario
        self.checks = set(checks)
        self.fail_fast = fail_fast
        self.violations: list[Violation] = []
        self.records: list[dict] = []
        self.events: list[dict] = []
        self.episodes: list[Episode] = []
        self.legs: list[LegTiming] = []
        self.case_counts = {"BC,BC": 0, "AC,AC": 0, "AC,BC": 0, "BC,AC": 0}
        self.visits: list[tuple[int, int]] = []
        self.switches: list[tuple[int, str, str]] = []
        self.monitors = [ContractMonitor(c, system.component_periods.get(c.name, 1)) for c in system.contracts]
        # property each contract's guarantee stands for; the Plant contract is always monitored
        self._contract_family = {"MP": "mc" if self.s.mode == "MC" else "es", "Nav": "cf"}
        self._decisions: list[dict] = []
        self._fe_switch = 0.0
        self._recharges: list[tuple[int, float]] = []
        self._topups: list[int] = []
        self._seen_violation: set[str] = set()
        self.done = False

    # ---------------------------------------------------------------- helpers

    def _flag(self, prop, tick, message, **ctx):
        key = prop.split(".")[0]
        if key not in self.checks and prop.split(".")[0] not in ("plant", "contract"):
            return
        v = Violation(prop, tick, message, ctx)
        self.violations.append(v)
        self.events.append({"tick": tick, "source": "monitor", "event": "violation", "data": [prop, message]})
        if self.fail_fast or prop in ("es.battery",):
            raise ObserverAbort(f"{prop} violated at tick {tick}: {message}", tick)

    def _collect_events(self, tick, cur):
        fresh = []
        for src in ("mp_events", "nav_events", "plant_events"):
            for e in cur.get(src, ()):
                if e[0] == tick:
                    fresh.append({"tick": tick, "source": src.split("_")[0], "event": e[1], "data": list(e[2:])})
        self.events += fresh
        return fresh

    # ---------------------------------------------------------------- per tick

    def start(self, store):
        self._observe(0, store.current, store.current)

    def __call__(self, tick, store):
        self._observe(tick, store.current, store.previous)

    def _observe(self, tick, cur, prev):
        s = self.s
        fresh = self._collect_events(tick, cur)
        names = [ev["event"] for ev in fresh]
        p = (cur["x"], cur["y"])
        ctlr = cur["ctlr"]
        for ev in fresh:
            if ev["event"] == "mp_switch":
                self.switches.append((tick, ev["data"][0], ev["data"][1]))
            elif ev["event"] == "recharge":
                self._recharges.append((tick, ev["data"][0]))

        if cur["recharging"]:
            self._topups.append(tick)
        if s.mode == "ES_CF" and tick % s.s_mp == 0 and tick > 0:
            self._mp_decision(tick, cur, prev)
        derived = {"B": cur["B"], "d_o": cur["d_o"], "v": cur["v"], "omega": cur["omega"], "ctlr": ctlr,
                   "FE_switch": self._fe_switch, "leg_time_ok": True, "mc_ok": True}
        derived["plant_ok"] = plant_bounds_ok(s, derived)
        e_req = be = fe = math.nan
        if s.mode == "ES_CF":
            fe = forward_energy(cur["W"], cur["meter"])
            e_req, be = energy_requirement(s, ctlr, cur["nav"], cur["meter"], cur["W"])
            derived.update(E_req=e_req, BE=be, FE=fe)
            self._episodes(tick, cur, prev, names)
            es_ok = cur["B"] > e_req
            if cur["B"] <= 0:
                self._flag("es.battery", tick, f"battery exhausted (B={cur['B']:.6g})", B=cur["B"])
            elif not es_ok:
                self._flag("es", tick, f"B={cur['B']:.6g} <= E(p,PS)={e_req:.6g}", B=cur["B"], E=e_req)
        else:
            es_ok = True
        cf_ok = cur["d_o"] > 0
        if not cf_ok:
            self._flag("cf", tick, f"d_o={cur['d_o']:.6g} <= 0", x=p[0], y=p[1])

        nxt = len(self.visits)
        if nxt < len(s.targets):
            t = s.targets[nxt]
            if math.hypot(p[0] - t[0], p[1] - t[1]) <= s.gains.arrival_radius + 1e-9:
                self.visits.append((nxt, tick))
                self.events.append({"tick": tick, "source": "monitor", "event": "target_reached", "data": [nxt]})
                names.append("target_reached")
        if len(self.visits) == len(s.targets):
            self.done = True
        if s.mode == "MC":
            derived["leg_time_ok"] = self._mc_tick(tick, cur, fresh)
            late = tick * s.dt >= s.mc.deadline and not self.done
            derived["mc_ok"] = not late
            if late and "mc" not in self._seen_violation:
                self._seen_violation.add("mc")
                self._flag("mc", tick, f"deadline {s.mc.deadline} s reached with {len(s.targets) - len(self.visits)} "
                           "target(s) unvisited", bound=cur.get("mc_bound"))
        for mon in self.monitors:
            family = self._contract_family.get(mon.contract.name)
            if family is not None and family not in self.checks:
                continue
            before = len(mon.violations)
            mon.observe(derived, tick)
            if len(mon.violations) > before and f"contract.{mon.contract.name}" not in self._seen_violation:
                self._seen_violation.add(f"contract.{mon.contract.name}")
                self._flag(f"contract.{mon.contract.name}", tick, "guarantee failed while assumption held")

        T = cur["T"]
        st = cur["station"]
        self.records.append({
            "tick": tick, "time": tick * s.dt, "x": p[0], "y": p[1], "theta": cur["theta"], "v": cur["v"],
            "omega": cur["omega"], "battery": cur["B"], "meter": cur["meter"], "d_o": cur["d_o"],
            "ir_min": min(cur["ir"]), "station": "" if st is None else f"{st.x:g};{st.y:g}",
            "mp_ctlr": str(ctlr), "nav_mode": str(cur["nav_mode"]), "target_x": T[0], "target_y": T[1],
            "FE": fe, "E_req": e_req, "es_ok": int(es_ok), "cf_ok": int(cf_ok), "visited": len(self.visits),
            "events": ";".join(names)})

    # ---------------------------------------------------------------- ES decisions

    def _mp_decision(self, tick, cur, prev):
        s, k = self.s, self.s.energy
        W_prev = prev["W"]
        fe = forward_energy(W_prev, prev["meter"])
        _, be = energy_requirement(s, prev["ctlr"], prev["nav"], prev["meter"], W_prev)
        rec = {"tick": tick, "B": prev["B"], "BE": be, "FE": fe, "meter": prev["meter"], "before": prev["ctlr"],
               "after": cur["ctlr"], "anchor": None if not W_prev or not W_prev.entries else W_prev.anchor,
               "nav": prev["nav"]}
        if rec["after"] == Mode.BC and rec["before"] == Mode.AC:
            self._fe_switch = fe
            logged = cur["nav"].log.backtrack_energy()
            if logged > (1 + k.eps_BE) * fe + TOL:
                self._flag("es.assumption", tick, f"logged backtrack energy {logged:.9g} exceeds (1+eps)FE {fe:.9g}")
        if self._decisions:
            self._check_case(self._decisions[-1], rec)
        self._decisions.append(rec)

    def _check_case(self, a, b):
        k = self.s.energy
        consumed = b["meter"] - a["meter"]
        tick = b["tick"]
        if consumed > k.E_MP + TOL:
            self._flag("es.case", tick, f"one MP period consumed {consumed:.6g} > E_MP {k.E_MP}")
        recharged = any(a["tick"] - 1 < t <= b["tick"] - 1 for t in self._topups[-8:])
        case = (str(a["before"]), str(a["after"]))
        self.case_counts[f"{case[0]},{case[1]}"] += 1
        B, Bp, BE, BEp = a["B"], b["B"], a["BE"], b["BE"]
        if case == ("BC", "BC"):
            if not recharged and abs(Bp - (B - consumed)) > TOL:
                self._flag("es.case", tick, f"case BC,BC: B'={Bp:.9g} != B - consumed={B - consumed:.9g}")
            both_bt = all(r["nav"].mode == NavMode.BACKTRACK and r["nav"].bt_target is not None for r in (a, b))
            if both_bt and abs(BEp - (BE - consumed)) > TOL:
                self._flag("es.case", tick, f"case BC,BC: BE'={BEp:.9g} != BE - consumed={BE - consumed:.9g}")
            if BEp > max(0.0, BE - consumed) + k.E_180 + TOL and not both_bt and a["nav"].mode != NavMode.GO:
                self._flag("es.case", tick, f"case BC,BC: BE grew from {BE:.9g} to {BEp:.9g}")
            if not Bp > BEp:
                self._flag("es.case", tick, f"case BC,BC: B'={Bp:.9g} <= BE'={BEp:.9g}")
        elif case == ("AC", "AC"):
            if not recharged and Bp < B - k.E_MP - TOL:
                self._flag("es.case", tick, f"case AC,AC: B'={Bp:.9g} < B - E_MP")
            if a["anchor"] == b["anchor"] and BEp > k.BE_MP + BE + TOL:
                self._flag("es.case", tick, f"case AC,AC: BE'={BEp:.9g} > BE_MP + BE={k.BE_MP + BE:.9g}")
            if not Bp > k.E_180 + BEp:
                self._flag("es.case", tick, f"case AC,AC: B'={Bp:.9g} <= E_180 + BE'={k.E_180 + BEp:.9g}")
        elif case == ("AC", "BC"):
            if not recharged and Bp < B - k.E_180 - max(0.0, BE - BEp) - TOL:
                self._flag("es.case", tick, f"case AC,BC: B'={Bp:.9g} below B - E_180 - BE(p,p')")
            if not Bp > BEp:
                self._flag("es.case", tick, f"case AC,BC: B'={Bp:.9g} <= BE'={BEp:.9g}")
        else:
            if mp_dm_switch(B, a["FE"], k):
                self._flag("es.case", tick, "case BC,AC: released while the switching condition still held")

    # ---------------------------------------------------------------- episodes

    def _episodes(self, tick, cur, prev, names):
        s = self.s
        nav = cur["nav"]
        if "mp_switch" in names and cur["ctlr"] == Mode.BC:
            fe = forward_energy(prev["W"], prev["meter"])
            self.episodes.append(Episode(tick, fe, prev["B"], (prev["x"], prev["y"]),
                                         be_logged=nav.log.backtrack_energy()))
        if not self.episodes:
            return
        ep = self.episodes[-1]
        if ep.arrival_tick is not None:
            return
        if ep.bt_start_meter is None and nav.mode == NavMode.BACKTRACK and nav.bt_target is not None:
            ep.bt_start_meter = nav.meter_at_period
        if "recharge" in names:
            ep.recharged = True
        # end of a backtrack period: the rover should sit on the targeted waypoint
        if nav.mode == NavMode.BACKTRACK and nav.bt_target is not None and (tick + 1) % s.s_nav == 0:
            d = math.hypot(cur["x"] - nav.bt_target.x, cur["y"] - nav.bt_target.y)
            ep.max_deviation = max(ep.max_deviation, d)
        if nav.mode == NavMode.DONE:
            ep.bt_end_meter = nav.meter_at_period if ep.bt_start_meter is not None else ep.bt_start_meter
            ep.arrival_tick = tick - 1
            ep.arrival_battery = self._battery_before_recharge(tick)
            ep.off_station = "backtrack_exhausted_off_station" in names

    def _battery_before_recharge(self, tick):
        """Lowest battery during the episode; recharges are counted at their pre-recharge level."""
        ep = self.episodes[-1]
        levels = [b for t, b in self._recharges if ep.switch_tick <= t <= tick]
        levels += [r["battery"] for r in self.records if r["tick"] >= ep.switch_tick]
        return min(levels) if levels else math.nan

    # ---------------------------------------------------------------- MC legs

    def _mc_tick(self, tick, cur, fresh):
        ok = True
        for ev in fresh:
            if ev["source"] != "nav":
                continue
            if ev["event"] == "bc_leg_start":
                leg = ev["data"][0]
                bound = cur["mcnav"].leg_bounds[leg]
                self.legs.append(LegTiming(leg, tick, bound))
            elif ev["event"] == "bc_leg_done":
                leg = ev["data"][0]
                for lt in self.legs:
                    if lt.leg == leg and lt.done_tick is None:
                        lt.done_tick = tick
                        lt.measured = (tick - lt.start_tick) * self.s.dt
                        ms = cur["mc"]
                        goal = ms.targets[ms.base_visited + leg]
                        lt.end_error = math.hypot(self.records[-1]["x"] - goal[0], self.records[-1]["y"] - goal[1])
                        if lt.measured > lt.bound + TOL:
                            ok = False
                            self._flag("mc.leg", tick, f"leg {leg} took {lt.measured:.6g} s > bound {lt.bound:.6g} s")
        if cur["ctlr"] == Mode.BC and cur["nav_mode"] == "BC" and self.sys.grid is not None:
            if not self.sys.grid.point_free((cur["x"], cur["y"])):
                self._flag("mc.grid", tick, f"baseline pose ({cur['x']:.4f}, {cur['y']:.4f}) in a blocked cell")
        return ok


def run_scenario(s: Scenario, ticks: int | None = None, checks=CHECKS, fail_fast: bool = False) -> RunResult:
    """Assemble, simulate until all targets are reached or the tick budget runs out, and check properties."""
    system = assemble(s)
    checker = PropertyChecker(system, checks, fail_fast)
    store = system.store
    checker.start(store)
    late = _late_reads(system.composition)
    limit = s.max_ticks if ticks is None else ticks
    aborted = False
    tick = 0
    clock = SimClock(s.dt, 1)
    try:
        for tick in range(1, limit + 1):
            clock = SimClock(s.dt, tick)
            step(system.composition, store, clock, late)
            checker(tick, store)
            if checker.done:
                break
    except ObserverAbort:
        aborted = True
    return RunResult(s, checker.records, checker.events, checker.violations, tick, checker.done, aborted,
                     checker.episodes, checker.legs, checker.case_counts, checker.visits, checker.switches)
