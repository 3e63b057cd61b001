"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL  <detail>`` line (visible
without ``-s``) and asserts at the stated tolerance.
"""

import functools
import math
import time

import numpy as np
import pytest

from cbsa.completion import astar_path, GridMap
from cbsa.generate import random_es_scenario, random_mc_scenario
from cbsa.navigation import solve_step
from cbsa.properties import run_scenario
from cbsa.rover import RoverState, integrate_pose
from cbsa.scenario import load_scenario, shipped
from cbsa.sync import ValueStore, compose, run
from cbsa.system import discharge_report

from .oracles import dijkstra, unicycle_rk4
from .test_sync import _build, counter, compose_all

N_ES = 220
N_MC = 50
N_TIGHT = 20


@pytest.fixture()
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


@functools.lru_cache(maxsize=None)
def es_runs():
    t0 = time.perf_counter()
    runs = [run_scenario(random_es_scenario(seed)) for seed in range(N_ES)]
    runs.append(run_scenario(load_scenario(shipped("paper_fig3"))))
    return runs, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def mc_runs():
    t0 = time.perf_counter()
    feasible = [run_scenario(random_mc_scenario(seed)) for seed in range(N_MC)]
    tight = [run_scenario(random_mc_scenario(1000 + seed, tight=True)) for seed in range(N_TIGHT)]
    feasible.append(run_scenario(load_scenario(shipped("mc_example"))))
    return feasible, tight, time.perf_counter() - t0


def test_criterion_1_two_target_reproduction(report):
    s = load_scenario(shipped("paper_fig3"))
    t0 = time.perf_counter()
    r = run_scenario(s)
    elapsed = time.perf_counter() - t0
    visits = dict(r.visits)
    rech = [e for e in r.events if e["event"] == "recharge"]
    switch_bc = [t for t, a, b in r.switches if b == "BC"]
    ep = r.episodes[0] if r.episodes else None
    checks = {
        "T1 reached": 0 in visits,
        "no recharge before T1": 0 in visits and all(e["tick"] > visits[0] for e in rech),
        "switch en route T1->T2": bool(switch_bc) and 0 in visits and 1 in visits
        and visits[0] < switch_bc[0] < visits[1],
        "backtrack to PS2": bool(rech) and rech[0]["data"][1] == [0.8, -0.5],
        "arrival battery in (0, 5]": ep is not None and ep.arrival_battery is not None
        and 0 < ep.arrival_battery <= 5,
        "T2 after recharge": bool(rech) and 1 in visits and visits[1] > rech[0]["tick"],
        "ES and CF hold": r.ok,
        "runtime < 10 s": elapsed < 10,
    }
    ok = all(checks.values())
    detail = (f"switch tick {switch_bc[:1]} B={ep.battery_at_switch:.2f} at ({ep.switch_pos[0]:.3f}, "
              f"{ep.switch_pos[1]:.3f}), arrival B={ep.arrival_battery:.2f}, {elapsed:.2f} s"
              if ep else "no switch")
    failed = [k for k, v in checks.items() if not v]
    report(1, ok, detail + (f" failed: {failed}" if failed else ""))
    assert ok, failed


def test_criterion_2_energy_safety_suite(report):
    runs, secs = es_runs()
    bad = [(r.scenario.name, v.tick, v.message) for r in runs for v in r.violations
           if v.prop in ("es", "es.battery")]
    min_margin = min(rec["battery"] - rec["E_req"] for r in runs for rec in r.records)
    switched = sum(bool(r.episodes) for r in runs)
    ok = len(runs) >= 200 and not bad and min_margin > 0
    report(2, ok, f"{len(runs)} runs ({switched} with a switch), min B - E(p,PS) = {min_margin:.4f}, "
                  f"violations={len(bad)}, {secs:.1f} s")
    assert ok, bad[:5]


def test_criterion_3_collision_freedom_suite(report):
    runs, _ = es_runs()
    bad = [(r.scenario.name, v.tick) for r in runs for v in r.violations if v.prop == "cf"]
    min_do = min(rec["d_o"] for r in runs for rec in r.records)
    with_obstacles = sum(bool(r.scenario.obstacles) for r in runs)
    ok = not bad and min_do > 0
    report(3, ok, f"{len(runs)} runs ({with_obstacles} with obstacles), min d_o = {min_do:.4f}, violations={len(bad)}")
    assert ok, bad[:5]


def test_criterion_4_backtrack_equals_forward(report):
    runs, _ = es_runs()
    worst_rel, worst_dev, n = 0.0, 0.0, 0
    for r in runs:
        assert r.scenario.energy.eps_BE == 0.0
        for ep in r.episodes:
            if ep.be_measured is None:
                continue
            n += 1
            worst_rel = max(worst_rel, abs(ep.be_measured - ep.fe_at_switch) / max(ep.fe_at_switch, 1e-12))
            worst_dev = max(worst_dev, ep.max_deviation)
    ok = n > 0 and worst_rel <= 1e-6 and worst_dev <= 1e-6
    report(4, ok, f"{n} completed backtracks, max |BE-FE|/FE = {worst_rel:.2e}, max deviation = {worst_dev:.2e} m")
    assert ok


def test_criterion_5_least_squares_round_trip(report):
    rng = np.random.default_rng(5)
    t = 0.1
    v = rng.uniform(0, 0.8, 10_000)
    w = rng.uniform(-7 * math.pi, 7 * math.pi, 10_000)
    th = rng.uniform(-math.pi, math.pi, 10_000)
    worst = 0.0
    for vi, wi, ti in zip(v, w, th):
        e = integrate_pose(RoverState(0.0, 0.0, ti), vi, wi, t)
        rv, rw = solve_step((0.0, 0.0, ti), (e.x, e.y, e.theta), t)
        worst = max(worst, abs(rv - vi), abs(rw - wi))

    grid = np.linspace(-0.2, 1.2, 10_000)
    beaten = 0
    for k in range(1_000):
        e = integrate_pose(RoverState(0.0, 0.0, th[k]), v[k], w[k], t)
        off = rng.normal(size=2) * 1e-3
        b = (e.x + off[0], e.y + off[1], e.theta)
        rv, rw = solve_step((0.0, 0.0, th[k]), b, t)
        # residual of the position equations in the (v/w)(sin - sin) form
        sx = (math.sin(th[k] + rw * t) - math.sin(th[k])) / rw
        sy = (math.cos(th[k]) - math.cos(th[k] + rw * t)) / rw
        res = (rv * sx - b[0]) ** 2 + (rv * sy - b[1]) ** 2
        gres = (grid * sx - b[0]) ** 2 + (grid * sy - b[1]) ** 2
        beaten += res > gres.min() + 1e-18
    ok = worst <= 1e-9 and beaten == 0
    report(5, ok, f"10^4 round trips max error {worst:.2e}; 10^3 perturbed, grid beats solver in {beaten}")
    assert ok


def test_criterion_6_kinematics_oracle(report):
    rng = np.random.default_rng(6)
    n = 1_000
    v = rng.uniform(0, 0.8, n)
    w = rng.uniform(-7 * math.pi, 7 * math.pi, n)
    t = rng.uniform(0, 0.2, n)
    th = rng.uniform(-math.pi, math.pi, n)
    ox, oy, _ = unicycle_rk4(np.zeros(n), np.zeros(n), th, v, w, t)
    got = np.array([(lambda s: (s.x, s.y))(integrate_pose(RoverState(0, 0, a), b, c, d))
                    for a, b, c, d in zip(th, v, w, t)])
    err = np.hypot(got[:, 0] - ox, got[:, 1] - oy).max()
    ok = err <= 1e-6
    report(6, ok, f"{n} random arcs, max position error vs 1e-4-step integration {err:.2e} m")
    assert ok


def test_criterion_7_scheduler_semantics(report):
    from cbsa.sync import Component, RateEntry

    trace = run(compose_all(counter("fast", "f", 1), counter("slow", "s", 2)), ValueStore({"f": 0, "s": 0}), 4)
    counters_ok = [r["f"] for r in trace] == [1, 2, 3, 4] and [r["s"] for r in trace] == [0, 1, 1, 2]

    m1 = Component("M1", {"n", "log"}, {"b"}, {"a"},
                   [RateEntry(lambda v, t: {"n": v["n"] + 1, "log": v["log"] + (v["b"],)},
                              lambda v, t: {"a": v["n"]}, 1)])
    m2 = Component("M2", set(), {"a"}, {"b"}, [RateEntry(None, lambda v, t: {"b": v["a"]}, 1)])
    echo = run(compose(m1, m2), ValueStore({"n": 0, "log": (), "a": 0, "b": -1}), 4)
    echo_ok = echo[-1]["log"] == (-1, 1, 2, 3) and [r["b"] for r in echo] == [1, 2, 3, 4]

    rng = np.random.default_rng(7)
    graph_ok = 0
    for _ in range(100):
        n = int(rng.integers(2, 6))
        periods = [int(p) for p in rng.integers(1, 6, n)]
        reads = [set(int(j) for j in rng.choice([j for j in range(n) if j != k], size=min(2, n - 1), replace=False)
                     if rng.random() < 0.7) for k in range(n)]
        comp = _build(periods, reads)
        init = {**{f"s{k}": 0 for k in range(n)}, **{f"y{k}": 0 for k in range(n)}}
        tr = run(comp, ValueStore(dict(init)), 30)
        good, prev = True, init
        for tick, row in enumerate(tr, 1):
            for k, p in enumerate(periods):
                changed = row[f"s{k}"] != prev[f"s{k}"] or row[f"y{k}"] != prev[f"y{k}"]
                if tick % p and changed:
                    good = False
                if tick % p == 0 and row[f"s{k}"] <= prev[f"s{k}"]:
                    good = False
            prev = row
        graph_ok += good
    ok = counters_ok and echo_ok and graph_ok == 100
    report(7, ok, f"counter trace {'ok' if counters_ok else 'MISMATCH'}, echo trace {'ok' if echo_ok else 'MISMATCH'}, "
                  f"{graph_ok}/100 random graphs satisfy containment and retention")
    assert ok


def test_criterion_8_discharge(report):
    from dataclasses import replace

    es = load_scenario(shipped("paper_fig3"))
    mc = load_scenario(shipped("mc_example"))
    base_ok = discharge_report(es).passed and discharge_report(mc).passed
    m1 = discharge_report(replace(es, contract_mutations=("Nav:A_BE",)))
    m2 = discharge_report(replace(es, contract_mutations=("Plant:A_P",)))
    mut_ok = (not m1.passed and m1.uncovered == [("MP", "A_BE")]
              and not m2.passed and m2.uncovered == [("Nav", "A_P")])
    ok = base_ok and mut_ok
    report(8, ok, f"ES and MC wiring {'pass' if base_ok else 'FAIL'}; mutations report "
                  f"{m1.uncovered} and {m2.uncovered}")
    assert ok


def test_criterion_9_case_checks(report):
    runs, _ = es_runs()
    totals = {}
    bad = []
    for r in runs:
        for k, v in r.case_counts.items():
            totals[k] = totals.get(k, 0) + v
        bad += [(r.scenario.name, v.tick, v.message) for v in r.violations
                if v.prop in ("es.case", "es.assumption") or v.prop.startswith("contract.")]
    ok = not bad and totals.get("AC,AC", 0) > 0 and totals.get("AC,BC", 0) > 0 and totals.get("BC,BC", 0) > 0
    report(9, ok, f"consecutive MP decisions checked per case {totals}, violations={len(bad)}")
    assert ok, bad[:5]


def test_criterion_10_mission_completion(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    astar_ok = 0
    for _ in range(100):
        nx, ny = int(rng.integers(8, 30)), int(rng.integers(8, 30))
        occ = rng.random((nx, ny)) < rng.uniform(0.05, 0.35)
        s, g = (0, 0), (nx - 1, ny - 1)
        occ[s] = occ[g] = False
        m = GridMap(1.0, (0.0, 0.0), occ)
        want = dijkstra(occ, s, g)
        try:
            _, got = astar_path(m, m.center(s), m.center(g))
        except LookupError:
            got = math.inf
        astar_ok += (math.isinf(want) and math.isinf(got)) or abs(got - want) <= 1e-9

    feasible, tight, secs = mc_runs()
    legs = [lt for r in feasible + tight for lt in r.legs if lt.measured is not None]
    legs_ok = all(lt.measured <= lt.bound + 1e-9 for lt in legs)
    feas_ok = sum(r.completed and r.holds("mc") and r.ticks * r.scenario.dt < r.scenario.mc.deadline
                  for r in feasible)
    tight_ok = sum(bool(r.switches) and r.completed and r.holds("mc")
                   and r.ticks * r.scenario.dt < r.scenario.mc.deadline for r in tight)
    other = [(r.scenario.name, v.prop, v.message) for r in feasible + tight for v in r.violations]
    total = time.perf_counter() - t0
    ok = (astar_ok == 100 and legs_ok and feas_ok == len(feasible) and tight_ok == len(tight)
          and not other and total < 300)
    worst = max((lt.measured - lt.bound for lt in legs), default=float("nan"))
    report(10, ok, f"A* = Dijkstra on {astar_ok}/100 grids; {len(legs)} BC legs, max measured - bound = {worst:.3f} s; "
                   f"{feas_ok}/{len(feasible)} feasible and {tight_ok}/{len(tight)} tight missions on time; "
                   f"{total:.1f} s")
    assert ok, other[:5]
