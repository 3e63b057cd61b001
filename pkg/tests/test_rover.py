import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cbsa.rover import (BoundsError, PlantParams, PowerStation, RoverState, WheelCommand, World, clamp_command,
                        derived_energy_constants, detect_station, integrate_pose, plant_step, power, sense,
                        wheel_speeds, wrap_angle)

from .oracles import unicycle_rk4

P = PlantParams()


def test_wheel_speeds_zero():
    assert wheel_speeds(0.0, 0.0, P) == WheelCommand(0.0, 0.0)


def test_wheel_speeds_straight():
    w = wheel_speeds(0.8, 0.0, P)
    # 2 v / (2 r) = 0.8 / 0.0325
    assert w.omega_l == pytest.approx(24.6154, abs=1e-4)
    assert w.omega_r == pytest.approx(24.6154, abs=1e-4)


def test_wheel_speeds_spin():
    w = wheel_speeds(0.0, 7 * math.pi, P)
    assert w.omega_r == pytest.approx(33.58, abs=5e-3)
    assert w.omega_l == pytest.approx(-33.58, abs=5e-3)


def test_wheel_speeds_bounds():
    with pytest.raises(BoundsError):
        wheel_speeds(1.0, 0.0, P)
    with pytest.raises(BoundsError):
        wheel_speeds(0.1, 8 * math.pi, P)


def test_power_values():
    assert power(WheelCommand(0.0, 0.0), P) == pytest.approx(0.01)
    assert power(WheelCommand(24.6154, 24.6154), P) == pytest.approx(0.15 * 49.2308 + 0.01)
    assert power(WheelCommand(24.6154, 24.6154), P) == pytest.approx(7.3946, abs=1e-4)


@given(st.floats(-100, 100), st.floats(-100, 100))
def test_power_sign_invariant(a, b):
    assert power(WheelCommand(-a, -b), P) == power(WheelCommand(a, b), P)


def test_integrate_straight():
    s = integrate_pose(RoverState(0, 0, 0), 1.0, 0.0, 1.0)
    assert (s.x, s.y, s.theta) == pytest.approx((1.0, 0.0, 0.0))


def test_integrate_quarter_arc():
    s = integrate_pose(RoverState(0, 0, 0), math.pi / 4, math.pi / 2, 1.0)
    assert (s.x, s.y, s.theta) == pytest.approx((0.5, 0.5, math.pi / 2), abs=1e-12)
    ox, oy, oth = unicycle_rk4(0.0, 0.0, 0.0, math.pi / 4, math.pi / 2, 1.0)
    assert (s.x, s.y) == pytest.approx((float(ox), float(oy)), abs=1e-9)


def test_integrate_spin_in_place():
    s0 = RoverState(0.3, -0.2, 0.4)
    s = integrate_pose(s0, 0.0, 7 * math.pi, 1 / 7)
    assert (s.x, s.y) == (s0.x, s0.y)
    assert s.theta == pytest.approx(0.4 + math.pi)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.8), st.floats(-7 * math.pi, 7 * math.pi), st.floats(0, 0.1), st.floats(0, 0.1),
       st.floats(-math.pi, math.pi))
def test_integrate_is_a_flow(v, w, t1, t2, th):
    a = integrate_pose(integrate_pose(RoverState(0, 0, th), v, w, t1), v, w, t2)
    b = integrate_pose(RoverState(0, 0, th), v, w, t1 + t2)
    assert (a.x, a.y, a.theta) == pytest.approx((b.x, b.y, b.theta), abs=1e-12)


@given(st.floats(-50, 50))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_sense_empty_world():
    r = sense(RoverState(0, 0, 0.3), World(), P)
    assert r.ir == (P.sensor_range,) * P.sensor_count
    assert r.d_o == math.inf
    assert r.detected_ps is None


def test_sense_wall_ahead():
    wall = ((0.4, -0.2), (0.6, -0.2), (0.6, 0.2), (0.4, 0.2))
    r = sense(RoverState(0, 0, 0), World((wall,)), P)
    assert r.ir[0] == pytest.approx(0.4, abs=1e-12)
    assert r.ir[1:] == (P.sensor_range,) * (P.sensor_count - 1)
    assert r.d_o == pytest.approx(0.4)


def test_sense_inside_obstacle_negative():
    sq = ((-0.1, -0.1), (0.1, -0.1), (0.1, 0.1), (-0.1, 0.1))
    assert sense(RoverState(0, 0, 0), World((sq,)), P).d_o == pytest.approx(-0.1)


def test_station_detection():
    ps = PowerStation(0.09, 0.0)
    assert detect_station(RoverState(0, 0, 0), World((), (ps,)), P) == ps
    assert detect_station(RoverState(0, 0, 0), World((), (PowerStation(0.11, 0.0),)), P) is None
    # a thin wall between rover and station blocks access
    wall = ((0.04, -0.05), (0.05, -0.05), (0.05, 0.05), (0.04, 0.05))
    assert detect_station(RoverState(0, 0, 0), World((wall,), (ps,)), P) is None


def test_plant_step_stop_drains_idle_power():
    s0 = RoverState(0.1, 0.2, 0.3, battery=50.0)
    r = plant_step(s0, (0.0, 0.0), P, 0.05)
    assert (r.state.x, r.state.y, r.state.theta) == (0.1, 0.2, 0.3)
    assert r.state.battery == pytest.approx(50.0 - 0.01 * 0.05)
    assert r.energy == pytest.approx(0.01 * 0.05)


def test_plant_step_recharges_near_station():
    w = World((), (PowerStation(0.05, 0.0),))
    r = plant_step(RoverState(0, 0, 0, battery=10.0), (0.0, 0.0), P, 0.05, w, recharge=True)
    assert r.state.battery == P.battery_capacity
    assert r.recharged


def test_plant_step_clamps():
    r = plant_step(RoverState(0, 0, 0), (2 * P.v_max, 0.0), P, 0.05)
    assert r.state.v == P.v_max
    assert clamp_command(-1.0, -100.0, P) == (0.0, -P.omega_max)


def test_plant_step_depletion_flag():
    r = plant_step(RoverState(0, 0, 0, battery=1e-4), (0.8, 0.0), P, 0.05)
    assert r.depleted


def test_derived_energy_constants_within_configured():
    d = derived_energy_constants(P, 0.2, 0.1)
    # brute-force the worst power over the admissible command box
    vs, ws = np.meshgrid(np.linspace(0, P.v_max, 81), np.linspace(-P.omega_max, P.omega_max, 161))
    p_max = max(power(wheel_speeds(v, w, P), P) for v, w in zip(vs.ravel(), ws.ravel()))
    assert d["E_MP"] == pytest.approx(p_max * 0.2)
    assert d["E_MP"] <= 2.032
    assert d["E_180"] <= 1.524
    assert d["BE_MP"] == d["E_MP"]


def test_params_require_blind_spots():
    assert not P.problems()
    assert any("blind_spots" in p for p in replace(P, sensor_fov=math.pi / 4).problems())
    assert any("wheel_radius" in p for p in replace(P, wheel_radius=0.0).problems())
