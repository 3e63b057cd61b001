import pytest

from cbsa.assurance import Mode
from cbsa.mission import (EnergyConstants, MissionState, backtrack_energy_bound, choose_next_target,
                          es_energy_requirement, forward_energy_accumulate, mp_dm_switch, recharge_controller,
                          switching_threshold)
from cbsa.rover import PlantParams, PowerStation, RoverState, plant_step, power, wheel_speeds

T1, T2 = (1.2, 0.0), (0.3, 1.2)
PS2 = PowerStation(0.8, -0.5)
K = EnergyConstants()


def test_choose_next_target_advances():
    ms = MissionState((T1, T2))
    ms, ev = choose_next_target(ms, T1)
    assert ms.T == T2 and ("target_visited", 0) in ev


def test_choose_next_target_far_unchanged():
    ms = MissionState((T1, T2))
    assert choose_next_target(ms, (0.0, 0.0)) == (ms, ())


def test_choose_next_target_exhausted():
    ms = MissionState((T1,))
    ms, ev = choose_next_target(ms, T1)
    assert ms.complete and ms.T == T1 and ("mission_complete", 1) in ev
    assert choose_next_target(ms, T1) == (ms, ())


def test_recharge_controller_targets_last_station():
    ms = MissionState((T1, T2), last_ps=PS2)
    once = recharge_controller(ms)
    assert once.T == (0.8, -0.5)
    assert recharge_controller(once) == once


def test_backtrack_energy_bound():
    assert backtrack_energy_bound(0.0, 0.0) == 0.0
    assert backtrack_energy_bound(10.0, 0.0) == 10.0
    assert backtrack_energy_bound(10.0, 0.1) == pytest.approx(11.0)


def test_switching_threshold_values():
    assert switching_threshold(0.0, K) == pytest.approx(5.588)
    assert not mp_dm_switch(100.0, 0.0, K)
    assert mp_dm_switch(5.588, 0.0, K)
    assert not mp_dm_switch(5.588 + 1e-9, 0.0, K)


def test_forward_energy_constant_power():
    P = PlantParams()
    ms = MissionState((T1,))
    s = RoverState(0, 0, 0)
    for _ in range(40):
        r = plant_step(s, (0.4, 1.0), P, 0.05)
        ms = forward_energy_accumulate(ms, r.energy)
        s = r.state
    assert ms.FE == pytest.approx(power(wheel_speeds(0.4, 1.0, P), P) * 2.0)
    ms = forward_energy_accumulate(ms, 0.0, PS2)
    assert ms.FE == 0.0 and ms.last_ps == PS2


def test_energy_requirement_cases():
    assert es_energy_requirement(Mode.BC, 3.0, 1.524) == 3.0
    assert es_energy_requirement(Mode.AC, 3.0, 1.524) == pytest.approx(4.524)
    assert es_energy_requirement(Mode.AC, 0.0, 1.524) == 1.524


def test_energy_constants_problems():
    assert not K.problems()
    assert EnergyConstants(BE_MP=1.0).problems()
    assert EnergyConstants(E_MP=-1.0, BE_MP=-1.0).problems()
