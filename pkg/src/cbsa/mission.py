"""Mission Planning for the energy-safety case study."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .assurance import Mode
from .rover import PowerStation


@dataclass(frozen=True)
class EnergyConstants:
    E_MP: float = 2.032
    E_180: float = 1.524
    BE_MP: float = 2.032
    eps_BE: float = 0.0

    def problems(self) -> list[str]:
        out = [f"energy.{k} must be >= 0" for k, v in vars(self).items() if v < 0]
        if not math.isclose(self.BE_MP, self.E_MP):
            out.append("energy.BE_MP must equal energy.E_MP")
        return out


@dataclass(frozen=True)
class MissionState:
    targets: tuple[tuple[float, float], ...]
    next_index: int = 0
    T: tuple[float, float] | None = None
    ctlr: Mode = Mode.AC
    last_ps: PowerStation | None = None
    FE: float = 0.0
    complete: bool = False

    def __post_init__(self):
        if self.T is None and self.targets:
            object.__setattr__(self, "T", tuple(self.targets[0]))


def choose_next_target(ms: MissionState, p, arrival_radius: float = 0.02) -> tuple[MissionState, tuple]:
    """Advance to the next target once the rover is within ``arrival_radius`` of the current one."""
    if ms.complete or ms.T is None:
        return ms, ()
    target = ms.targets[ms.next_index] if ms.next_index < len(ms.targets) else ms.T
    if math.hypot(p[0] - target[0], p[1] - target[1]) > arrival_radius:
        return replace(ms, T=tuple(target)), ()
    events = [("target_visited", ms.next_index)]
    nxt = ms.next_index + 1
    if nxt >= len(ms.targets):
        events.append(("mission_complete", nxt))
        return replace(ms, next_index=nxt, complete=True, T=tuple(target)), tuple(events)
    return replace(ms, next_index=nxt, T=tuple(ms.targets[nxt])), tuple(events)


def recharge_controller(ms: MissionState) -> MissionState:
    if ms.last_ps is None:
        return ms
    return replace(ms, T=ms.last_ps.location)


def backtrack_energy_bound(FE: float, eps_BE: float) -> float:
    return (1.0 + eps_BE) * FE


def switching_threshold(FE: float, k: EnergyConstants) -> float:
    return k.E_MP + k.E_180 + k.BE_MP + backtrack_energy_bound(FE, k.eps_BE)


def mp_dm_switch(B: float, FE: float, k: EnergyConstants) -> bool:
    """True when the battery no longer covers one more period plus the way back."""
    return B <= switching_threshold(FE, k)


def forward_energy_accumulate(ms: MissionState, consumed: float, station: PowerStation | None = None) -> MissionState:
    if station is not None:
        return replace(ms, FE=0.0, last_ps=station)
    return replace(ms, FE=ms.FE + consumed)


def es_energy_requirement(ctlr: Mode, be_estimate: float, E_180: float) -> float:
    return E_180 + be_estimate if ctlr == Mode.AC else be_estimate
