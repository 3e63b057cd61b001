"""Assume-guarantee contracts, Simplex instances and static discharge.

Contracts carry both executable predicates (evaluated by runtime monitors)
and symbolic tokens.  The static checker matches assumption tokens against
guarantee tokens of other contracts, which is the implementable analogue of
the asymmetric rule: ``M1 <p> q`` and ``M2 <true> p`` give ``M1 || M2 <true> q``.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

from .sync import MissingValue

TRUE = "true"

Predicate = Callable[[Mapping], bool]


class Mode(str, Enum):
    AC = "AC"
    BC = "BC"

    def __str__(self):
        return self.value


def always(_view) -> bool:
    return True


@dataclass(frozen=True)
class Contract:
    name: str
    inputs: frozenset[str]
    outputs: frozenset[str]
    assumption: Predicate = always
    guarantee: Predicate = always
    assumption_tokens: frozenset[str] = frozenset({TRUE})
    guarantee_tokens: frozenset[str] = frozenset()

    def without_guarantee(self, token: str) -> Contract:
        return replace(self, guarantee_tokens=self.guarantee_tokens - {token})


@dataclass(frozen=True)
class Verdict:
    assumption_met: bool
    guarantee_met: bool


@dataclass(frozen=True)
class ContractViolation:
    contract: str
    tick: int
    period_start: int


class ContractMonitor:
    """Per-period monitor for one contract.

    A violation is recorded at the first tick where the guarantee fails
    while the assumption held at the start of the current period.
    """

    def __init__(self, contract: Contract, period: int = 1):
        self.contract = contract
        self.period = period
        self.period_start = 0
        self._armed = True
        self.violations: list[ContractViolation] = []

    def observe(self, view: Mapping, tick: int) -> Verdict:
        verdict = monitor_tick(self.contract, view, tick)
        if tick % self.period == 0:
            self.period_start = tick
            self._armed = verdict.assumption_met
        if self._armed and not verdict.guarantee_met:
            self.violations.append(ContractViolation(self.contract.name, tick, self.period_start))
        return verdict


def monitor_tick(c: Contract, view: Mapping, tick: int = 0) -> Verdict:
    """Evaluate assumption and guarantee of ``c`` on the current values."""
    try:
        return Verdict(bool(c.assumption(view)), bool(c.guarantee(view)))
    except KeyError as exc:
        raise MissingValue(str(exc)) from None


def implies(antecedent: Predicate, consequent: Predicate) -> Predicate:
    """Vacuous implication; ``consequent`` is not evaluated when the antecedent fails."""

    def pred(view):
        return (not antecedent(view)) or consequent(view)

    return pred


@dataclass(frozen=True)
class AGTriple:
    """``component : <assumption> period <guarantee>``."""

    component: str
    period: int
    assumption: Predicate
    guarantee: Predicate

    def holds_on(self, trace, start_tick: int = 1) -> bool:
        """Check the triple on a list of per-tick snapshots starting at ``start_tick``."""
        armed = False
        for offset, snap in enumerate(trace):
            tick = start_tick + offset
            if tick % self.period == 0:
                armed = bool(self.assumption(snap))
            if armed and not self.guarantee(snap):
                return False
        return True


@dataclass
class SimplexInstance:
    """AC/BC pair guarded by a decision module.

    ``release`` (optional) is the condition under which a latched BC hands
    control back to the AC; without it BC is permanent once entered.
    """

    name: str
    advanced: object
    baseline: object
    dm: Predicate
    period: int = 1
    active: Mode = Mode.AC
    switch_out: str | None = None
    switch_in: str | None = None
    release: Predicate | None = None
    history: list = field(default_factory=list)


def dm_decide(s: SimplexInstance, view: Mapping, tick: int) -> Mode:
    """Pick the active controller for the period starting at ``tick``."""
    if tick % s.period:
        raise ValueError(f"{s.name}: tick {tick} is not a decision tick (period {s.period})")
    upstream = view.get(s.switch_in) if s.switch_in else None
    if upstream == Mode.BC:
        new = Mode.BC
    elif s.dm(view):
        new = Mode.BC
    elif s.active == Mode.BC and not (s.release is not None and s.release(view)):
        new = Mode.BC
    else:
        new = Mode.AC
    if new != s.active:
        s.history.append((tick, s.active, new))
    s.active = new
    return new


@dataclass(frozen=True)
class DischargeEdge:
    guarantor: str
    assumer: str
    tokens: frozenset[str]


@dataclass
class DischargeGraph:
    contracts: list[Contract]
    # guarantor -> assumer edges that cross a delayed feedback path
    delayed_edges: frozenset[tuple[str, str]] = frozenset()

    def edges(self) -> list[DischargeEdge]:
        out = []
        for a in self.contracts:
            for g in self.contracts:
                if g.name == a.name:
                    continue
                shared = (a.assumption_tokens - {TRUE}) & g.guarantee_tokens
                if shared:
                    out.append(DischargeEdge(g.name, a.name, frozenset(shared)))
        return out


@dataclass
class DischargeReport:
    passed: bool
    uncovered: list[tuple[str, str]]
    ambiguous: list[tuple[str, str, tuple[str, ...]]]
    unused: list[tuple[str, str]]
    cycle: list[str] | None

    def __str__(self):
        if self.passed:
            return "discharge: PASS"
        lines = ["discharge: FAIL"]
        lines += [f"  uncovered assumption {tok!r} of {who}" for who, tok in self.uncovered]
        lines += [f"  assumption {tok!r} of {who} covered by several: {', '.join(by)}"
                  for who, tok, by in self.ambiguous]
        if self.cycle:
            lines.append("  cyclic dependency: " + " -> ".join(self.cycle))
        return "\n".join(lines)


def check_discharge(g: DischargeGraph) -> DischargeReport:
    """Every non-trivial assumption token must be guaranteed by exactly one other contract."""
    uncovered, ambiguous = [], []
    used = set()
    for a in g.contracts:
        for tok in sorted(a.assumption_tokens - {TRUE}):
            providers = tuple(c.name for c in g.contracts if c.name != a.name and tok in c.guarantee_tokens)
            if not providers:
                uncovered.append((a.name, tok))
            elif len(providers) > 1:
                ambiguous.append((a.name, tok, providers))
            else:
                used.add((providers[0], tok))
    unused = [(c.name, t) for c in g.contracts for t in sorted(c.guarantee_tokens) if (c.name, t) not in used]
    cycle = _find_cycle(g)
    return DischargeReport(not uncovered and not ambiguous and cycle is None, uncovered, ambiguous, unused, cycle)


def _find_cycle(g: DischargeGraph):
    adj: dict[str, list[str]] = {c.name: [] for c in g.contracts}
    for e in g.edges():
        if (e.guarantor, e.assumer) not in g.delayed_edges:
            adj[e.guarantor].append(e.assumer)
    color = dict.fromkeys(adj, 0)
    stack: list[str] = []

    def visit(n):
        color[n] = 1
        stack.append(n)
        for m in adj[n]:
            if color[m] == 1:
                return stack[stack.index(m):] + [m]
            if color[m] == 0:
                found = visit(m)
                if found:
                    return found
        stack.pop()
        color[n] = 2
        return None

    for n in adj:
        if color[n] == 0:
            found = visit(n)
            if found:
                return found
    return None
