"""Multi-rate synchronous components and their composition.

A component owns state, input and output variables plus a schedule of
``(next_state, output, period)`` entries.  On global tick ``i`` every entry
whose period divides ``i`` fires: ``next_state`` sees the previous state and
the current inputs, ``output`` sees the freshly updated state.  Variables
nobody writes keep their previous value.

Composition is ordered.  ``compose(a, b)`` executes ``a`` before ``b``; when
the two feed each other, the values ``b`` writes back into ``a`` are read
with a one-tick delay.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable


class CompositionError(ValueError):
    pass


class MissingValue(KeyError):
    pass


class ObserverAbort(RuntimeError):
    """Raised by an observer to halt :func:`run`; ``trace`` holds the partial run."""

    def __init__(self, message, tick=None, trace=None):
        super().__init__(message)
        self.tick = tick
        self.trace = trace


class VarKind(Enum):
    STATE = "state"
    INPUT = "input"
    OUTPUT = "output"


@dataclass(frozen=True)
class VarId:
    name: str
    kind: VarKind


Assign = Callable[[Mapping, int], Mapping[str, Any]]


@dataclass(frozen=True)
class RateEntry:
    next_state: Assign | None
    output: Assign | None
    period: int

    def __post_init__(self):
        if int(self.period) != self.period or self.period < 1:
            raise ValueError(f"period must be a positive integer, got {self.period!r}")


@dataclass(frozen=True)
class Component:
    name: str
    state_vars: frozenset[str]
    input_vars: frozenset[str]
    output_vars: frozenset[str]
    schedule: tuple[RateEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "state_vars", frozenset(self.state_vars))
        object.__setattr__(self, "input_vars", frozenset(self.input_vars))
        object.__setattr__(self, "output_vars", frozenset(self.output_vars))
        object.__setattr__(self, "schedule", tuple(self.schedule))
        overlap = self.input_vars & self.output_vars
        if overlap:
            raise CompositionError(f"{self.name}: inputs and outputs overlap on {sorted(overlap)}")

    @property
    def parts(self) -> tuple[Component, ...]:
        return (self,)

    @property
    def periods(self) -> tuple[int, ...]:
        return tuple(e.period for e in self.schedule)

    def var_ids(self) -> set[VarId]:
        return (
            {VarId(n, VarKind.STATE) for n in self.state_vars}
            | {VarId(n, VarKind.INPUT) for n in self.input_vars}
            | {VarId(n, VarKind.OUTPUT) for n in self.output_vars}
        )


@dataclass(frozen=True)
class Composition:
    parts: tuple[Component, ...]
    state_vars: frozenset[str]
    input_vars: frozenset[str]
    output_vars: frozenset[str]
    hidden: frozenset[str]
    delayed: frozenset[str]

    @property
    def name(self) -> str:
        return " || ".join(p.name for p in self.parts)

    @property
    def schedule(self) -> tuple[RateEntry, ...]:
        return tuple(e for p in self.parts for e in p.schedule)

    def writer_index(self) -> dict[str, int]:
        out = {}
        for k, part in enumerate(self.parts):
            for v in part.state_vars | part.output_vars:
                out.setdefault(v, k)
        return out


def _owned(c) -> frozenset[str]:
    # state vars of a composition already include hidden connected inputs,
    # which the parts read rather than own
    own = set()
    for p in c.parts:
        own |= p.state_vars | p.output_vars
    return frozenset(own)


def compose(a: Component | Composition, b: Component | Composition) -> Composition:
    """Ordered composition ``a || b``; ``a`` executes first within a tick."""
    xa, xb = _owned(a) - a.output_vars, _owned(b) - b.output_vars
    if xa & xb:
        raise CompositionError(f"state variables overlap: {sorted(xa & xb)}")
    if a.output_vars & b.output_vars:
        raise CompositionError(f"output variables overlap: {sorted(a.output_vars & b.output_vars)}")
    ya, yb, ua, ub = a.output_vars, b.output_vars, a.input_vars, b.input_vars
    forward = ya & ub
    backward = yb & ua
    hidden = forward | backward
    delayed = set(getattr(a, "delayed", ())) | set(getattr(b, "delayed", ()))
    if forward and backward:
        delayed |= backward
    return Composition(
        parts=a.parts + b.parts,
        state_vars=frozenset(a.state_vars | b.state_vars | hidden),
        input_vars=frozenset((ua | ub) - (ya | yb)),
        output_vars=frozenset(ya | yb),
        hidden=frozenset(set(getattr(a, "hidden", ())) | set(getattr(b, "hidden", ())) | hidden),
        delayed=frozenset(delayed),
    )


def compose_all(*components) -> Composition:
    """Left fold of :func:`compose`."""
    if not components:
        raise CompositionError("nothing to compose")
    acc = components[0]
    if isinstance(acc, Component):
        acc = Composition(
            parts=(acc,), state_vars=acc.state_vars, input_vars=acc.input_vars,
            output_vars=acc.output_vars, hidden=frozenset(), delayed=frozenset(),
        )
    for c in components[1:]:
        acc = compose(acc, c)
    return acc


@dataclass(frozen=True)
class SimClock:
    dt: float
    tick: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.tick < 0:
            raise ValueError("tick must be non-negative")

    def advance(self) -> SimClock:
        return SimClock(self.dt, self.tick + 1)

    @property
    def time(self) -> float:
        return self.tick * self.dt


@dataclass
class ValueStore:
    current: dict[str, Any] = field(default_factory=dict)
    previous: dict[str, Any] = field(default_factory=dict)

    def copy(self) -> ValueStore:
        return ValueStore(dict(self.current), dict(self.previous))

    def __getitem__(self, name):
        try:
            return self.current[name]
        except KeyError:
            raise MissingValue(name) from None


class _View(Mapping):
    """Read-only window over a store; selected names resolve to last tick."""

    __slots__ = ("_cur", "_prev", "_late", "_readable")

    def __init__(self, cur, prev, late, readable=None):
        self._cur = cur
        self._prev = prev
        self._late = late
        self._readable = readable

    def __getitem__(self, name):
        if self._readable is not None and name not in self._readable:
            raise CompositionError(f"read of undeclared variable {name!r}")
        src = self._prev if name in self._late else self._cur
        try:
            return src[name]
        except KeyError:
            raise MissingValue(name) from None

    def __iter__(self):
        return iter(self._cur)

    def __len__(self):
        return len(self._cur)


def _late_reads(comp) -> list[frozenset[str]]:
    delayed = getattr(comp, "delayed", frozenset())
    writer = comp.writer_index() if isinstance(comp, Composition) else {}
    late = []
    for k, part in enumerate(comp.parts):
        late.append(frozenset(v for v in part.input_vars & delayed if writer.get(v, -1) > k))
    return late


def _apply(part, fn, view, tick, allowed, store):
    if fn is None:
        return
    for k, val in fn(view, tick).items():
        if k not in allowed:
            raise CompositionError(f"{part.name} wrote undeclared variable {k!r}")
        store.current[k] = val


def step(comp, store: ValueStore, clock: SimClock, _late=None) -> ValueStore:
    """Advance ``store`` by one tick in place and return it."""
    if clock.tick < 1:
        raise ValueError("step requires clock.tick >= 1")
    late = _late if _late is not None else _late_reads(comp)
    store.previous = dict(store.current)
    tick = clock.tick
    for k, part in enumerate(comp.parts):
        writable = part.state_vars | part.output_vars
        readable = writable | part.input_vars
        for entry in part.schedule:
            if tick % entry.period:
                continue
            view = _View(store.current, store.previous, late[k], readable)
            _apply(part, entry.next_state, view, tick, writable, store)
            _apply(part, entry.output, view, tick, writable, store)
    return store


def initialize(comp, store: ValueStore, dt: float) -> ValueStore:
    """Fire every entry once at tick 0 (all periods divide 0), reading initial values."""
    store.previous = dict(store.current)
    late = _late_reads(comp)
    for k, part in enumerate(comp.parts):
        writable = part.state_vars | part.output_vars
        readable = writable | part.input_vars
        for entry in part.schedule:
            view = _View(store.current, store.previous, late[k], readable)
            _apply(part, entry.next_state, view, 0, writable, store)
            _apply(part, entry.output, view, 0, writable, store)
    return store


def run(comp, store: ValueStore, ticks: int, observers: Iterable[Callable] = (),
        dt: float = 1.0, start_tick: int = 1, keep_trace: bool = True) -> list[dict]:
    """Step ``ticks`` times from ``start_tick``; returns one snapshot per tick.

    Observers are called as ``obs(tick, store)`` after each tick and may raise
    :class:`ObserverAbort`, which carries the partial trace.
    """
    if ticks < 1:
        raise ValueError("ticks must be >= 1")
    observers = list(observers)
    late = _late_reads(comp)
    trace = []
    clock = SimClock(dt, start_tick)
    for _ in range(ticks):
        step(comp, store, clock, late)
        if keep_trace:
            trace.append(dict(store.current))
        for obs in observers:
            try:
                obs(clock.tick, store)
            except ObserverAbort as exc:
                exc.tick = clock.tick if exc.tick is None else exc.tick
                exc.trace = trace
                raise
        clock = clock.advance()
    return trace
