"""Sequential discrete-event core.

Events are ordered by ``(time, kind, sequence)``. At equal timestamps
departures run first, then scheduling epochs, then arrivals, so a slot
freed at ``t`` is visible to an arrival at the same ``t``. ``time`` may be
a float (seconds) or an int (clock cycles); only ordering is used.
"""

from __future__ import annotations

import hashlib
import heapq
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Callable, NamedTuple, Protocol


class Kind(IntEnum):
    DEPARTURE = 0
    SCHEDULE_EPOCH = 1
    ARRIVAL = 2


class Event(NamedTuple):
    time: Any
    kind: Kind
    seq: int
    payload: Any = None


_new_event = tuple.__new__


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class StopCondition:
    """Any combination; the first one met ends the run.

    ``max_generated`` stops the sources but lets resident packets drain.
    ``horizon`` stops before the first event at or after that time.
    """

    max_generated: int | None = None
    max_served: int | None = None
    horizon: float | None = None


class Model(Protocol):
    generated: int
    served: int

    def start(self, engine: "Engine", stop: StopCondition) -> None: ...

    def handle(self, engine: "Engine", event: Event) -> None: ...

    def finish(self, engine: "Engine", stop: StopCondition) -> None: ...

    def check(self) -> None: ...

    def report(self) -> Any: ...


class Engine:
    CHECK_EVERY = 1000

    def __init__(self, start_time: Any = 0.0, trace: bool = False):
        self.now = start_time
        self._queue: list[Event] = []
        self._seq = 0
        self.processed = 0
        self._handlers: list[Callable[[Event], None] | None] = [None] * len(Kind)
        self._trace = hashlib.sha256() if trace else None

    def __len__(self) -> int:
        return len(self._queue)

    def on(self, kind: Kind, handler: Callable[[Event], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, time: Any, kind: Kind, payload: Any = None) -> Event:
        if time < self.now:
            raise SimulationError(f"event {kind.name} at {time!r} is before now={self.now!r}")
        ev = _new_event(Event, (time, kind, self._seq, payload))
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def peek(self) -> Event | None:
        return self._queue[0] if self._queue else None

    def step(self) -> Event | None:
        """Process the earliest event; None when nothing is left (clock untouched)."""
        if not self._queue:
            return None
        ev = heapq.heappop(self._queue)
        self.now = ev.time
        self.processed += 1
        if self._trace is not None:
            self._trace.update(struct.pack("<dBq", float(ev.time), ev.kind, ev.seq))
        handler = self._handlers[ev[1]]
        if handler is not None:
            handler(ev)
        return ev

    @property
    def trace_digest(self) -> str | None:
        return self._trace.hexdigest() if self._trace is not None else None

    def run(self, model: Model, stop: StopCondition) -> Any:
        model.start(self, stop)
        queue = self._queue
        horizon = stop.horizon
        max_served = stop.max_served
        check_every = self.CHECK_EVERY
        step = self.step
        if self._trace is None and horizon is None and max_served is None:
            # hot loop: same semantics as step(), minus the per-event branches
            handlers = self._handlers
            pop = heapq.heappop
            while queue:
                ev = pop(queue)
                self.now = ev[0]
                self.processed += 1
                handler = handlers[ev[1]]
                if handler is not None:
                    handler(ev)
                if self.processed % check_every == 0:
                    model.check()
        else:
            while queue:
                if horizon is not None and queue[0].time >= horizon:
                    break
                if max_served is not None and model.served >= max_served:
                    break
                step()
                if self.processed % check_every == 0:
                    model.check()
        model.finish(self, stop)
        model.check()
        return model.report()
