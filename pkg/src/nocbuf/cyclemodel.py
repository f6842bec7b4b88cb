"""Clock-cycle latency budget for the two buffer organizations.

A packet needs ``store + schedule + traverse`` cycles from the start of
transmission at the source to the start of reception at the destination.
The distributed organization can add a contention penalty when the
packet array it lands in is crowded; the common array never does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

# Nominal distributed budget (10 CC + 2 CC penalty); base of the
# "penalty over distributed" improvement figure.
PENALTY_BASE_CC = 12


class CycleModelError(ValueError):
    pass


@dataclass(frozen=True)
class CycleBudget:
    store_cycles: int = 2
    schedule_cycles: int = 4
    traverse_cycles: int = 4
    clock_period_ns: float = 4.0

    def __post_init__(self):
        if min(self.store_cycles, self.schedule_cycles, self.traverse_cycles) < 0:
            raise CycleModelError("cycle counts must be non-negative")
        if not self.clock_period_ns > 0:
            raise CycleModelError("clock period must be > 0")

    @property
    def base_cycles(self) -> int:
        return self.store_cycles + self.schedule_cycles + self.traverse_cycles


@dataclass(frozen=True)
class ContentionModel:
    """Extra cycles a distributed-buffer packet may pay.

    ``penalties`` maps extra cycles to probability, used for the closed-form
    expectation. In simulation the penalty is chosen per packet from the pool
    fill it saw on admission: ``moderate_penalty`` above ``crowding_threshold``,
    ``severe_penalty`` once the pool is one slot short of full or worse.
    """

    penalties: dict[int, float] = field(default_factory=lambda: {2: 1.0})
    crowding_threshold: float = 0.75
    moderate_penalty: int = 2
    severe_penalty: int = 4

    def __post_init__(self):
        if any(p < 0 for p in self.penalties.values()) or any(c < 0 for c in self.penalties):
            raise CycleModelError("penalties and probabilities must be non-negative")
        if abs(math.fsum(self.penalties.values()) - 1.0) > 1e-12:
            raise CycleModelError("penalty probabilities must sum to 1")
        if not 0.0 <= self.crowding_threshold <= 1.0:
            raise CycleModelError("crowding_threshold must lie in [0, 1]")

    @classmethod
    def none(cls) -> "ContentionModel":
        return cls(penalties={0: 1.0})

    def penalty_for(self, occupancy: int, capacity: int) -> int:
        """Penalty for a packet that found ``occupancy`` of ``capacity`` slots in use."""
        if capacity > 1 and occupancy >= capacity - 1:
            return self.severe_penalty
        if occupancy / capacity > self.crowding_threshold:
            return self.moderate_penalty
        return 0


def min_latency_ns(budget: CycleBudget, penalty_cc: int = 0) -> float:
    return (budget.base_cycles + penalty_cc) * budget.clock_period_ns


def expected_cycle_latency(budget: CycleBudget, contention: ContentionModel) -> float:
    return math.fsum(p * min_latency_ns(budget, cc) for cc, p in contention.penalties.items())


class Convention(str, Enum):
    RELATIVE = "relative-to-distributed"
    PENALTY = "penalty-over-distributed"


def improvement_percent(common_cc: float, distributed_cc: float,
                        convention: Convention | str = Convention.RELATIVE,
                        base_cc: float = PENALTY_BASE_CC) -> float:
    """Latency saved by the common buffer, in percent.

    ``relative-to-distributed``: ``(d - c) / d``.
    ``penalty-over-distributed``: ``(d - c) / base_cc`` with a fixed base.
    """
    convention = Convention(convention)
    denom = distributed_cc if convention is Convention.RELATIVE else base_cc
    if denom == 0:
        raise CycleModelError("zero denominator in improvement")
    return 100.0 * (distributed_cc - common_cc) / denom


@dataclass(frozen=True)
class CycleRow:
    arch: str
    penalty_cc: int
    cycles: int
    latency_ns: float
    improvement_relative_pct: float
    improvement_penalty_pct: float


def latency_table(budget: CycleBudget = CycleBudget(), penalties: tuple[int, ...] = (2, 4)) -> list[CycleRow]:
    """Common row plus one distributed row per contention penalty."""
    c = budget.base_cycles
    rows = [CycleRow("common", 0, c, min_latency_ns(budget, 0), 0.0, 0.0)]
    for p in penalties:
        d = c + p
        rows.append(CycleRow(
            "distributed", p, d, min_latency_ns(budget, p),
            improvement_percent(c, d, Convention.RELATIVE),
            improvement_percent(c, d, Convention.PENALTY),
        ))
    return rows
