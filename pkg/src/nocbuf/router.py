"""Router input block: virtual output queues over pooled or per-port memory.

Every input ``i`` keeps a FIFO per output ``j`` (``voq[i][j]``). The
packet array behind them is either one pool shared by all inputs
(``common``) or one pool per input (``distributed``). Admission only
checks the governing pool, so within a pool the queues grow and shrink
with the traffic mix.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

NUM_PORTS = 4


class RouterError(RuntimeError):
    """Model inconsistency (e.g. retiring from an empty queue)."""


@dataclass(slots=True)
class Packet:
    id: int
    input_port: int
    output_port: int
    created_at: float
    enqueued_at: float | None = None
    departed_at: float | None = None
    # pool occupancy found on admission; feeds the cycle contention model
    seen_occupancy: int = 0


class Arch(str, Enum):
    COMMON = "common"
    DISTRIBUTED = "distributed"


@dataclass(frozen=True)
class BufferArchitecture:
    kind: Arch
    capacity: int
    num_ports: int = NUM_PORTS

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if self.num_ports < 1:
            raise ValueError(f"num_ports must be >= 1, got {self.num_ports}")

    @classmethod
    def common(cls, pool_capacity: int = 128, num_ports: int = NUM_PORTS) -> "BufferArchitecture":
        return cls(Arch.COMMON, pool_capacity, num_ports)

    @classmethod
    def distributed(cls, per_input_capacity: int = 32, num_ports: int = NUM_PORTS) -> "BufferArchitecture":
        return cls(Arch.DISTRIBUTED, per_input_capacity, num_ports)

    @property
    def num_pools(self) -> int:
        return 1 if self.kind is Arch.COMMON else self.num_ports

    @property
    def total_capacity(self) -> int:
        return self.capacity * self.num_pools

    def pool_of(self, input_port: int) -> int:
        return 0 if self.kind is Arch.COMMON else input_port

    def pool_inputs(self, pool: int) -> range:
        if self.kind is Arch.COMMON:
            return range(self.num_ports)
        return range(pool, pool + 1)


class BufferState:
    """VOQ contents plus per-pool occupancy counters.

    With ``arrival_order=True`` each pool also keeps its packets in
    admission order so the oldest one can be found in O(1); only valid
    while packets leave through :meth:`pop_oldest`.
    """

    def __init__(self, arch: BufferArchitecture, arrival_order: bool = False):
        self.arch = arch
        n = arch.num_ports
        self.voq: list[list[deque[Packet]]] = [[deque() for _ in range(n)] for _ in range(n)]
        self.pool_occupancy = [0] * arch.num_pools
        self._order: list[deque[Packet]] | None = (
            [deque() for _ in range(arch.num_pools)] if arrival_order else None
        )

    @property
    def occupancy(self) -> int:
        return sum(self.pool_occupancy)

    def _check_ports(self, packet: Packet) -> None:
        n = self.arch.num_ports
        if not (0 <= packet.input_port < n and 0 <= packet.output_port < n):
            raise ValueError(
                f"packet {packet.id} ports ({packet.input_port}, {packet.output_port}) outside 0..{n - 1}"
            )

    def try_enqueue(self, packet: Packet, now: float) -> bool:
        """Admit ``packet`` into ``voq[in][out]`` if its pool has room.

        Returns False (and leaves the state untouched) when the pool is full.
        """
        self._check_ports(packet)
        pool = self.arch.pool_of(packet.input_port)
        occ = self.pool_occupancy[pool]
        if occ >= self.arch.capacity:
            return False
        packet.seen_occupancy = occ
        packet.enqueued_at = now
        self.voq[packet.input_port][packet.output_port].append(packet)
        self.pool_occupancy[pool] = occ + 1
        if self._order is not None:
            self._order[pool].append(packet)
        return True

    def request_matrix(self) -> list[list[int]]:
        return [[1 if q else 0 for q in row] for row in self.voq]

    def retire(self, matching: Iterable[tuple[int, int]], now: float) -> list[Packet]:
        """Pop the head of ``voq[i][j]`` for each matched pair."""
        if self._order is not None:
            raise RouterError("retire() on a buffer tracking pool arrival order")
        departed = []
        for i, j in matching:
            q = self.voq[i][j]
            if not q:
                raise RouterError(f"matched pair ({i}, {j}) has an empty VOQ")
            pkt = q.popleft()
            self.pool_occupancy[self.arch.pool_of(i)] -= 1
            pkt.departed_at = now
            departed.append(pkt)
        return departed

    def oldest_in_pool(self, pool: int) -> Packet | None:
        """Head-of-pool in arrival order (the heads of its VOQs are the only candidates)."""
        if self._order is not None:
            q = self._order[pool]
            return q[0] if q else None
        best = None
        best_key = None
        for i in self.arch.pool_inputs(pool):
            for q in self.voq[i]:
                if q:
                    key = (q[0].enqueued_at, q[0].id)
                    if best_key is None or key < best_key:
                        best, best_key = q[0], key
        return best

    def pop_oldest(self, pool: int, now: float) -> Packet:
        pkt = self.oldest_in_pool(pool)
        if pkt is None:
            raise RouterError(f"pool {pool} is empty")
        if self._order is not None:
            self._order[pool].popleft()
        head = self.voq[pkt.input_port][pkt.output_port].popleft()
        assert head is pkt
        self.pool_occupancy[pool] -= 1
        pkt.departed_at = now
        return pkt

    def recount(self) -> list[int]:
        """Pool occupancy recomputed from the queues (for consistency checks)."""
        counts = [0] * self.arch.num_pools
        for i, row in enumerate(self.voq):
            counts[self.arch.pool_of(i)] += sum(len(q) for q in row)
        return counts

    def check(self) -> None:
        counts = self.recount()
        if counts != self.pool_occupancy:
            raise RouterError(f"occupancy counters {self.pool_occupancy} != queue lengths {counts}")
        if any(c > self.arch.capacity for c in counts):
            raise RouterError(f"pool over capacity: {counts} > {self.arch.capacity}")
