"""iSLIP request/grant/accept matching (McKeown, 1999).

Each iteration, every unmatched output grants the requesting unmatched
input nearest at or after its grant pointer, and every unmatched input
accepts the granting output nearest at or after its accept pointer.
Pointers move one past the matched partner at the end of the decision,
and only for matches made in the first iteration; that rule is what
desynchronizes the pointers and gives 100% throughput under uniform load.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .router import BufferState

DEFAULT_ITERATIONS = 2


@dataclass
class IslipState:
    num_ports: int = 4
    grant_pointer: list[int] = field(default_factory=list)
    accept_pointer: list[int] = field(default_factory=list)

    def __post_init__(self):
        n = self.num_ports
        if n < 1:
            raise ValueError("num_ports must be >= 1")
        if not self.grant_pointer:
            self.grant_pointer = [0] * n
        if not self.accept_pointer:
            self.accept_pointer = [0] * n
        for name, ptrs in (("grant_pointer", self.grant_pointer), ("accept_pointer", self.accept_pointer)):
            if len(ptrs) != n or any(not 0 <= p < n for p in ptrs):
                raise ValueError(f"{name} must hold {n} values in [0, {n})")

    def copy(self) -> "IslipState":
        return IslipState(self.num_ports, list(self.grant_pointer), list(self.accept_pointer))


def _round_robin(candidates: Sequence[int], pointer: int, n: int) -> int:
    return min(candidates, key=lambda k: (k - pointer) % n)


def islip(requests: Sequence[Sequence[int]], state: IslipState, iterations: int = DEFAULT_ITERATIONS
          ) -> tuple[frozenset[tuple[int, int]], IslipState]:
    """One scheduling decision. Returns the matching and the updated pointers.

    ``requests[i][j]`` is truthy when input ``i`` holds a packet for output ``j``.
    The input state is not modified.
    """
    n = state.num_ports
    if len(requests) != n or any(len(row) != n for row in requests):
        raise ValueError(f"request matrix must be {n}x{n}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")

    new = state.copy()
    in_match: dict[int, int] = {}
    out_match: dict[int, int] = {}
    for it in range(iterations):
        grants: dict[int, list[int]] = {}
        for j in range(n):
            if j in out_match:
                continue
            contenders = [i for i in range(n) if i not in in_match and requests[i][j]]
            if contenders:
                i = _round_robin(contenders, state.grant_pointer[j], n)
                grants.setdefault(i, []).append(j)
        if not grants:
            break
        for i, outs in grants.items():
            j = _round_robin(outs, state.accept_pointer[i], n)
            in_match[i] = j
            out_match[j] = i
            if it == 0:
                new.grant_pointer[j] = (i + 1) % n
                new.accept_pointer[i] = (j + 1) % n
    return frozenset(in_match.items()), new


def schedule_epoch(buffer: BufferState, state: IslipState, iterations: int = DEFAULT_ITERATIONS
                   ) -> tuple[frozenset[tuple[int, int]], IslipState]:
    return islip(buffer.request_matrix(), state, iterations)

