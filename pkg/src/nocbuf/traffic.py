"""Seedable Poisson packet sources.

Each source owns a private :class:`RandomStream` whose seed is derived
from ``(master seed, source index)`` with a SplitMix64 finalizer, so one
source's sequence never depends on how many others exist.
"""

from __future__ import annotations

import heapq
import itertools
import math
import random
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterator, Sequence

from .router import Packet

MASK64 = (1 << 64) - 1


class TrafficError(ValueError):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, *path: int) -> int:
    """Fold integer labels into a 64-bit seed, e.g. ``derive_seed(s, rep, src)``."""
    h = splitmix64(seed & MASK64)
    for label in path:
        h = splitmix64(h ^ splitmix64(label & MASK64))
    return h


class RandomStream:
    """Uniforms on (0, 1] from a Mersenne Twister seeded with a 64-bit integer.

    ``random.Random`` seeded from an ``int`` is specified to produce the same
    sequence on every platform.
    """

    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise TrafficError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._random = random.Random(seed).random

    def uniform(self) -> float:
        return 1.0 - self._random()

    def substream(self, *path: int) -> "RandomStream":
        return RandomStream(derive_seed(self.seed, *path))


def sample_exponential(stream: RandomStream, rate: float) -> float:
    if not rate > 0:
        raise TrafficError(f"rate must be > 0, got {rate}")
    return -math.log(stream.uniform()) / rate


def validate_weights(weights: Sequence[float]) -> tuple[float, ...]:
    w = tuple(float(x) for x in weights)
    if not w:
        raise TrafficError("destination weights are empty")
    if any(x < 0 or not math.isfinite(x) for x in w):
        raise TrafficError(f"destination weights must be finite and >= 0: {w}")
    if abs(math.fsum(w) - 1.0) > 1e-12:
        raise TrafficError(f"destination weights must sum to 1, got {math.fsum(w)!r}")
    return w


def cumulative(weights: Sequence[float]) -> list[float]:
    cdf = list(itertools.accumulate(weights))
    cdf[-1] = 1.0
    return cdf


def sample_destination(stream: RandomStream, weights: Sequence[float], cdf: Sequence[float] | None = None) -> int:
    """CDF inversion: the first index ``j`` with ``U <= F(j)``.

    Zero-weight ports can never be drawn because ``U > 0``.
    """
    if cdf is None:
        cdf = cumulative(validate_weights(weights))
    return bisect_left(cdf, stream.uniform())


def uniform_weights(n: int) -> tuple[float, ...]:
    return tuple(1.0 / n for _ in range(n))


@dataclass
class TrafficSpec:
    per_source_rate: float
    num_sources: int = 4
    destination_weights: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if not (self.per_source_rate > 0 and math.isfinite(self.per_source_rate)):
            raise TrafficError(f"per_source_rate must be > 0, got {self.per_source_rate}")
        if self.num_sources < 1:
            raise TrafficError("num_sources must be >= 1")
        if self.destination_weights is None:
            self.destination_weights = uniform_weights(4)
        self.destination_weights = validate_weights(self.destination_weights)


class PacketIds:
    """Globally unique, strictly increasing packet ids shared by all sources."""

    def __init__(self, start: int = 0):
        self._counter = itertools.count(start)

    def __next__(self) -> int:
        return next(self._counter)


@dataclass
class PoissonSource:
    """One input port's arrival process.

    ``input_ports`` normally holds just the source's own port; an aggregate
    source feeding several ports (the demultiplexed wiring) samples the
    input port uniformly from this tuple, using a third uniform per packet.
    """

    rate: float
    stream: RandomStream
    weights: tuple[float, ...]
    ids: PacketIds = field(default_factory=PacketIds)
    input_ports: tuple[int, ...] = (0,)
    now: float = 0.0
    _cdf: list[float] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.rate > 0:
            raise TrafficError(f"rate must be > 0, got {self.rate}")
        self.weights = validate_weights(self.weights)
        self._cdf = cumulative(self.weights)
        self._port_cdf = cumulative(uniform_weights(len(self.input_ports)))

    def draw(self) -> tuple[float, int, int]:
        """Advance to the next arrival: ``(time, input_port, output_port)``."""
        self.now += -math.log(self.stream.uniform()) / self.rate
        dest = bisect_left(self._cdf, self.stream.uniform())
        if len(self.input_ports) == 1:
            port = self.input_ports[0]
        else:
            port = self.input_ports[bisect_left(self._port_cdf, self.stream.uniform())]
        return self.now, port, dest

    def next_arrival(self) -> tuple[float, Packet]:
        t, port, dest = self.draw()
        return t, Packet(id=next(self.ids), input_port=port, output_port=dest, created_at=t)

    def __iter__(self) -> Iterator[tuple[float, Packet]]:
        while True:
            yield self.next_arrival()


class MergedArrivals:
    """Superposition of several sources, yielded in time order.

    Ids are handed out at merge time, so they increase with arrival time
    across all sources. Simultaneous arrivals go lowest source index first.
    """

    def __init__(self, sources: Sequence[PoissonSource], ids: PacketIds | None = None):
        self.sources = list(sources)
        self.ids = ids if ids is not None else PacketIds()
        self._pending = []
        if len(self.sources) > 1:
            self._pending = [self._entry(k) for k in range(len(self.sources))]
            heapq.heapify(self._pending)

    def _entry(self, k: int) -> tuple[float, int, int, int]:
        t, port, dest = self.sources[k].draw()
        return t, k, port, dest

    def next_arrival(self) -> tuple[float, Packet]:
        if len(self.sources) == 1:
            t, port, dest = self.sources[0].draw()
            return t, Packet(next(self.ids), port, dest, t)
        t, k, port, dest = self._pending[0]
        heapq.heapreplace(self._pending, self._entry(k))
        return t, Packet(id=next(self.ids), input_port=port, output_port=dest, created_at=t)

    def __iter__(self) -> Iterator[tuple[float, Packet]]:
        while True:
            yield self.next_arrival()


def build_sources(spec: TrafficSpec, master: RandomStream, wiring: str = "independent",
                  ids: PacketIds | None = None) -> list[PoissonSource]:
    """Sources for ``spec.num_sources`` input ports.

    ``independent``: one source per port at the per-source rate.
    ``demux``: a single source at the aggregate rate whose packets are
    switched onto a uniformly chosen input port.
    """
    ids = ids if ids is not None else PacketIds()
    weights = spec.destination_weights
    if wiring == "independent":
        return [
            PoissonSource(spec.per_source_rate, master.substream(s), weights, ids, (s,))
            for s in range(spec.num_sources)
        ]
    if wiring == "demux":
        ports = tuple(range(spec.num_sources))
        return [PoissonSource(spec.per_source_rate * spec.num_sources, master.substream(0), weights, ids, ports)]
    raise TrafficError(f"unknown wiring {wiring!r}; expected 'independent' or 'demux'")
