"""Router models driven by the event engine, and replication runners.

Two fidelity levels share the same buffer and traffic code:

* ``queueing``: each pool is drained by one exponential server (rate
  ``mu`` per distributed pool, ``ports * mu`` for the common pool) in
  arrival order. Every pool is then an M/M/1/N loss queue, which is what
  the closed-form analytics describe.
* ``voq``: a crossbar slot every ``1 / mu`` seconds; iSLIP picks a
  matching over the non-empty VOQs and each matched head crosses during
  that slot. ``cycle`` mode is the same model with per-packet cycle-budget
  latencies recorded alongside.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .cyclemodel import ContentionModel, CycleBudget, min_latency_ns
from .engine import Engine, Event, Kind, StopCondition
from .metrics import DEFAULT_WARMUP, MetricsCollector, ReplicationReport, SimReport
from .router import Arch, BufferArchitecture, BufferState, Packet
from .scheduler import DEFAULT_ITERATIONS, IslipState, schedule_epoch
from .traffic import MergedArrivals, RandomStream, TrafficSpec, build_sources, derive_seed

MODES = ("queueing", "voq", "cycle")
SERVICE_STREAM = 1000  # substream labels for pool servers start here


@dataclass(frozen=True)
class SimConfig:
    mode: str = "queueing"
    lam: float = 10e6
    mu: float = 10.05e6
    capacity: int = 32  # per input (distributed)
    common_capacity: int | None = None  # default ports * capacity
    ports: int = 4
    packets: int = 50_000
    horizon: float | None = None
    seed: int = 0
    replications: int = 5
    islip_iterations: int = DEFAULT_ITERATIONS
    warmup: int = DEFAULT_WARMUP
    wiring: str = "independent"
    destination_weights: tuple[float, ...] | None = None
    budget: CycleBudget = field(default_factory=CycleBudget)
    contention: ContentionModel = field(default_factory=ContentionModel)
    trace: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.capacity < 1 or (self.common_capacity is not None and self.common_capacity < 1):
            raise ValueError("capacities must be >= 1")
        if self.ports < 1:
            raise ValueError("ports must be >= 1")
        if self.packets < 0:
            raise ValueError("packets must be >= 0")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.islip_iterations < 1:
            raise ValueError("islip_iterations must be >= 1")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if self.wiring not in ("independent", "demux"):
            raise ValueError(f"wiring must be 'independent' or 'demux', got {self.wiring!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.destination_weights is not None and len(self.destination_weights) != self.ports:
            raise ValueError("destination_weights needs one entry per output port")
        # surfaces weight errors before any run starts
        self.traffic()

    def architecture(self, arch: Arch | str) -> BufferArchitecture:
        arch = Arch(arch)
        if arch is Arch.COMMON:
            cap = self.common_capacity if self.common_capacity is not None else self.ports * self.capacity
            return BufferArchitecture.common(cap, self.ports)
        return BufferArchitecture.distributed(self.capacity, self.ports)

    def traffic(self) -> TrafficSpec:
        weights = self.destination_weights or tuple(1.0 / self.ports for _ in range(self.ports))
        return TrafficSpec(self.lam, self.ports, weights, self.seed)

    def replication_seed(self, rep: int) -> int:
        return derive_seed(self.seed, rep)


class RouterModel:
    """Shared arrival/admission/bookkeeping; subclasses supply the server."""

    def __init__(self, config: SimConfig, arch: Arch | str, seed: int):
        self.config = config
        self.arch = config.architecture(arch)
        self.seed = seed
        self.buffer = BufferState(self.arch, arrival_order=config.mode == "queueing")
        master = RandomStream(seed)
        self.master = master
        self.arrivals = MergedArrivals(build_sources(config.traffic(), master, config.wiring))
        self.metrics = MetricsCollector(self.arch.num_pools, config.warmup)
        self.max_generated: int | None = None
        self.in_flight = 0
        self.engine: Engine | None = None

    # engine protocol -------------------------------------------------
    @property
    def generated(self) -> int:
        return self.metrics.generated

    @property
    def served(self) -> int:
        return self.metrics.served

    @property
    def resident(self) -> int:
        return self.buffer.occupancy + self.in_flight

    def start(self, engine: Engine, stop: StopCondition) -> None:
        self.engine = engine
        self.max_generated = stop.max_generated
        engine.on(Kind.ARRIVAL, self.on_arrival)
        engine.on(Kind.DEPARTURE, self.on_departure)
        engine.on(Kind.SCHEDULE_EPOCH, self.on_epoch)
        if self.max_generated == 0:
            self.metrics.close(engine.now)
            return
        self._schedule_next_arrival()

    def finish(self, engine: Engine, stop: StopCondition) -> None:
        end = engine.now if stop.horizon is None else max(stop.horizon, engine.now)
        self.metrics.close(end)
        self.end_time = end

    def check(self) -> None:
        self.buffer.check()
        m = self.metrics
        if m.generated != m.served + m.blocked + self.resident:
            raise AssertionError(
                f"conservation: generated={m.generated} served={m.served} "
                f"blocked={m.blocked} resident={self.resident}"
            )

    def report(self) -> SimReport:
        return self.metrics.report(
            arch=self.arch.kind.value,
            mode=self.config.mode,
            seed=self.seed,
            resident=self.resident,
            duration=self.end_time,
            trace_digest=self.engine.trace_digest if self.engine is not None else None,
        )

    # handlers ----------------------------------------------------------
    def _schedule_next_arrival(self) -> None:
        t, pkt = self.arrivals.next_arrival()
        self.engine.schedule(t, Kind.ARRIVAL, pkt)

    def on_arrival(self, ev: Event) -> None:
        pkt: Packet = ev.payload
        now = ev.time
        m = self.metrics
        m.record_arrival()
        if self.buffer.try_enqueue(pkt, now):
            pool = self.arch.pool_of(pkt.input_port)
            m.record_occupancy(now, self.buffer.pool_occupancy[pool], pool)
            self.admitted(pkt, pool, now)
        else:
            m.record_block(pkt)
        if self.max_generated is None or m.generated < self.max_generated:
            self._schedule_next_arrival()
        else:
            # offered-load window ends with the last arrival; the rest drains
            m.close(now)

    def admitted(self, pkt: Packet, pool: int, now: float) -> None:
        raise NotImplementedError

    def on_departure(self, ev: Event) -> None:
        raise NotImplementedError

    def on_epoch(self, ev: Event) -> None:
        raise NotImplementedError


class QueueingRouter(RouterModel):
    """One exponential FIFO server per pool."""

    def __init__(self, config: SimConfig, arch: Arch | str, seed: int):
        super().__init__(config, arch, seed)
        pools = self.arch.num_pools
        # the common server is as fast as all distributed servers together
        self.service_rate = config.mu * (config.ports if self.arch.kind is Arch.COMMON else 1)
        self.service_streams = [self.master.substream(SERVICE_STREAM + p) for p in range(pools)]
        self.busy = [False] * pools

    def serve_aggregate(self, pool: int, now: float) -> None:
        gap = -math.log(self.service_streams[pool].uniform()) / self.service_rate
        self.busy[pool] = True
        self.engine.schedule(now + gap, Kind.DEPARTURE, pool)

    def admitted(self, pkt: Packet, pool: int, now: float) -> None:
        if not self.busy[pool]:
            self.serve_aggregate(pool, now)

    def on_departure(self, ev: Event) -> None:
        pool = ev.payload
        now = ev.time
        pkt = self.buffer.pop_oldest(pool, now)
        occ = self.buffer.pool_occupancy[pool]
        self.metrics.record_occupancy(now, occ, pool)
        self.metrics.record_departure(pkt)
        if occ:
            self.serve_aggregate(pool, now)
        else:
            self.busy[pool] = False


class VoqRouter(RouterModel):
    """Slotted crossbar scheduled by iSLIP."""

    def __init__(self, config: SimConfig, arch: Arch | str, seed: int):
        super().__init__(config, arch, seed)
        self.slot = 1.0 / config.mu
        self.islip = IslipState(config.ports)
        self.ticking = False
        self.record_cycles = config.mode == "cycle"

    def admitted(self, pkt: Packet, pool: int, now: float) -> None:
        if not self.ticking:
            self.ticking = True
            self.engine.schedule(math.ceil(now / self.slot) * self.slot, Kind.SCHEDULE_EPOCH)

    def on_epoch(self, ev: Event) -> None:
        now = ev.time
        matching, self.islip = schedule_epoch(self.buffer, self.islip, self.config.islip_iterations)
        done = now + self.slot
        for pkt in self.buffer.retire(sorted(matching), done):
            pool = self.arch.pool_of(pkt.input_port)
            self.metrics.record_occupancy(now, self.buffer.pool_occupancy[pool], pool)
            self.in_flight += 1
            self.engine.schedule(done, Kind.DEPARTURE, pkt)
        if self.buffer.occupancy:
            self.engine.schedule(done, Kind.SCHEDULE_EPOCH)
        else:
            self.ticking = False

    def on_departure(self, ev: Event) -> None:
        pkt: Packet = ev.payload
        self.in_flight -= 1
        self.metrics.record_departure(pkt)
        if self.record_cycles:
            if self.arch.kind is Arch.COMMON:
                penalty = 0
            else:
                penalty = self.config.contention.penalty_for(pkt.seen_occupancy, self.arch.capacity)
            self.metrics.record_cycle_latency(min_latency_ns(self.config.budget, penalty))


def build_model(config: SimConfig, arch: Arch | str, seed: int) -> RouterModel:
    if config.mode == "queueing":
        return QueueingRouter(config, arch, seed)
    return VoqRouter(config, arch, seed)


def stop_condition(config: SimConfig) -> StopCondition:
    if config.horizon is not None:
        return StopCondition(max_generated=config.packets or None, horizon=config.horizon)
    return StopCondition(max_generated=config.packets)


def run_once(config: SimConfig, arch: Arch | str, seed: int) -> SimReport:
    model = build_model(config, arch, seed)
    engine = Engine(trace=config.trace)
    return engine.run(model, stop_condition(config))


def run_replication(config: SimConfig, arch: Arch | str, rep: int) -> SimReport:
    return run_once(config, arch, config.replication_seed(rep))


def _job(args):
    config, arch, rep = args
    return run_replication(config, arch, rep)


def run_replications(config: SimConfig, arch: Arch | str, workers: int = 1) -> ReplicationReport:
    """All replications of one architecture, ordered by replication index."""
    arch = Arch(arch)
    jobs = [(config, arch, r) for r in range(config.replications)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_job, jobs))
    else:
        runs = [_job(j) for j in jobs]
    return ReplicationReport(arch.value, config.mode, runs)


def run_compare(config: SimConfig, workers: int = 1) -> dict[str, ReplicationReport]:
    """Both architectures on the same replication seeds (common random numbers)."""
    return {a.value: run_replications(config, a, workers) for a in (Arch.COMMON, Arch.DISTRIBUTED)}


def with_overrides(config: SimConfig, **changes) -> SimConfig:
    return replace(config, **changes)
