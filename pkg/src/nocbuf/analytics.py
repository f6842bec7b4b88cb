"""Closed-form M/M/1/N metrics.

A single exponential server with Poisson arrivals and room for ``N``
packets (including the one in service). Arrivals that find the system
full are lost. With ``rho = lambda / mu`` the stationary distribution is
truncated geometric::

    P_n = (1 - rho) rho**n / (1 - rho**(N + 1)),    n = 0..N

All powers are evaluated in the log domain (``expm1``), and ``rho > 1`` is
handled through the mirrored queue at ``1 / rho`` so that large ``N`` never
overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Below this distance from 1 the 0/0 forms are replaced by their limits.
RHO_SINGULARITY = 1e-9


class AnalyticsError(ValueError):
    """Invalid queue parameters or a degenerate metric."""


@dataclass(frozen=True)
class QueueSpec:
    arrival_rate: float
    service_rate: float
    capacity: int

    def __post_init__(self):
        if not (self.arrival_rate > 0 and math.isfinite(self.arrival_rate)):
            raise AnalyticsError(f"arrival_rate must be > 0, got {self.arrival_rate}")
        if not (self.service_rate > 0 and math.isfinite(self.service_rate)):
            raise AnalyticsError(f"service_rate must be > 0, got {self.service_rate}")
        if int(self.capacity) != self.capacity or self.capacity < 1:
            raise AnalyticsError(f"capacity must be an integer >= 1, got {self.capacity}")

    def scaled(self, ports: int) -> "QueueSpec":
        """The pooled queue: ``ports`` times the rates and the room."""
        return QueueSpec(ports * self.arrival_rate, ports * self.service_rate, ports * self.capacity)


@dataclass(frozen=True)
class QueueMetrics:
    spec: QueueSpec
    rho: float
    state_distribution: tuple[float, ...]
    blocking_probability: float
    expected_occupancy: float
    naive_latency: float
    effective_latency: float


def _check_rho(rho: float) -> None:
    if not (rho > 0 and math.isfinite(rho)):
        raise AnalyticsError(f"rho must be a positive finite number, got {rho}")


def _check_capacity(N: int) -> None:
    if int(N) != N or N < 1:
        raise AnalyticsError(f"capacity must be an integer >= 1, got {N}")


def traffic_intensity(spec: QueueSpec) -> float:
    return spec.arrival_rate / spec.service_rate


def state_probability(rho: float, n: int, N: int) -> float:
    """Stationary probability of ``n`` packets in an M/M/1/N queue."""
    _check_rho(rho)
    _check_capacity(N)
    if n < 0 or n > N:
        raise AnalyticsError(f"state {n} outside [0, {N}]")
    if abs(rho - 1.0) < RHO_SINGULARITY:
        return 1.0 / (N + 1)
    log_rho = math.log(rho)
    if rho < 1.0:
        # (1 - rho) rho^n / (1 - rho^(N+1))
        return -math.expm1(log_rho) * math.exp(n * log_rho) / -math.expm1((N + 1) * log_rho)
    # multiply through by rho^-(N+1): (rho - 1) r^(N+1-n) / (1 - r^(N+1)), r = 1/rho
    return math.expm1(log_rho) * math.exp(-(N + 1 - n) * log_rho) / -math.expm1(-(N + 1) * log_rho)


def state_distribution(rho: float, N: int) -> tuple[float, ...]:
    return tuple(state_probability(rho, n, N) for n in range(N + 1))


def blocking_probability(rho: float, N: int) -> float:
    return state_probability(rho, N, N)


def _occupancy_below_one(rho: float, N: int) -> float:
    # rho/(1-rho) - (N+1) rho^(N+1) / (1 - rho^(N+1)); algebraically the
    # textbook ratio, but without the (1 - (N+1)rho^N + N rho^(N+1)) cancellation.
    log_rho = math.log(rho)
    head = rho / -math.expm1(log_rho)
    top = (N + 1) * math.exp((N + 1) * log_rho)
    return head - top / -math.expm1((N + 1) * log_rho)


def expected_occupancy(rho: float, N: int) -> float:
    """Mean number of packets in the system, E(n)."""
    _check_rho(rho)
    _check_capacity(N)
    if abs(rho - 1.0) < RHO_SINGULARITY:
        return N / 2.0
    if rho < 1.0:
        return _occupancy_below_one(rho, N)
    # n -> N - n maps the queue at rho onto the queue at 1/rho
    return N - _occupancy_below_one(1.0 / rho, N)


def textbook_expected_occupancy(rho: float, N: int) -> float:
    """E(n) exactly as usually printed; only sane for moderate N and rho != 1."""
    num = rho * (1 - (N + 1) * rho**N + N * rho ** (N + 1))
    return num / ((1 - rho) * (1 - rho ** (N + 1)))


def naive_latency(expected_occupancy: float, arrival_rate: float) -> float:
    """E(n) over the *offered* rate (the figure quoted for the router)."""
    if not arrival_rate > 0:
        raise AnalyticsError(f"arrival_rate must be > 0, got {arrival_rate}")
    return expected_occupancy / arrival_rate


def effective_latency(spec: QueueSpec) -> float:
    """Little's law over the admitted rate: mean time in system of a served packet."""
    rho = traffic_intensity(spec)
    p_block = blocking_probability(rho, spec.capacity)
    if p_block >= 1.0:
        raise AnalyticsError("blocking probability is 1; admitted rate is zero")
    return expected_occupancy(rho, spec.capacity) / (spec.arrival_rate * (1.0 - p_block))


def queue_metrics(spec: QueueSpec) -> QueueMetrics:
    rho = traffic_intensity(spec)
    dist = state_distribution(rho, spec.capacity)
    occ = expected_occupancy(rho, spec.capacity)
    return QueueMetrics(
        spec=spec,
        rho=rho,
        state_distribution=dist,
        blocking_probability=dist[-1],
        expected_occupancy=occ,
        naive_latency=naive_latency(occ, spec.arrival_rate),
        effective_latency=effective_latency(spec),
    )


@dataclass(frozen=True)
class ArchitectureComparison:
    ports: int
    distributed: QueueMetrics
    common: QueueMetrics

    @property
    def naive_latency_ratio(self) -> float:
        """distributed / common; > 1 means pooling helps."""
        return self.distributed.naive_latency / self.common.naive_latency

    @property
    def effective_latency_ratio(self) -> float:
        return self.distributed.effective_latency / self.common.effective_latency

    @property
    def blocking_ratio(self) -> float:
        if self.common.blocking_probability == 0.0:
            return math.inf
        return self.distributed.blocking_probability / self.common.blocking_probability

    @property
    def naive_improvement_percent(self) -> float:
        d, c = self.distributed.naive_latency, self.common.naive_latency
        return 100.0 * (d - c) / d


def compare_architectures(base: QueueSpec, ports: int = 4) -> ArchitectureComparison:
    """One per-port queue ``base`` against a single queue pooling ``ports`` of them."""
    if int(ports) != ports or ports < 1:
        raise AnalyticsError(f"ports must be an integer >= 1, got {ports}")
    return ArchitectureComparison(
        ports=ports,
        distributed=queue_metrics(base),
        common=queue_metrics(base.scaled(ports)),
    )
