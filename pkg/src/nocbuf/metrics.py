"""Run statistics: latency, served/blocked counts, time-weighted occupancy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .router import Packet

MAX_EXACT_SAMPLES = 1_000_000
DEFAULT_WARMUP = 5000


class MetricsError(RuntimeError):
    pass


class LogSketch:
    """Quantile sketch with relative error ``alpha`` on positive values.

    Values land in geometric buckets of ratio ``(1 + alpha) / (1 - alpha)``;
    a quantile is reported as the bucket's midpoint, which is within
    ``alpha`` relative of every value in that bucket. Zeros are counted apart.
    """

    def __init__(self, alpha: float = 0.01):
        self.alpha = alpha
        self.gamma = (1 + alpha) / (1 - alpha)
        self._log_gamma = math.log(self.gamma)
        self.buckets: dict[int, int] = {}
        self.zeros = 0
        self.count = 0

    def add(self, x: float) -> None:
        self.count += 1
        if x <= 0.0:
            self.zeros += 1
            return
        k = math.ceil(math.log(x) / self._log_gamma)
        self.buckets[k] = self.buckets.get(k, 0) + 1

    def quantile(self, q: float) -> float:
        if self.count == 0:
            return math.nan
        rank = q * (self.count - 1)
        seen = self.zeros
        if rank < seen:
            return 0.0
        for k in sorted(self.buckets):
            seen += self.buckets[k]
            if rank < seen:
                return 2 * self.gamma**k / (self.gamma + 1)
        return 2 * self.gamma ** max(self.buckets) / (self.gamma + 1)


class SummaryStats:
    """Streaming count/mean/variance (Welford) plus percentiles.

    Percentiles are exact while at most ``max_exact`` samples have been
    seen; past that the samples are folded into a :class:`LogSketch`.
    """

    def __init__(self, max_exact: int = MAX_EXACT_SAMPLES):
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0
        self.min = math.inf
        self.max = -math.inf
        self.max_exact = max_exact
        self._samples: list[float] | None = []
        self._sketch: LogSketch | None = None

    def add(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (x - self.mean)
        if x < self.min:
            self.min = x
        if x > self.max:
            self.max = x
        if self._samples is not None:
            self._samples.append(x)
            if len(self._samples) > self.max_exact:
                self._sketch = LogSketch()
                for s in self._samples:
                    self._sketch.add(s)
                self._samples = None
        else:
            self._sketch.add(x)

    def extend(self, xs) -> None:
        for x in xs:
            self.add(x)

    @property
    def variance(self) -> float:
        """Unbiased sample variance; 0 for fewer than two samples."""
        if self.count < 2:
            return 0.0
        return max(self._m2 / (self.count - 1), 0.0)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def exact(self) -> bool:
        return self._samples is not None

    def percentile(self, p: float) -> float:
        if self.count == 0:
            return math.nan
        if self._samples is not None:
            return float(np.percentile(self._samples, p))
        v = self._sketch.quantile(p / 100.0)
        return min(max(v, self.min), self.max)

    def as_dict(self) -> dict:
        empty = self.count == 0
        return {
            "count": self.count,
            "mean": math.nan if empty else self.mean,
            "variance": self.variance,
            "min": math.nan if empty else self.min,
            "max": math.nan if empty else self.max,
            "p50": self.percentile(50),
            "p95": self.percentile(95),
            "p99": self.percentile(99),
        }


@dataclass
class SimReport:
    arch: str
    mode: str
    seed: int
    generated: int
    served: int
    blocked: int
    resident: int
    latency: SummaryStats
    latency_raw: SummaryStats
    time_average_occupancy: float
    time_average_occupancy_trimmed: float
    pool_occupancy: list[float]
    duration: float
    warmup: int
    cycle_latency_ns: SummaryStats | None = None
    trace_digest: str | None = None

    def __post_init__(self):
        if self.generated != self.served + self.blocked + self.resident:
            raise MetricsError(
                f"conservation violated: generated={self.generated} served={self.served} "
                f"blocked={self.blocked} resident={self.resident}"
            )

    @property
    def blocking_probability(self) -> float:
        return self.blocked / self.generated if self.generated else 0.0

    @property
    def throughput(self) -> float:
        return self.served / self.duration if self.duration > 0 else 0.0

    def as_dict(self) -> dict:
        d = {
            "arch": self.arch,
            "mode": self.mode,
            "seed": self.seed,
            "generated": self.generated,
            "served": self.served,
            "blocked": self.blocked,
            "resident": self.resident,
            "blocking_prob": self.blocking_probability,
            "throughput_pps": self.throughput,
            "warmup": self.warmup,
            "latency_s": self.latency.as_dict(),
            "latency_raw_s": self.latency_raw.as_dict(),
            "time_average_occupancy": self.time_average_occupancy,
            "time_average_occupancy_trimmed": self.time_average_occupancy_trimmed,
            "pool_occupancy": self.pool_occupancy,
            "duration_s": self.duration,
        }
        if self.cycle_latency_ns is not None:
            d["cycle_latency_ns"] = self.cycle_latency_ns.as_dict()
        return d


class MetricsCollector:
    """Per-run accumulator; one instance per engine."""

    def __init__(self, num_pools: int = 1, warmup: int = DEFAULT_WARMUP, start_time: float = 0.0):
        if warmup < 0:
            raise MetricsError("warmup must be >= 0")
        self.warmup = warmup
        self.generated = 0
        self.served = 0
        self.blocked = 0
        self.latency_raw = SummaryStats()
        self.latency = SummaryStats()
        self.cycle_latency_ns: SummaryStats | None = None
        self.start_time = start_time
        self._occ = [0] * num_pools
        self._area = [0.0] * num_pools
        self._last = [start_time] * num_pools
        self._trim_time: float | None = start_time if warmup == 0 else None
        self._trim_area: list[float] = [0.0] * num_pools
        self.end_time: float | None = None

    def record_arrival(self) -> None:
        self.generated += 1

    def record_block(self, packet: Packet) -> None:
        self.blocked += 1

    def record_departure(self, packet: Packet) -> None:
        if packet.departed_at is None:
            raise MetricsError(f"packet {packet.id} has no departure time")
        sample = packet.departed_at - packet.created_at
        if sample < 0:
            raise MetricsError(f"negative latency {sample} for packet {packet.id}")
        self.served += 1
        self.latency_raw.add(sample)
        if self.served > self.warmup:
            self.latency.add(sample)
        elif self.served == self.warmup:
            self._trim_time = packet.departed_at
            self._trim_area = [self._area[p] + self._occ[p] * (packet.departed_at - self._last[p])
                               for p in range(len(self._occ))]

    def record_cycle_latency(self, ns: float) -> None:
        if self.cycle_latency_ns is None:
            self.cycle_latency_ns = SummaryStats()
        self.cycle_latency_ns.add(ns)

    def record_occupancy(self, time: float, occupancy: int, pool: int = 0) -> None:
        """Occupancy of ``pool`` changes to ``occupancy`` at ``time``."""
        if self.end_time is not None:
            return
        if time < self._last[pool]:
            raise MetricsError("occupancy samples must be time-ordered")
        self._area[pool] += self._occ[pool] * (time - self._last[pool])
        self._last[pool] = time
        self._occ[pool] = occupancy

    def close(self, end_time: float) -> None:
        """Stop integrating occupancy at ``end_time``."""
        if self.end_time is not None:
            return
        for p in range(len(self._occ)):
            self.record_occupancy(max(end_time, self._last[p]), self._occ[p], p)
        self.end_time = end_time

    def pool_time_average(self) -> list[float]:
        if self.end_time is None:
            raise MetricsError("collector not closed")
        span = self.end_time - self.start_time
        return [a / span if span > 0 else 0.0 for a in self._area]

    def time_average_occupancy(self) -> float:
        return sum(self.pool_time_average())

    def trimmed_time_average_occupancy(self) -> float:
        if self._trim_time is None or self.end_time is None or self.end_time <= self._trim_time:
            return math.nan
        return (sum(self._area) - sum(self._trim_area)) / (self.end_time - self._trim_time)

    def report(self, *, arch: str, mode: str, seed: int, resident: int, duration: float,
               trace_digest: str | None = None) -> SimReport:
        return SimReport(
            arch=arch,
            mode=mode,
            seed=seed,
            generated=self.generated,
            served=self.served,
            blocked=self.blocked,
            resident=resident,
            latency=self.latency,
            latency_raw=self.latency_raw,
            time_average_occupancy=self.time_average_occupancy(),
            time_average_occupancy_trimmed=self.trimmed_time_average_occupancy(),
            pool_occupancy=self.pool_time_average(),
            duration=duration,
            warmup=self.warmup,
            cycle_latency_ns=self.cycle_latency_ns,
            trace_digest=trace_digest,
        )


def confidence_interval(means: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """Grand mean and Student-t half-width over independent replications."""
    n = len(means)
    if n < 2:
        raise MetricsError(f"need at least 2 replications for a confidence interval, got {n}")
    arr = np.asarray(means, dtype=float)
    mean = float(arr.mean())
    s = float(arr.std(ddof=1))
    t = float(stats.t.ppf(0.5 + level / 2, n - 1))
    return mean, t * s / math.sqrt(n)


@dataclass
class Estimate:
    mean: float
    half_width: float | None  # None with a single replication
    values: list[float] = field(default_factory=list)

    @classmethod
    def of(cls, values: Sequence[float], level: float = 0.95) -> "Estimate":
        values = [float(v) for v in values]
        if len(values) >= 2:
            m, h = confidence_interval(values, level)
            return cls(m, h, values)
        return cls(values[0] if values else math.nan, None, values)

    @property
    def low(self) -> float:
        return self.mean - (self.half_width or 0.0)

    @property
    def high(self) -> float:
        return self.mean + (self.half_width or 0.0)

    def disjoint_below(self, other: "Estimate") -> bool:
        """True when this interval lies entirely below ``other``'s."""
        return self.half_width is not None and other.half_width is not None and self.high < other.low

    @property
    def standard_error(self) -> float:
        n = len(self.values)
        return float(np.std(self.values, ddof=1) / math.sqrt(n)) if n >= 2 else math.nan


@dataclass
class ReplicationReport:
    arch: str
    mode: str
    runs: list[SimReport]

    def __post_init__(self):
        if not self.runs:
            raise MetricsError("no runs to aggregate")

    @property
    def replications(self) -> int:
        return len(self.runs)

    def estimate(self, attr: str, level: float = 0.95) -> Estimate:
        return Estimate.of([_metric(r, attr) for r in self.runs], level)

    @property
    def generated(self) -> int:
        return sum(r.generated for r in self.runs)

    @property
    def served(self) -> int:
        return sum(r.served for r in self.runs)

    @property
    def blocked(self) -> int:
        return sum(r.blocked for r in self.runs)


def _metric(run: SimReport, attr: str) -> float:
    if attr == "mean_latency":
        return run.latency.mean if run.latency.count else math.nan
    if attr == "mean_latency_raw":
        return run.latency_raw.mean if run.latency_raw.count else math.nan
    if attr == "p95_latency":
        return run.latency.percentile(95)
    if attr == "mean_cycle_latency_ns":
        return run.cycle_latency_ns.mean if run.cycle_latency_ns is not None else math.nan
    return float(getattr(run, attr))
