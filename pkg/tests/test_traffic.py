import math

import numpy as np
import pytest
from scipy import stats

from nocbuf.traffic import (
    MergedArrivals,
    PacketIds,
    PoissonSource,
    RandomStream,
    TrafficError,
    TrafficSpec,
    build_sources,
    derive_seed,
    sample_destination,
    sample_exponential,
    uniform_weights,
)


class FixedStream:
    """Replays given uniforms."""

    def __init__(self, values):
        self.values = list(values)
        self.draws = 0

    def uniform(self):
        self.draws += 1
        return self.values.pop(0)


class TestRandomStream:
    def test_range(self):
        s = RandomStream(1)
        xs = [s.uniform() for _ in range(100_000)]
        assert min(xs) > 0.0
        assert max(xs) <= 1.0

    def test_deterministic(self):
        a, b = RandomStream(2**64 - 1), RandomStream(2**64 - 1)
        assert [a.uniform() for _ in range(50)] == [b.uniform() for _ in range(50)]

    def test_seed_range(self):
        with pytest.raises(TrafficError):
            RandomStream(-1)
        with pytest.raises(TrafficError):
            RandomStream(2**64)

    def test_derive_seed_is_fixed(self):
        # SplitMix64 is a fixed function; pin a value so the derivation can't drift
        assert derive_seed(0) == 0xE220A8397B1DCDAF
        assert derive_seed(42, 3) != derive_seed(42, 4)
        assert derive_seed(42, 3) == derive_seed(42, 3)


class TestExponential:
    def test_unit_uniform_gives_zero(self):
        assert sample_exponential(FixedStream([1.0]), 5.0) == 0.0

    def test_inverse_transform(self):
        assert sample_exponential(FixedStream([math.exp(-1)]), 1.0) == pytest.approx(1.0, rel=1e-15)

    def test_one_draw_per_sample(self):
        s = FixedStream([0.5, 0.25])
        sample_exponential(s, 1.0)
        assert s.draws == 1

    def test_rejects_bad_rate(self):
        with pytest.raises(TrafficError):
            sample_exponential(RandomStream(0), 0.0)

    def test_sample_mean(self):
        s = RandomStream(7)
        mean = math.fsum(sample_exponential(s, 1e7) for _ in range(1_000_000)) / 1_000_000
        assert mean == pytest.approx(1e-7, rel=0.005)

    def test_ks_against_unit_exponential(self):
        s = RandomStream(11)
        rate = 1e7
        gaps = np.array([sample_exponential(s, rate) for _ in range(100_000)]) * rate
        result = stats.kstest(gaps, "expon")
        critical_1pct = 1.63 / math.sqrt(len(gaps))
        assert result.statistic < critical_1pct


class TestDestination:
    def test_point_mass(self):
        s = RandomStream(3)
        assert {sample_destination(s, [1, 0, 0, 0]) for _ in range(1000)} == {0}

    def test_cdf_inversion(self):
        assert sample_destination(FixedStream([0.75]), [0.5, 0.5]) == 1
        assert sample_destination(FixedStream([0.5]), [0.5, 0.5]) == 0

    def test_uniform_frequencies(self):
        s = RandomStream(5)
        n = 100_000
        counts = np.bincount([sample_destination(s, uniform_weights(4)) for _ in range(n)], minlength=4)
        sd = math.sqrt(n * 0.25 * 0.75)
        assert np.all(np.abs(counts - n / 4) < 4 * sd)

    @pytest.mark.parametrize("weights", [[0.5, 0.6], [-0.1, 1.1], [], [float("nan"), 1.0]])
    def test_invalid(self, weights):
        with pytest.raises(TrafficError):
            sample_destination(RandomStream(0), weights)


class TestSources:
    def test_first_arrival_is_first_gap(self):
        src = PoissonSource(2.0, FixedStream([math.exp(-1), 0.1]), (1.0,), PacketIds(), (0,))
        t, pkt = src.next_arrival()
        assert t == pytest.approx(0.5)
        assert pkt.created_at == t
        assert pkt.output_port == 0

    def test_ids_increase_in_merged_time_order(self):
        spec = TrafficSpec(1e7, 4, seed=9)
        merged = MergedArrivals(build_sources(spec, RandomStream(9)))
        last_t, last_id = -1.0, -1
        for _ in range(5000):
            t, pkt = merged.next_arrival()
            assert t >= last_t
            assert pkt.id > last_id
            last_t, last_id = t, pkt.id

    def test_per_source_rate(self):
        spec = TrafficSpec(1e7, 4, seed=1)
        src = build_sources(spec, RandomStream(1))[2]
        for _ in range(50_000):
            t, pkt = src.next_arrival()
            assert pkt.input_port == 2
        assert 50_000 / t == pytest.approx(1e7, rel=0.02)

    def test_same_seed_same_sequence(self):
        def run():
            spec = TrafficSpec(1e7, 4, seed=123)
            merged = MergedArrivals(build_sources(spec, RandomStream(123)))
            return [(t, p.input_port, p.output_port) for t, p in (merged.next_arrival() for _ in range(2000))]

        assert run() == run()

    def test_sources_are_independent_of_each_other(self):
        # source 1's stream doesn't depend on how many other sources exist
        master = RandomStream(55)
        two = build_sources(TrafficSpec(1e7, 2), master)
        four = build_sources(TrafficSpec(1e7, 4), master)
        a = [two[1].next_arrival()[0] for _ in range(100)]
        b = [four[1].next_arrival()[0] for _ in range(100)]
        assert a == b

    def test_demux_wiring(self):
        spec = TrafficSpec(1e7, 4, seed=2)
        (src,) = build_sources(spec, RandomStream(2), wiring="demux")
        assert src.rate == 4e7
        ports = [src.next_arrival()[1].input_port for _ in range(40_000)]
        counts = np.bincount(ports, minlength=4)
        assert np.all(np.abs(counts - 10_000) < 4 * math.sqrt(40_000 * 0.25 * 0.75))

    def test_unknown_wiring(self):
        with pytest.raises(TrafficError):
            build_sources(TrafficSpec(1.0), RandomStream(0), wiring="bogus")

    def test_spec_validation(self):
        with pytest.raises(TrafficError):
            TrafficSpec(0.0)
        with pytest.raises(TrafficError):
            TrafficSpec(1.0, destination_weights=(0.3, 0.3))
