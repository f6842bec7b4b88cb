import pytest

from nocbuf.simulation import SimConfig, run_compare, run_once, run_replications


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"mode": "fluid"}, {"lam": 0.0}, {"mu": -1.0}, {"capacity": 0}, {"replications": 0},
        {"islip_iterations": 0}, {"wiring": "mesh"}, {"seed": -1}, {"destination_weights": (1.0,)},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SimConfig(**kw)

    def test_architectures(self):
        cfg = SimConfig()
        assert cfg.architecture("common").capacity == 128
        assert cfg.architecture("distributed").num_pools == 4
        assert SimConfig(common_capacity=100).architecture("common").capacity == 100


@pytest.mark.parametrize("mode", ["queueing", "voq", "cycle"])
@pytest.mark.parametrize("arch", ["common", "distributed"])
def test_conservation_and_sanity(mode, arch):
    r = run_once(SimConfig(mode=mode, packets=8000, warmup=500), arch, 17)
    assert r.generated == 8000
    assert r.generated == r.served + r.blocked + r.resident
    assert r.resident == 0
    assert r.latency.min > 0
    assert 0 <= r.time_average_occupancy <= (128 if arch == "common" else 128)
    assert all(0 <= x <= (128 if arch == "common" else 32) for x in r.pool_occupancy)
    assert (r.cycle_latency_ns is not None) == (mode == "cycle")


def test_voq_latency_at_least_one_slot():
    cfg = SimConfig(mode="voq", packets=5000)
    r = run_once(cfg, "distributed", 1)
    assert r.latency_raw.min >= 1 / cfg.mu * (1 - 1e-9)


def test_light_load_voq_latency_near_slot():
    cfg = SimConfig(mode="voq", lam=1e5, packets=3000, warmup=0)
    r = run_once(cfg, "common", 2)
    assert r.blocked == 0
    assert r.latency.mean < 2.5 / cfg.mu


def test_demux_wiring_runs():
    r = run_once(SimConfig(wiring="demux", packets=5000), "distributed", 4)
    assert r.generated == r.served + r.blocked


def test_replications_deterministic_and_distinct():
    cfg = SimConfig(packets=3000, replications=3, warmup=0)
    a = run_replications(cfg, "common")
    b = run_replications(cfg, "common")
    assert [r.latency.mean for r in a.runs] == [r.latency.mean for r in b.runs]
    assert len({r.seed for r in a.runs}) == 3


def test_parallel_matches_serial():
    cfg = SimConfig(packets=2000, replications=2, warmup=0)
    serial = run_replications(cfg, "distributed", 1)
    parallel = run_replications(cfg, "distributed", 2)
    assert [r.as_dict() for r in serial.runs] == [r.as_dict() for r in parallel.runs]


def test_compare_uses_common_random_numbers():
    cfg = SimConfig(packets=2000, replications=2, warmup=0)
    out = run_compare(cfg)
    assert [r.seed for r in out["common"].runs] == [r.seed for r in out["distributed"].runs]
    assert out["common"].generated == out["distributed"].generated
