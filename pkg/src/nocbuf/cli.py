"""Command-line experiment runner.

    nocbuf analytics            closed-form M/M/1/N table for both buffers
    nocbuf simulate             discrete-event runs (queueing | voq | cycle)
    nocbuf compare              both buffers on common random numbers
    nocbuf cycle                clock-cycle latency budget table

Settings resolve as: built-in defaults < ``NOCBUF_SEED`` < ``--config`` file
(``key = value`` lines) < command-line flags. Exit codes: 0 ok, 2 bad
configuration, 3 output could not be written.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Any

from . import __version__
from .analytics import (AnalyticsError, QueueSpec, compare_architectures, expected_occupancy,
                        queue_metrics)
from .cyclemodel import ContentionModel, CycleBudget, CycleModelError, latency_table
from .metrics import ReplicationReport
from .simulation import SimConfig, run_compare, run_replications

EXIT_CONFIG = 2
EXIT_IO = 3
SEED_ENV = "NOCBUF_SEED"

SIM_HEADER = (
    "arch,mode,lambda,mu,capacity,seed,replications,generated,served,blocked,"
    "mean_latency_s,ci95_s,p95_s,blocking_prob,throughput_pps"
).split(",")
ANALYTICS_HEADER = (
    "arch,lambda,mu,capacity,rho,p_block,expected_occupancy,naive_latency_s,effective_latency_s"
).split(",")
CYCLE_HEADER = (
    "arch,source,penalty_cc,cycles,latency_ns,improvement_relative_pct,improvement_penalty_pct"
).split(",")

DEFAULTS: dict[str, Any] = {
    "mode": "queueing",
    "arch": "both",
    "lambda": 10e6,
    "mu": 10.05e6,
    "capacity": 32,
    "common_capacity": None,
    "ports": 4,
    "packets": 50_000,
    "seed": 0,
    "replications": 5,
    "islip_iterations": 2,
    "warmup": 5000,
    "wiring": "independent",
    "store_cycles": 2,
    "schedule_cycles": 4,
    "traverse_cycles": 4,
    "clock_period_ns": 4.0,
    "crowding_threshold": 0.75,
    "moderate_penalty": 2,
    "severe_penalty": 4,
    "coupled": False,
    "workers": 1,
    "format": "csv",
    "out": None,
}

CASTS = {
    "mode": str, "arch": str, "lambda": float, "mu": float, "capacity": int,
    "common_capacity": int, "ports": int, "packets": int, "seed": int,
    "replications": int, "islip_iterations": int, "warmup": int, "wiring": str,
    "store_cycles": int, "schedule_cycles": int, "traverse_cycles": int,
    "clock_period_ns": float, "crowding_threshold": float, "moderate_penalty": int,
    "severe_penalty": int, "workers": int, "format": str, "out": str,
    "coupled": lambda v: str(v).strip().lower() in ("1", "true", "yes", "on"),
}


class ConfigError(Exception):
    pass


def _cast(key: str, value: Any) -> Any:
    if key not in CASTS:
        raise ConfigError(f"unknown setting {key!r}")
    if value is None:
        return None
    try:
        return CASTS[key](value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def read_config_file(path: str) -> dict[str, Any]:
    settings = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        settings[key] = _cast(key, value)
    return settings


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    cfg = dict(DEFAULTS)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed:
        cfg["seed"] = _cast("seed", env_seed)
    if args.config:
        cfg.update(read_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            cfg[key] = value
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg['format']!r}")
    if cfg["arch"] not in ("common", "distributed", "both"):
        raise ConfigError(f"arch must be common, distributed or both, got {cfg['arch']!r}")
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if not 1 <= cfg["islip_iterations"] <= cfg["ports"]:
        raise ConfigError(f"islip_iterations must lie in 1..{cfg['ports']}")
    if cfg["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


def budget_of(cfg: dict) -> CycleBudget:
    return CycleBudget(cfg["store_cycles"], cfg["schedule_cycles"], cfg["traverse_cycles"],
                       cfg["clock_period_ns"])


def sim_config(cfg: dict, mode: str | None = None) -> SimConfig:
    return SimConfig(
        mode=mode or cfg["mode"],
        lam=cfg["lambda"],
        mu=cfg["mu"],
        capacity=cfg["capacity"],
        common_capacity=cfg["common_capacity"],
        ports=cfg["ports"],
        packets=cfg["packets"],
        seed=cfg["seed"],
        replications=cfg["replications"],
        islip_iterations=cfg["islip_iterations"],
        warmup=cfg["warmup"],
        wiring=cfg["wiring"],
        budget=budget_of(cfg),
        contention=ContentionModel(
            crowding_threshold=cfg["crowding_threshold"],
            moderate_penalty=cfg["moderate_penalty"],
            severe_penalty=cfg["severe_penalty"],
        ),
    )


# -- report rows -----------------------------------------------------------

def _num(x: float | None) -> float | None:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return x


def sim_row(rep: ReplicationReport, config: SimConfig) -> dict[str, Any]:
    arch = config.architecture(rep.arch)
    latency = rep.estimate("mean_latency")
    return {
        "arch": rep.arch,
        "mode": rep.mode,
        "lambda": config.lam,
        "mu": config.mu,
        "capacity": arch.capacity,
        "seed": config.seed,
        "replications": rep.replications,
        "generated": rep.generated,
        "served": rep.served,
        "blocked": rep.blocked,
        "mean_latency_s": _num(latency.mean),
        "ci95_s": _num(latency.half_width),
        "p95_s": _num(rep.estimate("p95_latency").mean),
        "blocking_prob": _num(rep.estimate("blocking_probability").mean),
        "throughput_pps": _num(rep.estimate("throughput").mean),
    }


def sim_details(rep: ReplicationReport) -> dict[str, Any]:
    out = {}
    for key in ("mean_latency", "mean_latency_raw", "blocking_probability",
                "time_average_occupancy", "time_average_occupancy_trimmed", "throughput",
                "mean_cycle_latency_ns"):
        est = rep.estimate(key)
        if all(v is None or math.isnan(v) for v in est.values):
            continue
        out[key] = {"mean": _num(est.mean), "ci95": _num(est.half_width),
                    "per_replication": [_num(v) for v in est.values]}
    out["replication_seeds"] = [r.seed for r in rep.runs]
    return out


def analytics_rows(cfg: dict) -> tuple[list[dict], dict]:
    base = QueueSpec(cfg["lambda"], cfg["mu"], cfg["capacity"])
    cmp = compare_architectures(base, cfg["ports"])
    common = cmp.common
    if cfg["common_capacity"] is not None:
        pooled = base.scaled(cfg["ports"])
        common = queue_metrics(QueueSpec(pooled.arrival_rate, pooled.service_rate, cfg["common_capacity"]))
    rows = []
    for name, m in (("common", common), ("distributed", cmp.distributed)):
        rows.append({
            "arch": name,
            "lambda": m.spec.arrival_rate,
            "mu": m.spec.service_rate,
            "capacity": m.spec.capacity,
            "rho": m.rho,
            "p_block": m.blocking_probability,
            "expected_occupancy": m.expected_occupancy,
            "naive_latency_s": m.naive_latency,
            "effective_latency_s": m.effective_latency,
        })
    summary = {
        "naive_latency_ratio_distributed_over_common": cmp.naive_latency_ratio,
        "effective_latency_ratio_distributed_over_common": cmp.effective_latency_ratio,
        "blocking_ratio_distributed_over_common": cmp.blocking_ratio,
        "naive_latency_improvement_pct": cmp.naive_improvement_percent,
        "latency_definitions": {
            "naive_latency_s": "E(n) / offered arrival rate",
            "effective_latency_s": "E(n) / admitted arrival rate (Little's law, served packets)",
        },
        "discrepancies": discrepancies(),
    }
    return rows, summary


def discrepancies() -> list[dict]:
    """Published reference figures for this router that the formulas do not reproduce."""
    rho = 0.995
    e32 = expected_occupancy(rho, 32)
    e128 = expected_occupancy(rho, 128)
    d, c = e32 / 10e6, e128 / 40e6
    return [
        {
            "quantity": "E(n), N=32, rho=0.995",
            "reference_value": 2618,
            "formula_value": e32,
            "reason": "intermediate step evaluates 33 * 0.995**32 as 281; it is about 28.1",
        },
        {
            "quantity": "naive latency improvement of common over distributed (%)",
            "reference_value": 46,
            "formula_value": 100.0 * (d - c) / d,
            "reason": "follows from the incorrect E(n) for N=32",
        },
        {
            "quantity": "E(n), N=128, rho=0.995",
            "reference_value": 56,
            "formula_value": e128,
            "reason": "rounded intermediate powers",
        },
    ]


def cycle_rows(cfg: dict) -> list[dict]:
    rows = []
    for r in latency_table(budget_of(cfg), (cfg["moderate_penalty"], cfg["severe_penalty"])):
        rows.append({
            "arch": r.arch, "source": "budget", "penalty_cc": r.penalty_cc, "cycles": r.cycles,
            "latency_ns": r.latency_ns, "improvement_relative_pct": r.improvement_relative_pct,
            "improvement_penalty_pct": r.improvement_penalty_pct,
        })
    return rows


def coupled_cycle_rows(cfg: dict, workers: int) -> tuple[list[dict], dict]:
    config = sim_config(cfg, mode="cycle")
    reports = run_compare(config, workers)
    rows = []
    for name in ("common", "distributed"):
        est = reports[name].estimate("mean_cycle_latency_ns")
        rows.append({
            "arch": name, "source": "simulated", "penalty_cc": None, "cycles": None,
            "latency_ns": _num(est.mean), "improvement_relative_pct": None,
            "improvement_penalty_pct": None,
        })
    c, d = rows[0]["latency_ns"], rows[1]["latency_ns"]
    if c is not None and d:
        rows[1]["improvement_relative_pct"] = 100.0 * (d - c) / d
    return rows, {name: sim_details(rep) for name, rep in reports.items()}


# -- emission --------------------------------------------------------------

def _csv_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(rows: list[dict], header: list[str], fmt: str, document: dict) -> str:
    if fmt == "json":
        doc = dict(document)
        doc["rows"] = rows
        return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_value(row.get(k)) for k in header])
    return buf.getvalue()


def emit(rows: list[dict], header: list[str], cfg: dict, document: dict) -> None:
    """Write the report. CSV files get the resolved config in ``<out>.meta.json``."""
    text = render(rows, header, cfg["format"], document)
    out = cfg["out"]
    if out is None or out == "-":
        sys.stdout.write(text)
        if cfg["format"] == "csv":
            print("# config: " + json.dumps(document["config"], sort_keys=True), file=sys.stderr)
        return
    with open(out, "w", newline="") as fh:
        fh.write(text)
    if cfg["format"] == "csv":
        meta = {k: v for k, v in document.items() if k != "rows"}
        with open(out + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")


# -- subcommands -----------------------------------------------------------

def _document(command: str, cfg: dict) -> dict:
    return {"tool": "nocbuf", "version": __version__, "command": command,
            "config": {k: v for k, v in cfg.items() if k not in ("out", "workers")}}


def cmd_analytics(cfg: dict) -> None:
    rows, summary = analytics_rows(cfg)
    doc = _document("analytics", cfg)
    doc["summary"] = summary
    emit(rows, ANALYTICS_HEADER, cfg, doc)


def cmd_cycle(cfg: dict) -> None:
    rows = cycle_rows(cfg)
    doc = _document("cycle", cfg)
    doc["conventions"] = {
        "improvement_relative_pct": "100 * (distributed - common) / distributed",
        "improvement_penalty_pct": "100 * (distributed - common) / 12 CC",
    }
    if cfg["coupled"]:
        sim, details = coupled_cycle_rows(cfg, cfg["workers"])
        rows += sim
        doc["simulation"] = details
    emit(rows, CYCLE_HEADER, cfg, doc)


def cmd_simulate(cfg: dict, command: str = "simulate") -> None:
    config = sim_config(cfg)
    archs = ("common", "distributed") if cfg["arch"] == "both" else (cfg["arch"],)
    reports = {a: run_replications(config, a, cfg["workers"]) for a in archs}
    rows = [sim_row(reports[a], config) for a in archs]
    doc = _document(command, cfg)
    doc["details"] = {a: sim_details(reports[a]) for a in archs}
    if len(archs) == 2:
        c, d = rows[0]["mean_latency_s"], rows[1]["mean_latency_s"]
        cb, db = rows[0]["blocking_prob"], rows[1]["blocking_prob"]
        doc["comparison"] = {
            "latency_improvement_pct": 100.0 * (d - c) / d if c is not None and d else None,
            "blocking_ratio_distributed_over_common": db / cb if cb else None,
        }
    emit(rows, SIM_HEADER, cfg, doc)


def cmd_compare(cfg: dict) -> None:
    mode = cfg["mode"]
    if mode == "analytics":
        return cmd_analytics(cfg)
    if mode == "cycle":
        return cmd_cycle(cfg)
    cfg = dict(cfg, arch="both")
    return cmd_simulate(cfg, "compare")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nocbuf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nocbuf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key = value settings file")
    common.add_argument("--lambda", dest="lambda", type=float, help="arrival rate per input port (packets/s)")
    common.add_argument("--mu", type=float, help="service rate per port (packets/s)")
    common.add_argument("--capacity", type=int, help="distributed buffer size per input (packets)")
    common.add_argument("--common-capacity", type=int, help="common buffer size (default ports x capacity)")
    common.add_argument("--ports", type=int, help="router ports (default 4)")
    common.add_argument("--seed", type=int, help=f"master seed (default 0, or ${SEED_ENV})")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", help="output path ('-' for stdout)")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--mode", choices=("analytics", "queueing", "voq", "cycle"))
    sim.add_argument("--arch", choices=("common", "distributed", "both"))
    sim.add_argument("--packets", type=int, help="packets generated per replication")
    sim.add_argument("--replications", type=int)
    sim.add_argument("--islip-iterations", dest="islip_iterations", type=int)
    sim.add_argument("--warmup", type=int, help="served packets dropped from latency statistics")
    sim.add_argument("--wiring", choices=("independent", "demux"))
    sim.add_argument("--workers", type=int, help="replications run in parallel processes")

    cyc = argparse.ArgumentParser(add_help=False)
    cyc.add_argument("--store-cycles", dest="store_cycles", type=int)
    cyc.add_argument("--schedule-cycles", dest="schedule_cycles", type=int)
    cyc.add_argument("--traverse-cycles", dest="traverse_cycles", type=int)
    cyc.add_argument("--clock-period-ns", dest="clock_period_ns", type=float)
    cyc.add_argument("--crowding-threshold", dest="crowding_threshold", type=float)
    cyc.add_argument("--moderate-penalty", dest="moderate_penalty", type=int)
    cyc.add_argument("--severe-penalty", dest="severe_penalty", type=int)

    sub.add_parser("analytics", parents=[common], help="closed-form M/M/1/N table")
    sub.add_parser("simulate", parents=[common, sim, cyc], help="discrete-event simulation")
    sub.add_parser("compare", parents=[common, sim, cyc], help="common vs distributed on identical seeds")
    p = sub.add_parser("cycle", parents=[common, sim, cyc], help="clock-cycle latency table")
    p.add_argument("--coupled", action="store_true", help="add per-packet penalties from a voq simulation")
    return parser


COMMANDS = {"analytics": cmd_analytics, "simulate": cmd_simulate, "compare": cmd_compare, "cycle": cmd_cycle}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        if args.command == "simulate" and cfg["mode"] == "analytics":
            raise ConfigError("simulate needs --mode queueing, voq or cycle")
        if args.command in ("simulate", "compare") and cfg["mode"] not in ("analytics", "cycle"):
            sim_config(cfg)  # fail fast on bad parameters
        COMMANDS[args.command](cfg)
    except (ConfigError, AnalyticsError, CycleModelError, ValueError) as exc:
        print(f"nocbuf: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"nocbuf: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
