"""Experiment execution and metric aggregation.

run_experiment runs the configured number of repetitions, seeding
repetition i with base_seed + i; every report is independent and the
whole experiment is reproducible byte for byte. Three metrics are
aggregated per (protocol, speed class): reachability (successful route
discoveries over attempts), average end-to-end delay over delivered data
packets, and total traffic received network-wide. Aggregates carry a
normal-approximation 90% confidence interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .config import ScenarioConfig, config_hash
from .metrics import MetricsReport
from .runner import Simulation

Z90 = float(stats.norm.ppf(0.95))  # two-sided 90% interval

SPEED_CLASS_MIXES = {
    "slow": (1.0, 0.0, 0.0),
    "med": (0.0, 1.0, 0.0),
    "fast": (0.0, 0.0, 1.0),
}

METRIC_NAMES = ("reachability", "average_ete_s", "total_traffic_received")


def run_experiment(cfg: ScenarioConfig, **sim_kwargs) -> list[MetricsReport]:
    """Run every repetition of one scenario; one report per repetition."""
    cfg.validate()
    reports = []
    for i in range(cfg.repetitions):
        sim = Simulation(cfg, cfg.base_seed + i, **sim_kwargs)
        reports.append(sim.run())
    return reports


# -- per-report metrics -----------------------------------------------------


def reachability(report: MetricsReport) -> float | None:
    """Successful discoveries over attempts; absent when nothing was tried."""
    if report.discovery_attempts == 0:
        return None
    return report.discovery_successes / report.discovery_attempts


def average_ete(report: MetricsReport) -> float | None:
    """Mean send-to-receive delay over delivered data packets only."""
    if not report.data_pairs:
        return None
    return float(np.mean([recv - send for send, recv in report.data_pairs]))


def total_traffic_received(report: MetricsReport) -> int:
    return report.total_messages_received


def metric_values(reports: list[MetricsReport], metric: str) -> list[float]:
    """Collect one metric across repetitions, dropping absent values."""
    fn = {
        "reachability": reachability,
        "average_ete_s": average_ete,
        "total_traffic_received": total_traffic_received,
    }[metric]
    values = [fn(r) for r in reports]
    return [float(v) for v in values if v is not None]


# -- aggregation ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Summary:
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    n: int


def summarize(values) -> Summary | None:
    """Mean, sample standard deviation and a 90% normal-approximation CI."""
    values = list(values)
    if not values:
        return None
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    half = Z90 * sd / np.sqrt(len(arr)) if len(arr) > 1 else 0.0
    return Summary(mean, sd, mean - half, mean + half, len(arr))


@dataclass(frozen=True, slots=True)
class ResultRow:
    protocol: str
    speed_class: str
    metric: str
    summary: Summary | None


def run_speed_sweep(
    cfg: ScenarioConfig, classes=("slow", "med", "fast"), **sim_kwargs
) -> tuple[list[ResultRow], dict]:
    """Run the scenario once per pure speed class and aggregate.

    Returns the CSV-ready rows plus the raw per-class report lists for
    callers that need more than the aggregates.
    """
    rows: list[ResultRow] = []
    raw: dict[str, list[MetricsReport]] = {}
    for cls in classes:
        class_cfg = cfg.with_overrides(class_mix=SPEED_CLASS_MIXES[cls])
        reports = run_experiment(class_cfg, **sim_kwargs)
        raw[cls] = reports
        for metric in METRIC_NAMES:
            rows.append(
                ResultRow(cfg.protocol, cls, metric,
                          summarize(metric_values(reports, metric)))
            )
    return rows, raw


# -- CSV ----------------------------------------------------------------------------


def emit_csv(rows: list[ResultRow], path, cfg: ScenarioConfig) -> None:
    """One row per (protocol, speed class, metric); header carries the
    config hash and base seed. Floats are written with repr so a parse
    round-trips exactly."""
    with open(path, "w") as fh:
        fh.write(f"# config_hash={config_hash(cfg)} base_seed={cfg.base_seed}\n")
        fh.write("protocol,speed_class,metric,mean,sd,ci_low,ci_high,n\n")
        for row in rows:
            s = row.summary
            if s is None:
                fh.write(f"{row.protocol},{row.speed_class},{row.metric},,,,,0\n")
            else:
                fh.write(
                    f"{row.protocol},{row.speed_class},{row.metric},"
                    f"{s.mean!r},{s.sd!r},{s.ci_low!r},{s.ci_high!r},{s.n}\n"
                )


def parse_csv(path) -> tuple[dict, list[dict]]:
    """Read back an emitted CSV; returns (header metadata, row dicts)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    meta = {}
    for token in lines[0].lstrip("# ").split():
        key, _, value = token.partition("=")
        meta[key] = value
    columns = lines[1].split(",")
    rows = []
    for line in lines[2:]:
        if not line:
            continue
        values = line.split(",")
        row = dict(zip(columns, values))
        for key in ("mean", "sd", "ci_low", "ci_high"):
            row[key] = float(row[key]) if row[key] else None
        row["n"] = int(row["n"])
        rows.append(row)
    return meta, rows
