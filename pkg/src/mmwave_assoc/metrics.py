"""Per-period metric records, CSV emission, and summary aggregation.

The CSV header is a fixed contract:
period,policy,seed,active_vehicles,total_rate_bps,reference_rate_bps,
cum_regret_bits,handovers,handover_rate,noncompetitive_ratio,misid_prob

Floats are written in shortest round-trip form (repr), so re-reading a CSV
reconstructs the series exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

CSV_HEADER = [
    "period",
    "policy",
    "seed",
    "active_vehicles",
    "total_rate_bps",
    "reference_rate_bps",
    "cum_regret_bits",
    "handovers",
    "handover_rate",
    "noncompetitive_ratio",
    "misid_prob",
]


@dataclass
class PeriodRecord:
    period: int
    active_vehicles: int
    total_rate_bps: float
    reference_rate_bps: float
    cum_regret_bits: float
    handovers: int
    handover_rate: float
    noncompetitive_ratio: float
    misid_prob: float


@dataclass
class MetricsSeries:
    policy: str
    seed: int
    config_hash: str
    records: list[PeriodRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, rec: PeriodRecord) -> None:
        if self.records and rec.period <= self.records[-1].period:
            raise ValueError("periods must be strictly increasing")
        self.records.append(rec)


def _fmt(x) -> str:
    return repr(float(x))


def write_metrics(series: MetricsSeries, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for r in series.records:
            w.writerow(
                [
                    r.period,
                    series.policy,
                    series.seed,
                    r.active_vehicles,
                    _fmt(r.total_rate_bps),
                    _fmt(r.reference_rate_bps),
                    _fmt(r.cum_regret_bits),
                    r.handovers,
                    _fmt(r.handover_rate),
                    _fmt(r.noncompetitive_ratio),
                    _fmt(r.misid_prob),
                ]
            )


def read_metrics(path: str | Path) -> MetricsSeries:
    path = Path(path)
    with path.open() as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError(f"{path}: unexpected CSV header {rows[0] if rows else '(empty)'}")
    series = None
    for row in rows[1:]:
        policy, seed = row[1], int(row[2])
        if series is None:
            series = MetricsSeries(policy=policy, seed=seed, config_hash="")
        series.append(
            PeriodRecord(
                period=int(row[0]),
                active_vehicles=int(row[3]),
                total_rate_bps=float(row[4]),
                reference_rate_bps=float(row[5]),
                cum_regret_bits=float(row[6]),
                handovers=int(row[7]),
                handover_rate=float(row[8]),
                noncompetitive_ratio=float(row[9]),
                misid_prob=float(row[10]),
            )
        )
    return series if series is not None else MetricsSeries(policy="", seed=0, config_hash="")


def summarize_run(path: str | Path) -> dict:
    """Scalar summary of one run CSV. Means over the last quarter of the
    horizon for rate-like metrics; final values for cumulative ones."""
    s = read_metrics(path)
    n = len(s.records)
    tail = s.records[max(0, n - n // 4) :] if n >= 4 else s.records
    per_veh = [
        r.total_rate_bps / r.active_vehicles for r in tail if r.active_vehicles > 0
    ]
    ref_per_veh = [
        r.reference_rate_bps / r.active_vehicles for r in tail if r.active_vehicles > 0
    ]
    last = s.records[-1] if s.records else None
    return {
        "policy": s.policy,
        "seed": s.seed,
        "periods": n,
        "final_cum_regret_bits": last.cum_regret_bits if last else 0.0,
        "mean_per_vehicle_rate_bps": _mean(per_veh),
        "mean_reference_per_vehicle_rate_bps": _mean(ref_per_veh),
        "mean_handover_rate": _mean([r.handover_rate for r in tail]),
        "final_noncompetitive_ratio": last.noncompetitive_ratio if last else 0.0,
        "mean_misid_prob": _mean([r.misid_prob for r in tail]),
    }


def _mean(xs) -> float:
    xs = list(xs)
    return (math.fsum(xs) / len(xs)) if xs else 0.0


def _std(xs) -> float:
    xs = list(xs)
    if len(xs) < 2:
        return 0.0
    m = _mean(xs)
    return math.sqrt(math.fsum((x - m) ** 2 for x in xs) / (len(xs) - 1))


SUMMARY_FIELDS = [
    "final_cum_regret_bits",
    "mean_per_vehicle_rate_bps",
    "mean_reference_per_vehicle_rate_bps",
    "mean_handover_rate",
    "final_noncompetitive_ratio",
    "mean_misid_prob",
]


def compare_runs(in_dir: str | Path) -> dict:
    """Aggregate every run CSV in a directory into per-group across-seed
    mean/std summaries. Runs are grouped by their meta sidecar (policy plus
    any swept knobs); runs without a sidecar group by policy alone."""
    in_dir = Path(in_dir)
    groups: dict[str, list[dict]] = {}
    for csv_path in sorted(in_dir.glob("*.csv")):
        run = summarize_run(csv_path)
        meta_path = csv_path.with_suffix(".meta.json")
        group_key = run["policy"]
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            run["meta"] = {k: meta[k] for k in ("lambda", "tx_power_dbm") if k in meta}
            parts = [run["policy"]] + [
                f"{k}={meta[k]}" for k in ("lambda", "tx_power_dbm") if k in meta
            ]
            group_key = "|".join(parts)
        groups.setdefault(group_key, []).append(run)
    out = {}
    for key, runs in sorted(groups.items()):
        entry: dict = {"n_runs": len(runs), "seeds": sorted(r["seed"] for r in runs)}
        for fname in SUMMARY_FIELDS:
            vals = [r[fname] for r in runs]
            entry[fname] = {"mean": _mean(vals), "std": _std(vals)}
        if runs and "meta" in runs[0]:
            entry["meta"] = runs[0]["meta"]
        out[key] = entry
    return out
