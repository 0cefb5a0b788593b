"""Per-run and per-sweep statistics and machine-readable results.

One CSV row per completed run plus a JSON summary of per-configuration
aggregates.  Emission is byte-stable: the same records always produce the
same files, independent of the order runs finished in.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

CSV_HEADER = (
    "scenario,algorithm,rate_pps,seed,generated,delivered,dropped,"
    "delivery_ratio,mean_delay_s,total_energy_mj,mobiles_used"
)

#: Metrics aggregated into the sweep summary.
AGGREGATED = (
    "delivery_ratio",
    "mean_delay_s",
    "total_energy_mj",
    "mobiles_used",
    "generated",
    "delivered",
    "dropped",
)


class MetricsError(ValueError):
    """Invalid aggregation or emission input."""


@dataclass(frozen=True)
class PlacementRecord:
    """One dispatched relief mobile, for the per-run placements report."""

    mobile: int
    target: tuple[float, float]
    served: tuple[int, ...]
    next_hop: int
    dispatched_at: float
    arrival_at: float
    activated_at: float  # -1.0 when the run ended before activation


@dataclass
class RunMetrics:
    """Everything measured over one simulation run."""

    generated: int
    delivered: int
    dropped: int
    residual: int
    mean_delay_s: float
    total_energy_mj: float
    mobiles_used: int
    cm_emitted: int = 0
    cm_lost: int = 0
    per_node_drops: dict[int, int] = field(default_factory=dict)
    per_node_energy_mj: dict[int, float] = field(default_factory=dict)
    placements: tuple[PlacementRecord, ...] = ()

    @property
    def delivery_ratio(self) -> float:
        """Delivered over generated; a traffic-free run counts as 1.0."""
        if self.generated == 0:
            return 1.0
        return self.delivered / self.generated


@dataclass(frozen=True)
class SweepRecord:
    """One (scenario, algorithm, rate, seed) run and its metrics."""

    scenario: str
    algorithm: str
    rate_pps: float
    seed: int
    metrics: RunMetrics

    def key(self) -> tuple[str, str, float, int]:
        return (self.scenario, self.algorithm, self.rate_pps, self.seed)

    def csv_row(self) -> str:
        m = self.metrics
        return (
            f"{self.scenario},{self.algorithm},{_fmt_rate(self.rate_pps)},"
            f"{self.seed},{m.generated},{m.delivered},{m.dropped},"
            f"{m.delivery_ratio:.6f},{m.mean_delay_s:.6f},"
            f"{m.total_energy_mj:.3f},{m.mobiles_used}"
        )


def _fmt_rate(rate: float) -> str:
    return f"{rate:g}"


def _metric_value(record: SweepRecord, name: str) -> float:
    if name == "delivery_ratio":
        return record.metrics.delivery_ratio
    return float(getattr(record.metrics, name))


def aggregate(records: Sequence[SweepRecord]) -> dict[str, tuple[float, float]]:
    """Mean and sample standard deviation per metric for one configuration.

    All records must share (scenario, algorithm, rate); a single record
    aggregates with a standard deviation of zero.
    """
    if not records:
        raise MetricsError("cannot aggregate an empty record list")
    groups = {(r.scenario, r.algorithm, r.rate_pps) for r in records}
    if len(groups) != 1:
        raise MetricsError(f"records span {len(groups)} configurations, expected 1")
    out = {}
    for name in AGGREGATED:
        values = [_metric_value(r, name) for r in records]
        mean = statistics.fmean(values)
        std = statistics.stdev(values) if len(values) > 1 else 0.0
        out[name] = (mean, std)
    return out


def group_records(
    records: Iterable[SweepRecord],
) -> dict[tuple[str, str, float], list[SweepRecord]]:
    """Records bucketed per (scenario, algorithm, rate), sorted keys."""
    groups: dict[tuple[str, str, float], list[SweepRecord]] = {}
    for rec in records:
        groups.setdefault((rec.scenario, rec.algorithm, rec.rate_pps), []).append(rec)
    return {k: groups[k] for k in sorted(groups)}


def emit(records: Sequence[SweepRecord], out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``sweep.csv`` and ``summary.json`` under ``out_dir``.

    Rows are sorted by (scenario, algorithm, rate, seed) so re-emitting the
    same records yields byte-identical files.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "sweep.csv"
        rows = sorted(records, key=SweepRecord.key)
        lines = [CSV_HEADER]
        lines.extend(r.csv_row() for r in rows)
        csv_path.write_text("\n".join(lines) + "\n")

        summary = []
        for (scenario, algorithm, rate), group in group_records(rows).items():
            stats = aggregate(group)
            summary.append(
                {
                    "scenario": scenario,
                    "algorithm": algorithm,
                    "rate_pps": rate,
                    "runs": len(group),
                    "mean": {k: stats[k][0] for k in AGGREGATED},
                    "std": {k: stats[k][1] for k in AGGREGATED},
                }
            )
        summary_path = out / "summary.json"
        summary_path.write_text(json.dumps({"groups": summary}, indent=2) + "\n")
    except OSError as exc:
        raise MetricsError(f"cannot write results under {out}: {exc}") from exc
    return csv_path, summary_path


def read_records(csv_path: str | Path) -> list[dict]:
    """Parse an emitted sweep.csv back into row dicts (typed fields)."""
    path = Path(csv_path)
    rows = []
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            row = dict(zip(header, parts))
            row["rate_pps"] = float(row["rate_pps"])
            row["seed"] = int(row["seed"])
            for k in ("generated", "delivered", "dropped", "mobiles_used"):
                row[k] = int(row[k])
            for k in ("delivery_ratio", "mean_delay_s", "total_energy_mj"):
                row[k] = float(row[k])
            rows.append(row)
    return rows
