"""Results aggregation and rendering: per-method statistics over prompts,
percent change against the unoptimized baseline, win counts, and the CSV /
plain-text report writers."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .fitness import FitnessWeights, RawScores, combine, delta_percent

__all__ = [
    "METRICS",
    "METHOD_ORDER",
    "MetricStats",
    "MethodSummary",
    "SummaryTable",
    "records_from_run_dir",
    "ingest_external_scores",
    "aggregate",
    "render_csv",
    "render_text",
    "parse_summary_csv",
]

METRICS = ("aesthetic", "clip", "fitness")
METHOD_ORDER = ("baseline_no_opt", "ga_mutated", "ga_empty", "ga_random", "random_search")


@dataclass(frozen=True)
class MetricStats:
    avg: float
    std: float
    max: float
    delta_pct: float


@dataclass(frozen=True)
class MethodSummary:
    method: str
    stats: dict  # metric name -> MetricStats
    wins: int


@dataclass(frozen=True)
class SummaryTable:
    methods: tuple[MethodSummary, ...]
    baseline_method: str
    n_prompts: Optional[int] = None  # unknown when rebuilt from a CSV

    def method(self, name: str) -> MethodSummary:
        for m in self.methods:
            if m.method == name:
                return m
        raise KeyError(name)


def _method_sort_key(name: str):
    try:
        return (0, METHOD_ORDER.index(name))
    except ValueError:
        return (1, name)


def records_from_run_dir(run_dir) -> list[dict]:
    """Collect final-best records from every completed unit summary under
    ``run_dir`` (as written by run_experiment)."""
    units = Path(run_dir) / "units"
    records: list[dict] = []
    for path in sorted(units.glob("*.json")):
        with open(path, "r", encoding="utf-8") as fh:
            summary = json.load(fh)
        if summary.get("status") != "complete":
            continue
        best = summary["best"]
        records.append(
            {
                "prompt_id": summary["prompt_id"],
                "method": summary["method"],
                "seed": summary["seed"],
                "aesthetic": best["aesthetic"],
                "clip": best["clip"],
                "fitness": best["fitness"],
            }
        )
    return records


def ingest_external_scores(
    path, method: str, weights: FitnessWeights = FitnessWeights()
) -> list[dict]:
    """Read externally produced per-prompt scores (CSV with header
    prompt_id,aesthetic,clip) and fold them into comparable records; their
    fitness is recomputed under the experiment's weights."""
    records: list[dict] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"prompt_id", "aesthetic", "clip"}
        missing = needed - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"external scores {path} missing columns: {sorted(missing)}")
        for row in reader:
            raw = RawScores(aesthetic=float(row["aesthetic"]), clip=float(row["clip"]))
            records.append(
                {
                    "prompt_id": row["prompt_id"].strip(),
                    "method": method,
                    "seed": 0,
                    "aesthetic": raw.aesthetic,
                    "clip": raw.clip,
                    "fitness": combine(raw, weights).combined,
                }
            )
    return records


def _seed_mean(values: Iterable[tuple[int, float]]) -> float:
    ordered = [v for _, v in sorted(values)]
    return math.fsum(ordered) / len(ordered)


def aggregate(records: Sequence[dict], baseline_method: str = "baseline_no_opt") -> SummaryTable:
    """Per-method mean / sample std / max of each metric over prompts, percent
    change of means against the baseline, and strict win counts (a tie on a
    prompt awards no one). Invariant to record order; multiple seeds for the
    same unit are averaged first."""
    grouped: dict[str, dict[str, list[tuple[int, dict]]]] = {}
    for rec in records:
        grouped.setdefault(rec["method"], {}).setdefault(rec["prompt_id"], []).append(
            (rec["seed"], rec)
        )
    if baseline_method not in grouped:
        raise ValueError(f"baseline method {baseline_method!r} has no records")

    prompt_ids = sorted(grouped[baseline_method])
    for method, per_prompt in grouped.items():
        if sorted(per_prompt) != prompt_ids:
            raise ValueError(
                f"method {method!r} covers prompts {sorted(per_prompt)}, "
                f"baseline covers {prompt_ids}"
            )

    # metric value per (method, prompt), averaged over seeds
    values: dict[str, dict[str, dict[str, float]]] = {}
    for method, per_prompt in grouped.items():
        values[method] = {}
        for prompt_id, entries in per_prompt.items():
            values[method][prompt_id] = {
                metric: _seed_mean((seed, rec[metric]) for seed, rec in entries)
                for metric in METRICS
            }

    wins = {method: 0 for method in grouped}
    for prompt_id in prompt_ids:
        scored = sorted(
            ((values[m][prompt_id]["fitness"], m) for m in grouped), reverse=True
        )
        if len(scored) == 1 or scored[0][0] > scored[1][0]:
            wins[scored[0][1]] += 1

    def _stats(series: list[float], base_mean: Optional[float]) -> MetricStats:
        n = len(series)
        mean = math.fsum(series) / n
        if n > 1:
            var = math.fsum((x - mean) ** 2 for x in series) / (n - 1)
        else:
            var = 0.0
        delta = delta_percent(mean, base_mean) if base_mean is not None else 0.0
        return MetricStats(avg=mean, std=math.sqrt(var), max=max(series), delta_pct=delta)

    base_means = {
        metric: math.fsum(values[baseline_method][p][metric] for p in prompt_ids)
        / len(prompt_ids)
        for metric in METRICS
    }

    summaries = []
    for method in sorted(grouped, key=_method_sort_key):
        stats = {}
        for metric in METRICS:
            series = [values[method][p][metric] for p in prompt_ids]
            base = None if method == baseline_method else base_means[metric]
            stats[metric] = _stats(series, base)
        summaries.append(MethodSummary(method=method, stats=stats, wins=wins[method]))
    return SummaryTable(
        methods=tuple(summaries),
        baseline_method=baseline_method,
        n_prompts=len(prompt_ids),
    )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return format(value, ".6g")


def render_csv(table: SummaryTable) -> str:
    """Byte-stable CSV, one row per (method, metric)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["method", "metric", "avg", "std", "max", "delta_pct", "wins"])
    for summary in table.methods:
        for metric in METRICS:
            s = summary.stats[metric]
            writer.writerow(
                [
                    summary.method,
                    metric,
                    _fmt(s.avg),
                    _fmt(s.std),
                    _fmt(s.max),
                    _fmt(s.delta_pct),
                    summary.wins,
                ]
            )
    return out.getvalue()


def parse_summary_csv(path) -> SummaryTable:
    """Rebuild a SummaryTable from a render_csv file."""
    rows: dict[str, dict[str, MetricStats]] = {}
    wins: dict[str, int] = {}
    order: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        needed = {"method", "metric", "avg", "std", "max", "delta_pct", "wins"}
        missing = needed - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"summary CSV {path} missing columns: {sorted(missing)}")
        for row in reader:
            method = row["method"]
            if method not in rows:
                rows[method] = {}
                order.append(method)
            rows[method][row["metric"]] = MetricStats(
                avg=float(row["avg"]),
                std=float(row["std"]),
                max=float(row["max"]),
                delta_pct=float(row["delta_pct"]),
            )
            wins[method] = int(row["wins"])
    methods = []
    for method in order:
        missing_metrics = [m for m in METRICS if m not in rows[method]]
        if missing_metrics:
            raise ValueError(f"method {method!r} missing metrics: {missing_metrics}")
        methods.append(MethodSummary(method=method, stats=rows[method], wins=wins[method]))
    if not methods:
        raise ValueError(f"summary CSV {path} is empty")
    baseline = next(
        (m.method for m in methods if all(s.delta_pct == 0.0 for s in m.stats.values())),
        methods[0].method,
    )
    return SummaryTable(methods=tuple(methods), baseline_method=baseline)


def render_text(table: SummaryTable) -> str:
    """Aligned plain-text table; per metric the best mean and best percent
    change are starred, as is the method with the highest mean fitness."""
    if not table.methods:
        raise ValueError("summary table has no methods")
    best_avg = {
        metric: max(m.stats[metric].avg for m in table.methods) for metric in METRICS
    }
    best_delta = {
        metric: max(m.stats[metric].delta_pct for m in table.methods)
        for metric in METRICS
    }
    best_fitness_method = max(
        table.methods, key=lambda m: m.stats["fitness"].avg
    ).method

    header = ["method"]
    for metric in METRICS:
        header += [f"{metric}_avg", f"{metric}_std", f"{metric}_max", f"{metric}_dpct"]
    header.append("wins")

    body: list[list[str]] = []
    for summary in table.methods:
        name = summary.method
        if name == best_fitness_method:
            name = f"*{name}*"
        row = [name]
        for metric in METRICS:
            s = summary.stats[metric]
            avg = f"{s.avg:.4f}"
            if s.avg == best_avg[metric]:
                avg = f"*{avg}*"
            delta = f"{s.delta_pct:.2f}"
            if s.delta_pct == best_delta[metric]:
                delta = f"*{delta}*"
            row += [avg, f"{s.std:.4f}", f"{s.max:.4f}", delta]
        row.append(str(summary.wins))
        body.append(row)

    widths = [
        max(len(header[i]), *(len(row[i]) for row in body)) for i in range(len(header))
    ]
    lines = [
        "  ".join(h.rjust(widths[i]) for i, h in enumerate(header)),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)))
    scope = f"{table.n_prompts} prompts; " if table.n_prompts is not None else ""
    lines.append(
        f"({scope}percent change vs {table.baseline_method}; "
        f"* marks the best mean / percent change per metric and the best-fitness method)"
    )
    return "\n".join(lines) + "\n"
