"""Cross-seed summaries, paired comparisons and CSV tables from run files."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .energy import detector_overhead_pct, extrapolate_annual
from .exceptions import DataError, InsufficientDataError, RetrainSimError, ValidationError
from .policy import CONFIGURATION_NAMES
from .sim import LifecycleReport
from .stats import iqr, median_difference, wilcoxon_signed_rank

logger = logging.getLogger(__name__)

METRICS = ("train_detect_j", "infer_j", "mean_roc_auc")

SUMMARY_COLUMNS = (
    "config", "n_seeds",
    "train_detect_j_median", "train_detect_j_iqr",
    "infer_j_median", "infer_j_iqr",
    "mean_roc_auc_median", "mean_roc_auc_iqr",
    "retrain_count_median", "overhead_pct", "annual_train_detect_j",
)
COMPARISON_COLUMNS = (
    "config_a", "config_b", "metric", "n_pairs", "wilcoxon_w", "p_value", "median_difference", "significant",
)
FIGURE_COLUMNS = (
    "config", "seed", "period", "retrained", "drift_detected", "roc_auc",
    "cumulative_train_j", "cumulative_detect_j", "cumulative_infer_j",
)


@dataclass
class RunArtifact:
    reports: list[LifecycleReport]
    fingerprint: str

    def by_config(self) -> dict[str, list[LifecycleReport]]:
        out: dict[str, list[LifecycleReport]] = {}
        for r in sorted(self.reports, key=_report_key):
            out.setdefault(r.name, []).append(r)
        return out


def _config_rank(name: str) -> tuple[int, str]:
    return (CONFIGURATION_NAMES.index(name) if name in CONFIGURATION_NAMES else len(CONFIGURATION_NAMES), name)


def _report_key(r: LifecycleReport):
    return (_config_rank(r.name), r.seed)


def make_artifact(reports: Iterable[LifecycleReport]) -> RunArtifact:
    reports = list(reports)
    if not reports:
        raise InsufficientDataError("no run reports")
    prints = {r.stream_fingerprint for r in reports}
    if len(prints) > 1:
        raise ValidationError(f"run reports come from {len(prints)} different streams")
    keys = [(r.name, r.seed) for r in reports]
    if len(set(keys)) != len(keys):
        raise ValidationError("duplicate (config, seed) run reports")
    return RunArtifact(sorted(reports, key=_report_key), prints.pop())


def load_runs(run_dir) -> RunArtifact:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise DataError(f"{run_dir}: not a directory")
    reports = []
    for path in sorted(run_dir.glob("*_seed*.json")):
        try:
            reports.append(LifecycleReport.from_dict(json.loads(path.read_text(encoding="utf-8"))))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{path}: unreadable run report ({exc})") from exc
    if not reports:
        raise InsufficientDataError(f"{run_dir}: no *_seed*.json run reports")
    return make_artifact(reports)


def metric_value(report: LifecycleReport, metric: str) -> float | None:
    if metric == "train_detect_j":
        return report.ledger.train_total + report.ledger.detect_total
    if metric == "infer_j":
        return report.ledger.infer_total
    if metric == "mean_roc_auc":
        return report.mean_roc_auc
    raise ValidationError(f"unknown metric {metric!r}")


@dataclass
class Summary:
    rows: list[dict]
    figure_rows: list[dict] = field(default_factory=list)


def _median(values: Sequence[float]) -> float | None:
    values = [v for v in values if v is not None]
    return float(np.median(values)) if values else None


def _iqr(values: Sequence[float]) -> float | None:
    values = [v for v in values if v is not None]
    return iqr(values) if values else None


def summarize_runs(runs: RunArtifact) -> Summary:
    rows = []
    for name, reports in runs.by_config().items():
        td = [metric_value(r, "train_detect_j") for r in reports]
        inf = [metric_value(r, "infer_j") for r in reports]
        auc = [r.mean_roc_auc for r in reports]
        row = {
            "config": name,
            "n_seeds": len(reports),
            "train_detect_j_median": _median(td),
            "train_detect_j_iqr": _iqr(td),
            "infer_j_median": _median(inf),
            "infer_j_iqr": _iqr(inf),
            "mean_roc_auc_median": _median(auc),
            "mean_roc_auc_iqr": _iqr(auc),
            "retrain_count_median": _median([r.retrain_count for r in reports]),
            "overhead_pct": None,
            "annual_train_detect_j": None,
        }
        if reports[0].config.get("trigger") == "informed":
            row["overhead_pct"] = _median([
                detector_overhead_pct(r.ledger.detect_total, r.ledger.train_total) for r in reports
            ])
        span_value, span_unit = reports[0].config.get("span_value"), reports[0].config.get("span_unit")
        if span_value and span_unit:
            row["annual_train_detect_j"] = extrapolate_annual(row["train_detect_j_median"], span_value, span_unit)
        rows.append(row)
    return Summary(rows, figure_rows(runs))


def figure_rows(runs: RunArtifact) -> list[dict]:
    out = []
    for r in runs.reports:
        led = {row["period"]: row for row in r.ledger.to_dicts()}
        for rec in r.records:
            e = led[rec.period]
            out.append({
                "config": r.name,
                "seed": r.seed,
                "period": rec.period,
                "retrained": int(rec.retrained),
                "drift_detected": None if rec.drift_detected is None else int(rec.drift_detected),
                "roc_auc": rec.roc_auc,
                "cumulative_train_j": e["cumulative_train_j"],
                "cumulative_detect_j": e["cumulative_detect_j"],
                "cumulative_infer_j": e["cumulative_infer_j"],
            })
    return out


def compare_runs(runs: RunArtifact, pairs: Sequence[tuple[str, str]], alpha: float = 0.05) -> list[dict]:
    """Paired Wilcoxon tests over seeds shared by each configuration pair."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must be in (0, 1)")
    grouped = runs.by_config()
    rows = []
    for a, b in pairs:
        for name in (a, b):
            if name not in grouped:
                raise ValidationError(f"no runs for configuration {name!r}")
        ra = {r.seed: r for r in grouped[a]}
        rb = {r.seed: r for r in grouped[b]}
        seeds = sorted(set(ra) & set(rb))
        for metric in METRICS:
            va, vb = [], []
            for s in seeds:
                x, y = metric_value(ra[s], metric), metric_value(rb[s], metric)
                if x is not None and y is not None:
                    va.append(x)
                    vb.append(y)
            row = {
                "config_a": a, "config_b": b, "metric": metric, "n_pairs": len(va),
                "wilcoxon_w": None, "p_value": None,
                "median_difference": median_difference(va, vb) if va else None,
                "significant": None,
            }
            try:
                res = wilcoxon_signed_rank(va, vb)
            except InsufficientDataError as exc:
                logger.info("%s vs %s on %s: %s", a, b, metric, exc)
            else:
                row.update(wilcoxon_w=res.statistic, p_value=res.p_value, significant=int(res.p_value < alpha))
            rows.append(row)
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row[c]) for c in columns])
    except OSError as exc:
        raise RetrainSimError(f"{path}: {exc.strerror or exc}") from exc


def emit_tables(summary: Summary, comparisons: Sequence[dict], out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RetrainSimError(f"{out_dir}: {exc.strerror or exc}") from exc
    paths = [out_dir / "summary.csv", out_dir / "comparisons.csv", out_dir / "figure_data.csv"]
    _write_csv(paths[0], SUMMARY_COLUMNS, summary.rows)
    _write_csv(paths[1], COMPARISON_COLUMNS, comparisons)
    _write_csv(paths[2], FIGURE_COLUMNS, summary.figure_rows)
    return paths
