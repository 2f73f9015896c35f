"""Session statistics derived from a history: improvement over -O3, windows, per-group attribution."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from .evaluation import ReferenceResult
from .history import HistoryRecord

WINDOW = 50
REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
CSV_COLUMNS = ["iteration", "improvement_pct", "best_improvement_pct", "mutated_group", "status"]
AGGREGATION = (
    "improvement_pct = (perf_O3 - perf) / perf_O3 * 100 per valid record; "
    "window_stats = mean over valid records in consecutive blocks of 50 records (null if none valid); "
    "best_curve = improvement of the running minimum perf (null before the first valid record); "
    "group_contrib = mean improvement over valid records whose mutated_group is the group; "
    "cross-benchmark summaries take the arithmetic mean of per-benchmark values"
)


def improvement(perf_O3: float, perf: float) -> float:
    return (perf_O3 - perf) / perf_O3 * 100.0


@dataclass(frozen=True)
class SessionReport:
    algorithm: str | None
    records: int
    valid_records: int
    perf_O3: float
    best_bits: str | None
    best_perf: float | None
    improvement_pct: float | None
    window_stats: list
    best_curve: list
    group_contrib: dict
    per_record: list  # improvement per record, None where invalid
    aggregation: str = AGGREGATION

    def to_dict(self) -> dict:
        return asdict(self)


def build_report(history: Sequence[HistoryRecord], ref: ReferenceResult) -> SessionReport:
    if not history:
        raise ValueError("cannot build a report from an empty history")
    per_record: list[float | None] = []
    best_curve: list[float | None] = []
    best_perf, best_bits = None, None
    groups: dict[int, list[float]] = {}
    for rec in history:
        m = rec.measurement
        if m.valid:
            imp = improvement(ref.perf_O3, m.perf)
            per_record.append(imp)
            if best_perf is None or m.perf < best_perf:
                best_perf, best_bits = m.perf, rec.bits
            if rec.mutated_group is not None:
                groups.setdefault(rec.mutated_group, []).append(imp)
        else:
            per_record.append(None)
        best_curve.append(None if best_perf is None else improvement(ref.perf_O3, best_perf))

    windows = []
    for start in range(0, len(per_record), WINDOW):
        block = per_record[start:start + WINDOW]
        vals = [v for v in block if v is not None]
        windows.append({
            "start": start,
            "end": start + len(block),
            "count": len(block),
            "valid": len(vals),
            "mean_improvement_pct": sum(vals) / len(vals) if vals else None,
        })
    contrib = {
        str(g): {"count": len(v), "mean_improvement_pct": sum(v) / len(v)}
        for g, v in sorted(groups.items())
    }
    return SessionReport(
        algorithm=history[0].algorithm,
        records=len(history),
        valid_records=sum(v is not None for v in per_record),
        perf_O3=ref.perf_O3,
        best_bits=best_bits,
        best_perf=best_perf,
        improvement_pct=None if best_perf is None else improvement(ref.perf_O3, best_perf),
        window_stats=windows,
        best_curve=best_curve,
        group_contrib=contrib,
        per_record=per_record,
    )


def report_csv(history: Sequence[HistoryRecord], report: SessionReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec, imp, best in zip(history, report.per_record, report.best_curve):
        w.writerow([
            rec.iteration,
            "" if imp is None else repr(imp),
            "" if best is None else repr(best),
            "" if rec.mutated_group is None else rec.mutated_group,
            rec.measurement.status.value,
        ])
    return buf.getvalue()


def write_report(session_dir, history: Sequence[HistoryRecord], report: SessionReport) -> None:
    d = Path(session_dir)
    (d / REPORT_JSON).write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    (d / REPORT_CSV).write_text(report_csv(history, report))
