"""Plain-text and CSV tables over experiment results.

Two comparison layouts are supported. ``dataset_by_strategy`` puts one
(dataset, model) pair per row with the five headline strategies as columns;
``n_ablation`` puts one (dataset, N) pair per row with the three square
aggregation flavors as columns. In both, the best value per row is marked
with a trailing ``*`` (ties are all marked); the CSV carries the bare
one-decimal values so it can be re-parsed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .errors import LayoutMismatchError
from .metrics import MetricName, format_percent
from .prompts import Aggregation, StrategyConfig, StrategyKind

LAYOUTS = ("dataset_by_strategy", "n_ablation")

_MAIN_COLUMNS = ("Baseline", "RAG", "CoT", "RaR", "SQuARE")
_ABLATION_COLUMNS = ("SQuARE", "+Summarize", "+Vote")


@dataclass(frozen=True)
class ResultSummary:
    """The slice of an experiment result the report tables need."""

    dataset_name: str
    model_name: str
    metric_name: MetricName
    strategy: StrategyConfig
    aggregate_percent: float
    capture_rate: float
    n_records: int


def _summary(result) -> ResultSummary:
    return result.summary() if hasattr(result, "summary") else result


def _main_column(strategy: StrategyConfig):
    order = {
        StrategyKind.BASELINE: 0,
        StrategyKind.RAG: 1,
        StrategyKind.COT: 2,
        StrategyKind.RAR: 3,
        StrategyKind.SQUARE: 4,
    }
    if strategy.kind is StrategyKind.SQUARE and strategy.aggregation is not Aggregation.NONE:
        return None
    return order[strategy.kind]


def _ablation_column(strategy: StrategyConfig):
    if strategy.kind is not StrategyKind.SQUARE:
        return None
    order = {Aggregation.NONE: 0, Aggregation.SUMMARIZE: 1, Aggregation.VOTE: 2}
    return order[strategy.aggregation]


def _collect(results, layout):
    if layout == "dataset_by_strategy":
        column_of = _main_column
        columns = _MAIN_COLUMNS
        key_of = lambda s: (s.dataset_name, s.model_name)
    else:
        column_of = _ablation_column
        columns = _ABLATION_COLUMNS
        key_of = lambda s: (s.dataset_name, s.strategy.n_questions)

    rows: dict[tuple, dict[int, ResultSummary]] = {}
    for result in results:
        summary = _summary(result)
        col = column_of(summary.strategy)
        if col is None:
            continue
        key = key_of(summary)
        cells = rows.setdefault(key, {})
        if col in cells:
            raise LayoutMismatchError(
                f"two results compete for row {key}, column {columns[col]}: "
                f"{cells[col].strategy.name} and {summary.strategy.name}"
            )
        cells[col] = summary
    if not rows:
        raise LayoutMismatchError(f"no results fit the {layout} layout")
    for key, cells in rows.items():
        metrics = {c.metric_name for c in cells.values()}
        if len(metrics) > 1:
            raise LayoutMismatchError(
                f"row {key} mixes metrics: {sorted(m.value for m in metrics)}"
            )
    return columns, rows


def _format_text_table(header: list[str], body: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in body:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = []
    for row in [header] + body:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def render_report(results, layout: str) -> tuple[str, str]:
    """Render results in the given layout; returns (text_table, csv_text).

    Results whose strategy has no column in the layout are skipped. Two
    results competing for one cell, or one row mixing metrics, raise
    LayoutMismatchError.
    """
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    columns, rows = _collect(results, layout)

    if layout == "dataset_by_strategy":
        label_headers = ["Dataset", "Model"]
        csv_headers = ["dataset", "model"] + [c.lower() for c in _MAIN_COLUMNS]
    else:
        label_headers = ["Dataset", "N"]
        csv_headers = ["dataset", "n", "square", "square_summarize", "square_vote"]

    body: list[list[str]] = []
    csv_rows: list[list[str]] = []
    for key in sorted(rows):
        cells = rows[key]
        rendered = {col: format_percent(s.aggregate_percent) for col, s in cells.items()}
        best = max(rendered.values(), key=float)
        text_row = [str(part) for part in key]
        csv_row = [str(part) for part in key]
        for col in range(len(columns)):
            if col in rendered:
                value = rendered[col]
                text_row.append(value + ("*" if float(value) == float(best) else ""))
                csv_row.append(value)
            else:
                text_row.append("-")
                csv_row.append("")
        body.append(text_row)
        csv_rows.append(csv_row)

    text = _format_text_table(label_headers + list(columns), body)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_headers)
    writer.writerows(csv_rows)
    return text, buf.getvalue()


def render_run_summary(results) -> tuple[str, str]:
    """One row per strategy of a single run: aggregate, capture rate, size."""
    header = ["Strategy", "Metric", "Aggregate", "CaptureRate", "N"]
    body = []
    csv_rows = []
    for result in results:
        summary = _summary(result)
        row = [
            summary.strategy.name,
            summary.metric_name.value,
            format_percent(summary.aggregate_percent),
            f"{summary.capture_rate:.3f}",
            str(summary.n_records),
        ]
        body.append(row)
        csv_rows.append(row)
    text = _format_text_table(header, body)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([h.lower() for h in header])
    writer.writerows(csv_rows)
    return text, buf.getvalue()
