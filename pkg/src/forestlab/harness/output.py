"""Writers for report rows and figure data.

CSV and JSON carry full precision; the markdown renderer mimics the
published tables (metrics as rows, experiments as columns, two decimals).
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from forestlab.harness.experiment import ReportRow
from forestlab.metrics import SliceBin

FIGURE_COLUMNS = ("bin_low", "bin_high", "bin_mid", "d_mse", "d_bias_sq", "d_var", "count")

_MARKDOWN_ROWS = (
    ("sigma_f", "sigma_f"),
    ("sigma_eps", "sigma_eps"),
    ("Bias^2 bagging", "bias_sq_bag"),
    ("Bias^2 forest", "bias_sq_forest"),
    ("Variance bagging", "var_bag"),
    ("Variance forest", "var_forest"),
    ("Tree variance bagging", "tree_var_bag"),
    ("Tree variance forest", "tree_var_forest"),
    ("Correlation bagging", "corr_bag"),
    ("Correlation forest", "corr_forest"),
    ("Irreducible", "irreducible"),
    ("MSE bagging", "mse_bag"),
    ("MSE forest", "mse_forest"),
    ("test statistic", "t_statistic"),
    ("relative difference (%)", "delta_r_percent"),
)


def _num(x) -> str:
    return repr(float(x))


def rows_to_csv(rows: list[ReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = ReportRow.field_names()
    writer.writerow(names)
    for row in rows:
        writer.writerow([row.label] + [_num(getattr(row, n)) for n in names[1:]])
    return buf.getvalue()


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def rows_to_json(rows: list[ReportRow]) -> str:
    payload = [{k: _json_value(v) for k, v in row.as_dict().items()} for row in rows]
    return json.dumps(payload, indent=2) + "\n"


def rows_to_markdown(rows: list[ReportRow]) -> str:
    header = "| | " + " | ".join(r.label for r in rows) + " |"
    sep = "|---|" + "---|" * len(rows)
    lines = [header, sep]
    for title, attr in _MARKDOWN_ROWS:
        cells = []
        for r in rows:
            v = getattr(r, attr)
            cells.append("nan" if not math.isfinite(v) else f"{v:.2f}")
        lines.append(f"| {title} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


RENDERERS = {"csv": rows_to_csv, "json": rows_to_json, "markdown": rows_to_markdown}


def render_rows(rows: list[ReportRow], fmt: str) -> str:
    return RENDERERS[fmt](rows)


def write_rows(rows: list[ReportRow], path, fmt: str) -> None:
    Path(path).write_text(render_rows(rows, fmt))


def figure_to_csv(table: list[SliceBin]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIGURE_COLUMNS)
    for b in table:
        writer.writerow([_num(b.bin_low), _num(b.bin_high), _num(b.bin_mid), _num(b.d_mse),
                         _num(b.d_bias_sq), _num(b.d_var), b.count])
    return buf.getvalue()


def write_figure_csv(table: list[SliceBin], path) -> None:
    Path(path).write_text(figure_to_csv(table))
