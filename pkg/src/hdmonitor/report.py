from __future__ import annotations

import csv
import io
import math
from typing import Sequence

from .arl import ArlRow

CSV_COLUMNS = (
    "scheme_id", "global_kind", "m", "m1", "scenario_id", "target_arl0", "h", "replications",
    "mean_rl", "sd_rl", "censored_fraction", "discard_rate", "wall_seconds",
)


def _num(x) -> str:
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def emit_report(rows: Sequence[ArlRow], fmt: str = "csv") -> str:
    """Render ARL rows as CSV (full precision) or a markdown table.

    Markdown cells read ``mean (sd)`` at two decimals; NaN timings and failed
    cells render as empty fields.
    """
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_num(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()
    if fmt == "markdown":
        head = ["scheme", "m", "m1", "scenario", "h", "ARL1 (sd)", "censored", "discard rate"]
        lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        for r in rows:
            cell = "" if math.isnan(r.mean_rl) else f"{r.mean_rl:.2f} ({r.sd_rl:.2f})"
            lines.append("| " + " | ".join([
                r.scheme_id, str(r.m), str(r.m1), r.scenario_id, f"{r.h:.3f}", cell,
                "" if math.isnan(r.censored_fraction) else f"{r.censored_fraction:.3f}",
                "" if math.isnan(r.discard_rate) else f"{r.discard_rate:.3f}",
            ]) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")
