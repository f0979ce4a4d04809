"""CSV emission for experiment results.

Floats are printed with 9 significant digits so summaries recomputed from a
re-read file agree with the in-memory aggregation to ~1e-12. Booleans are
written as 0/1. Writing is fully deterministic: same rows, same bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path

METRIC_FIELDS = (
    "experiment",
    "mode",
    "method",
    "true_x",
    "true_y",
    "true_z",
    "realization",
    "seed",
    "error_m",
    "iterations",
    "converged",
    "rmse_m",
)


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.9g}"
    # numpy scalars land here; render floats consistently
    if hasattr(value, "item"):
        return format_value(value.item())
    return str(value)


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> Path:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]
