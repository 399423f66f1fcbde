"""Deterministic CSV/JSON report writers.

Floats are rendered with Python's shortest round-trip representation (at most
17 significant digits), fields appear in a fixed order, and nothing
time-dependent is written, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import os

CSV_COLUMNS = ("quantity", "d", "p", "epsilon", "eta", "value", "kind", "h",
               "iterations")


def format_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def rows_to_csv(rows: list[dict]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(format_value(row.get(c)) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def result_to_json(result) -> str:
    payload = result.to_dict() if hasattr(result, "to_dict") else result
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_report(result, out_dir: str, formats=("csv", "json"),
                 stem: str = "report") -> list[str]:
    """Write the sweep result under ``out_dir``; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    payload = result.to_dict() if hasattr(result, "to_dict") else result
    for fmt in formats:
        if fmt == "csv":
            path = os.path.join(out_dir, f"{stem}.csv")
            text = rows_to_csv(payload["rows"])
        elif fmt == "json":
            path = os.path.join(out_dir, f"{stem}.json")
            text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"failed to write report to {path}: {exc}") from exc
        written.append(path)
    return written


def load_json_report(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
