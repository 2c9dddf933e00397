"""Deterministic CSV output shared by the run-record exporters and the
experiment harness: comma separators, '.' decimal point, reals at 17
significant digits, header on the first line."""

from __future__ import annotations

from pathlib import Path

__all__ = ["format_value", "write_csv"]


def format_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) or (hasattr(value, "dtype") and value.dtype.kind == "i"):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
