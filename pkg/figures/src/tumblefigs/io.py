"""CSV loading for the experiment output schemas."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class FigureDataError(ValueError):
    """Input CSV does not match the expected schema."""


def load_table(path) -> dict[str, np.ndarray]:
    """Columns of a numeric CSV keyed by header name."""
    path = Path(path)
    if not path.exists():
        raise FigureDataError(f"input CSV {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureDataError(f"{path}: empty CSV") from None
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise FigureDataError(f"{path}: ragged row {row!r}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise FigureDataError(f"{path}: non-numeric cell ({exc})") from None
    data = np.array(rows, dtype=float)
    if data.size == 0:
        raise FigureDataError(f"{path}: no data rows")
    return {name: data[:, j] for j, name in enumerate(header)}


def require_columns(table: dict[str, np.ndarray], names, what: str):
    missing = [n for n in names if n not in table]
    if missing:
        raise FigureDataError(
            f"{what}: missing column(s) {', '.join(missing)}; "
            f"found {', '.join(table)}"
        )


def rate_columns(table: dict[str, np.ndarray]) -> list[str]:
    """The k_r_i columns of a descent-history table, in header order."""
    cols = [n for n in table if n.startswith("k_") and n.count("_") == 2]
    if not cols:
        raise FigureDataError(
            "history table has no k_r_i columns; found " + ", ".join(table)
        )
    return cols
