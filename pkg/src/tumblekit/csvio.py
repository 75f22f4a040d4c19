"""CSV emission and parsing for experiment outputs.

All numeric cells are written with 17 significant digits ('%.17g'), which
round-trips float64 exactly; decimal separator is always '.'.
"""

from __future__ import annotations

from dataclasses import dataclass


def format_number(value) -> str:
    return "%.17g" % float(value)


@dataclass
class CsvTable:
    header: list[str]
    rows: list[tuple]

    def __post_init__(self):
        for i, row in enumerate(self.rows):
            if len(row) != len(self.header):
                raise ValueError(
                    f"row {i} has {len(row)} cells, header has {len(self.header)}"
                )

    def write(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.header) + "\n")
            for row in self.rows:
                fh.write(",".join(format_number(c) for c in row) + "\n")

    @classmethod
    def read(cls, path) -> "CsvTable":
        with open(path, "r", newline="") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty CSV")
        header = lines[0].split(",")
        rows = []
        for ln in lines[1:]:
            cells = ln.split(",")
            if len(cells) != len(header):
                raise ValueError(f"{path}: ragged row {ln!r}")
            rows.append(tuple(float(c) for c in cells))
        return cls(header=header, rows=rows)

    def column(self, name: str) -> list[float]:
        try:
            j = self.header.index(name)
        except ValueError:
            raise KeyError(f"no column {name!r}; have {self.header}") from None
        return [row[j] for row in self.rows]
