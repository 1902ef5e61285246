"""CSV and JSON emission with full-precision numbers."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from harmlab.solver import TRACE_COLUMNS, SolveTrace


class OutputError(OSError):
    """A result file could not be written."""


@dataclass
class Table:
    """Named columns plus rows; the header is fixed by the producing check."""

    columns: tuple
    rows: list = field(default_factory=list)

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(row)}")
        self.rows.append(tuple(row))


def format_number(value) -> str:
    """Shortest text that parses back to the same float (``repr``)."""
    if hasattr(value, "item"):
        # numpy scalars; np.float64 subclasses float but reprs as "np.float64(...)"
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _as_table(artifact) -> Table:
    if isinstance(artifact, SolveTrace):
        return Table(TRACE_COLUMNS, list(artifact.rows))
    if isinstance(artifact, Table):
        return artifact
    if hasattr(artifact, "verdict_table"):
        return artifact.verdict_table()
    raise TypeError(f"cannot write {type(artifact).__name__} as CSV")


def emit_csv(artifact, path) -> Path:
    """Write a solve trace, a ``Table`` or a scenario report as CSV.

    Solve traces use the header ``sweep,energy,max_move,min_u,delta_max``.
    Raises ``OutputError`` on I/O failure.
    """
    table = _as_table(artifact)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(table.columns)
            for row in table.rows:
                writer.writerow([format_number(v) for v in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> Table:
    """Parse a file written by ``emit_csv``; numeric fields become floats."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        rows = []
        for raw in reader:
            row = []
            for cell in raw:
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(cell)
            rows.append(tuple(row))
    return Table(header, rows)


def sanitize(value):
    """JSON-safe copy: non-finite floats become ``None``, arrays become lists."""
    if isinstance(value, dict):
        return {str(k): sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    if hasattr(value, "tolist"):
        return sanitize(value.tolist())
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    return value


def write_json(data, path) -> Path:
    path = Path(path)
    text = json.dumps(sanitize(data), indent=2, sort_keys=False, allow_nan=False) + "\n"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path
