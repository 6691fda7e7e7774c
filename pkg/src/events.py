"""
The recorded-data view of a run: one row per event, the product A_i B_k in
the column of the pair actually measured, the other three columns absent and
λ unknown unless the run was made with λ retention.
"""
from __future__ import annotations

import csv
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Outcome, SettingPair
from .errors import EventTableError, InsufficientDataError
from .sampling import TrialRecord, TrialStream

HEADER = ("event", "A1B1", "A1B2", "A2B1", "A2B2", "lambda")
ABSENT = "***"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class EventRow:
    """
    A single row of the event table.
    """
    event: int
    cells: tuple[Outcome | None, Outcome | None, Outcome | None, Outcome | None]
    lam: float | None

    def text_cells(self) -> list[str]:
        return [
            str(self.event),
            *(ABSENT if cell is None else cell.symbol for cell in self.cells),
            UNKNOWN if self.lam is None else repr(self.lam),
        ]

    def csv_cells(self) -> list[str]:
        return [
            str(self.event),
            *("" if cell is None else cell.symbol for cell in self.cells),
            UNKNOWN if self.lam is None else repr(self.lam),
        ]


def emit_event_table(records: Iterable[TrialRecord], include_lambda: bool = False) -> list[EventRow]:
    """
    Lay trials out as event-table rows.

    :param records: trials, in event order
    :param include_lambda: put λ in the last column instead of "unknown"
    :return: one row per trial
    """
    rows = []
    for record in records:
        cells: list[Outcome | None] = [None, None, None, None]
        cells[record.pair.column] = record.product
        lam = float(record.lam) if include_lambda and record.lam is not None else None
        rows.append(EventRow(record.index, tuple(cells), lam))
    return rows


def write_event_csv(stream: TrialStream, path: str | Path, include_lambda: bool = False) -> Path:
    """
    Write a trial stream as events.csv.

    :param stream: the trials
    :param path: destination file
    :param include_lambda: write λ values instead of "unknown"
    :return: the path written
    """
    path = Path(path)
    # column-wise fast path; produces the same cells as EventRow.csv_cells
    lambdas = stream.lambdas.tolist() if include_lambda and stream.lambdas is not None else None
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(HEADER)
        for position, (column, product) in enumerate(
            zip(stream.columns.tolist(), stream.products.tolist())
        ):
            cells = ["", "", "", ""]
            cells[column] = Outcome(product).symbol
            lam = UNKNOWN
            if lambdas is not None and not math.isnan(lambdas[position]):
                lam = repr(lambdas[position])
            writer.writerow([str(position + 1), *cells, lam])
    return path


def _parse_product(text: str, line: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise EventTableError(f"line {line}: product {text!r} is not an integer") from None
    if value not in (1, -1):
        raise EventTableError(f"line {line}: product must be +1 or -1, got {value}")
    return value


def read_event_csv(path: str | Path) -> TrialStream:
    """
    Read events.csv back into a trial stream.

    The stream carries products and setting pairs only; per-wing outcomes
    are not part of the table, and λ is NaN wherever it reads "unknown".

    :param path: the events file
    :return: trials in file order
    :raises InsufficientDataError: the file is empty
    :raises EventTableError: the file does not follow the table layout
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
    except OSError as error:
        raise EventTableError(f"cannot read event table {path}: {error}") from error

    if not rows:
        raise InsufficientDataError(f"event table {path} is empty: no events recorded")
    if tuple(rows[0]) != HEADER:
        raise EventTableError(f"event table {path} has header {rows[0]!r}, expected {list(HEADER)!r}")

    columns, products, lambdas = [], [], []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(HEADER):
            raise EventTableError(f"line {line}: expected {len(HEADER)} cells, got {len(row)}")
        filled = [column for column, cell in enumerate(row[1:5]) if cell.strip()]
        if len(filled) != 1:
            raise EventTableError(f"line {line}: exactly one product column must be populated")
        column = filled[0]
        columns.append(column)
        products.append(_parse_product(row[1 + column], line))

        lam_text = row[5].strip()
        if lam_text == UNKNOWN:
            lambdas.append(math.nan)
        else:
            try:
                lambdas.append(float(lam_text))
            except ValueError:
                raise EventTableError(f"line {line}: bad lambda {lam_text!r}") from None

    return TrialStream(
        np.array(columns, dtype=np.int64),
        np.array(products, dtype=np.int8),
        lambdas=np.array(lambdas, dtype=np.float64),
    )


def render_text_table(rows: Iterable[EventRow], limit: int | None = None) -> str:
    """
    Render rows as an aligned text table in the recorded-data layout.

    :param rows: event rows
    :param limit: render at most this many rows, then an ellipsis row
    :return: the table
    """
    title = ["Event#", *(pair.label for pair in SettingPair.all()), "λ"]
    body = []
    for count, row in enumerate(rows):
        if limit is not None and count >= limit:
            body.append(["⋮"] * len(title))
            break
        body.append(row.text_cells())

    widths = [max(len(line[i]) for line in [title, *body]) for i in range(len(title))]

    def fmt(cells: list[str]) -> str:
        return " | ".join(cell.center(width) for cell, width in zip(cells, widths))

    rule = "-+-".join("-" * width for width in widths)
    return "\n".join([fmt(title), rule, *(fmt(line) for line in body)])
