"""CSV curve tables: header ``id,t_1,...,t_L`` then one row per unit."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np


class CurveFileError(ValueError):
    """Malformed curve CSV."""


class EmptyInputError(CurveFileError):
    pass


class RaggedRowError(CurveFileError):
    def __init__(self, path, row, found, expected):
        self.row = row
        super().__init__(f"{path}: row {row} has {found} cells, expected {expected}")


class NonNumericCellError(CurveFileError):
    def __init__(self, path, row, column, text):
        self.row, self.column = row, column
        super().__init__(f"{path}: row {row}, column {column}: not a number: {text!r}")


@dataclass(frozen=True)
class CurveTable:
    t: np.ndarray  # L grid values from the header
    ids: tuple
    values: np.ndarray  # rows x L

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2 or values.shape[1] != t.size:
            raise ValueError(f"values shape {values.shape} does not match {t.size} grid points")
        if len(self.ids) != values.shape[0]:
            raise ValueError(f"{len(self.ids)} ids for {values.shape[0]} rows")
        if np.any(np.diff(t) <= 0):
            raise ValueError("header grid must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_curves(table: CurveTable, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id"] + [_fmt(v) for v in table.t])
    for ident, row in zip(table.ids, table.values):
        writer.writerow([ident] + [_fmt(v) for v in row])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def read_curves(path) -> CurveTable:
    """Parse a curve CSV; row and column numbers in errors are 1-based."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyInputError(f"{path}: empty input")
    header = rows[0]
    width = len(header)
    if width < 2:
        raise CurveFileError(f"{path}: header needs an id column and at least one grid point")
    t = np.array([_number(path, 1, c + 2, cell) for c, cell in enumerate(header[1:])])
    if np.any(np.diff(t) <= 0):
        raise CurveFileError(f"{path}: header grid is not strictly increasing")
    if len(rows) == 1:
        raise EmptyInputError(f"{path}: header only, no data rows")
    ids, values = [], []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise RaggedRowError(path, k, len(row), width)
        ids.append(row[0].strip())
        values.append([_number(path, k, c + 2, cell) for c, cell in enumerate(row[1:])])
    return CurveTable(t, tuple(ids), np.array(values))


def _number(path, row, column, text):
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCellError(path, row, column, text) from None
    if not np.isfinite(value):
        raise NonNumericCellError(path, row, column, text)
    return value


def write_rows(path, header, rows) -> None:
    """Plain CSV with floats at 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
