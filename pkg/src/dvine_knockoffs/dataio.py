"""CSV and dataset I/O.

CSV files are an RFC-4180 subset: comma separator, '.' decimal point,
optional quoted header row.  Numbers are written in their shortest
round-trip decimal form, so a load/save cycle preserves values exactly.
"""

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, NonNumericCell, ParseError, RaggedRows


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: Optional[np.ndarray] = None
    column_names: Optional[tuple] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise DimensionError("X must be two-dimensional")
        if not np.all(np.isfinite(X)):
            raise DimensionError("X contains non-finite entries")
        object.__setattr__(self, "X", X)
        if self.y is not None:
            y = np.asarray(self.y, dtype=float).ravel()
            if y.shape[0] != X.shape[0]:
                raise DimensionError("y length must match the number of rows")
            object.__setattr__(self, "y", y)
        if self.column_names is not None:
            names = tuple(str(c) for c in self.column_names)
            if len(names) != X.shape[1]:
                raise DimensionError("column_names length must match X")
            object.__setattr__(self, "column_names", names)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


def load_csv(path, has_header=False, response_column=None):
    """Read a rectangular numeric CSV into a Dataset.

    ``response_column`` (a header name or 0-based index) splits that column
    out as y.  Malformed input raises ParseError subclasses that name the
    offending cell.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]  # ignore trailing blank lines
    if not rows:
        raise ParseError(f"{path}: empty file")
    names = None
    if has_header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ParseError(f"{path}: header but no data rows")
    width = len(rows[0])
    data = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise RaggedRows(
                f"{path}: row {i + 1} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise NonNumericCell(i + 1, j + 1, cell) from None

    y = None
    if response_column is not None:
        if isinstance(response_column, str) and not response_column.lstrip(
                "-").isdigit():
            if names is None or response_column not in names:
                raise ParseError(f"no column named {response_column!r}")
            idx = names.index(response_column)
        else:
            idx = int(response_column)
            if not 0 <= idx < width:
                raise ParseError(f"response column index {idx} out of range")
        y = data[:, idx]
        data = np.delete(data, idx, axis=1)
        if names is not None:
            names = names[:idx] + names[idx + 1:]
    return Dataset(X=data, y=y, column_names=tuple(names) if names else None)


def format_float(x):
    """Shortest decimal representation that round-trips to the same float."""
    return repr(float(x))


def save_matrix_csv(path, X, column_names=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if column_names is not None:
            writer.writerow(list(column_names))
        for row in X:
            writer.writerow([format_float(v) for v in row])


def save_dataset_csv(path, dataset, response_name="y"):
    """Dataset to CSV; y (when present) becomes the last column."""
    if dataset.y is None:
        save_matrix_csv(path, dataset.X, dataset.column_names)
        return
    names = None
    if dataset.column_names is not None:
        names = list(dataset.column_names) + [response_name]
    save_matrix_csv(path, np.column_stack([dataset.X, dataset.y]), names)
