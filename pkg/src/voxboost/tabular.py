"""CSV reading/writing with exact floating-point round trips.

All numeric CSV output in this package is UTF-8, comma separated, with a
header row, ``.`` decimal separator and reals formatted with 17
significant digits (``%.17g``), which round-trips IEEE-754 doubles
exactly.  Missing values are encoded as empty fields.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, MissingArtifactError


def fmt_real(x: float) -> str:
    return f"{float(x):.17g}"


def write_rows(path: str | Path, header: list[str], rows: list[list]) -> None:
    """Write rows as CSV; floats via fmt_real, None as empty field."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            out = []
            for v in row:
                if v is None:
                    out.append("")
                elif isinstance(v, float) or isinstance(v, np.floating):
                    out.append(fmt_real(v))
                else:
                    out.append(str(v))
            w.writerow(out)


def read_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing file: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        try:
            header = next(r)
        except StopIteration:
            raise InvalidInputError(f"empty CSV: {path}") from None
        return header, [row for row in r]


def write_matrix_csv(path: str | Path, X: np.ndarray, columns: list[str] | None = None) -> None:
    """FeatureMatrix writer: header row of column names, one row per sample."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError("matrix CSV requires a 2-D array")
    if columns is None:
        columns = [f"c{j:04d}" for j in range(X.shape[1])]
    if len(columns) != X.shape[1]:
        raise InvalidInputError("column-name count does not match matrix width")
    write_rows(path, columns, [list(row) for row in X])


def read_matrix_csv(path: str | Path) -> tuple[np.ndarray, list[str]]:
    header, rows = read_rows(path)
    X = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    if X.size == 0:
        X = X.reshape(0, len(header))
    return X, header


def write_vector_csv(path: str | Path, y: np.ndarray, name: str = "value") -> None:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise InvalidInputError("vector CSV requires a 1-D array")
    write_rows(path, [name], [[v] for v in y])


def read_vector_csv(path: str | Path) -> np.ndarray:
    _, rows = read_rows(path)
    return np.array([float(r[0]) for r in rows], dtype=np.float64)


def check_finite(arr: np.ndarray, what: str) -> np.ndarray:
    """Shared invariant: reject NaN/Inf anywhere in numeric payloads."""
    arr = np.asarray(arr)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} contains non-finite values")
    return arr


def mean_squared_error(y: np.ndarray, y_hat: np.ndarray) -> float:
    """MSE = (1/N) sum (y - y_hat)^2, accumulated in input order in 64-bit.

    Sequential accumulation (not pairwise) so the result is a reproducible
    function of the input order, as the scoring contract requires.
    """
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise InvalidInputError("MSE requires two 1-D vectors of equal length")
    if y.size == 0:
        raise InvalidInputError("MSE of empty vectors is undefined")
    acc = 0.0
    for a, b in zip(y.tolist(), y_hat.tolist()):
        d = a - b
        acc += d * d
    if not math.isfinite(acc):
        raise InvalidInputError("MSE accumulation overflowed or hit non-finite input")
    return acc / y.size
