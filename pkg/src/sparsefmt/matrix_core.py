"""Canonical triplet matrix, Matrix Market I/O, row statistics and the
reference SpMV every storage format is checked against."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class MatrixMarketError(ValueError):
    """Raised for malformed or unsupported Matrix Market input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TripletMatrix:
    """Sorted, duplicate-free coordinate matrix.

    Build through :func:`canonicalize` (or the Matrix Market parser) unless the
    arrays are already canonical; the constructor validates but does not sort.
    """

    num_rows: int
    num_cols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise ValueError("rows, cols and values must be 1-d arrays of equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.num_rows:
                raise ValueError("row index out of bounds")
            if cols.min() < 0 or cols.max() >= self.num_cols:
                raise ValueError("column index out of bounds")
            key = rows * max(self.num_cols, 1) + cols
            if np.any(np.diff(key) <= 0):
                raise ValueError("entries must be strictly increasing in (row, col)")
        object.__setattr__(self, "rows", _frozen(rows))
        object.__setattr__(self, "cols", _frozen(cols))
        object.__setattr__(self, "values", _frozen(values))

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_rows, self.num_cols

    def nnz(self) -> int:
        return int(self.rows.size)

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return [
            (int(r), int(c), float(v))
            for r, c, v in zip(self.rows, self.cols, self.values)
        ]

    def __eq__(self, other):
        if not isinstance(other, TripletMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"TripletMatrix({self.num_rows}x{self.num_cols}, nnz={self.nnz()})"


@dataclass(frozen=True)
class MatrixStats:
    num_rows: int
    nnz: int
    row_len_max: int
    row_len_mean: float
    row_len_min: int
    density_percent: float


def canonicalize(raw: Iterable[tuple[int, int, float]] | None, num_rows: int,
                 num_cols: int, *, rows=None, cols=None, values=None) -> TripletMatrix:
    """Sort entries by (row, col) and sum duplicates.

    Either pass ``raw`` as an iterable of ``(row, col, value)`` triplets or the
    three parallel arrays as keywords. Stored zeros are kept.
    """
    if raw is not None:
        raw = list(raw)
        rows = np.array([t[0] for t in raw], dtype=np.int64)
        cols = np.array([t[1] for t in raw], dtype=np.int64)
        values = np.array([t[2] for t in raw], dtype=np.float64)
    else:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
    if rows.size:
        if rows.min() < 0 or rows.max() >= num_rows:
            raise ValueError("row index out of bounds")
        if cols.min() < 0 or cols.max() >= num_cols:
            raise ValueError("column index out of bounds")
    order = np.lexsort((cols, rows))
    rows, cols, values = rows[order], cols[order], values[order]
    if rows.size > 1:
        new = np.ones(rows.size, dtype=bool)
        new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        if not new.all():
            starts = np.flatnonzero(new)
            # duplicates are summed in input order after the stable sort
            values = np.add.reduceat(values, starts)
            rows, cols = rows[starts], cols[starts]
    return TripletMatrix(num_rows, num_cols, rows, cols, values)


def drop_stored_zeros(m: TripletMatrix) -> TripletMatrix:
    keep = m.values != 0.0
    return TripletMatrix(m.num_rows, m.num_cols, m.rows[keep], m.cols[keep], m.values[keep])


_FIELDS = {"real", "integer", "pattern"}
_SYMMETRIES = {"general", "symmetric"}


def parse_matrix_market(text: str | bytes | io.IOBase) -> TripletMatrix:
    """Parse a coordinate Matrix Market stream (real/integer/pattern,
    general/symmetric). Errors carry the 1-based line number."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    if not isinstance(text, str):
        text = text.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty input", 1)

    banner = lines[0].split()
    if len(banner) != 5 or banner[0].lower() != "%%matrixmarket":
        raise MatrixMarketError("malformed banner", 1)
    obj, fmt, field, symmetry = (b.lower() for b in banner[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object {obj!r}", 1)
    if fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format {fmt!r}", 1)
    if field not in _FIELDS:
        raise MatrixMarketError(f"unsupported field {field!r}", 1)
    if symmetry not in _SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry {symmetry!r}", 1)

    lineno = 1
    size = None
    for lineno in range(2, len(lines) + 1):
        s = lines[lineno - 1].strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise MatrixMarketError("size line must be 'rows cols nnz'", lineno)
        try:
            size = tuple(int(p) for p in parts)
        except ValueError:
            raise MatrixMarketError("non-integer size line", lineno) from None
        break
    if size is None:
        raise MatrixMarketError("missing size line", lineno)
    num_rows, num_cols, declared = size
    if num_rows < 0 or num_cols < 0 or declared < 0:
        raise MatrixMarketError("negative size", lineno)

    want = 2 if field == "pattern" else 3
    rows, cols, vals = [], [], []
    seen = 0
    for k in range(lineno + 1, len(lines) + 1):
        s = lines[k - 1].strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != want:
            raise MatrixMarketError(f"expected {want} fields, got {len(parts)}", k)
        try:
            i, j = int(parts[0]), int(parts[1])
            v = 1.0 if field == "pattern" else float(parts[2])
        except ValueError:
            raise MatrixMarketError("unparseable entry", k) from None
        if not (1 <= i <= num_rows and 1 <= j <= num_cols):
            raise MatrixMarketError(f"index ({i}, {j}) outside {num_rows}x{num_cols}", k)
        seen += 1
        if seen > declared:
            raise MatrixMarketError(f"more than the declared {declared} entries", k)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if symmetry == "symmetric" and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)
    if seen != declared:
        raise MatrixMarketError(f"declared {declared} entries, found {seen}", len(lines))
    return canonicalize(None, num_rows, num_cols, rows=rows, cols=cols, values=vals)


def read_matrix_market(path) -> TripletMatrix:
    with open(path, "rb") as f:
        data = f.read()
    try:
        return parse_matrix_market(data)
    except MatrixMarketError as e:
        raise MatrixMarketError(f"{path}: {e}") from None


def format_matrix_market(m: TripletMatrix, comment: str | None = None) -> str:
    out = ["%%MatrixMarket matrix coordinate real general"]
    if comment:
        out.extend(f"% {c}" for c in comment.splitlines())
    out.append(f"{m.num_rows} {m.num_cols} {m.nnz()}")
    out.extend(f"{r + 1} {c + 1} {v!r}" for r, c, v in m.entries)
    return "\n".join(out) + "\n"


def write_matrix_market(m: TripletMatrix, path, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_matrix_market(m, comment))


def row_lengths(m: TripletMatrix) -> np.ndarray:
    return np.bincount(m.rows, minlength=m.num_rows).astype(np.int64)


def matrix_stats(m: TripletMatrix) -> MatrixStats:
    if m.num_rows == 0:
        raise ValueError("matrix has no rows")
    lens = row_lengths(m)
    cells = m.num_rows * m.num_cols
    return MatrixStats(
        num_rows=m.num_rows,
        nnz=m.nnz(),
        row_len_max=int(lens.max()),
        row_len_mean=float(lens.mean()),
        row_len_min=int(lens.min()),
        density_percent=100.0 * m.nnz() / cells if cells else 0.0,
    )


def spmv_reference(m: TripletMatrix, x: Sequence[float]) -> np.ndarray:
    """y = A x by a plain loop over the sorted entries."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.num_cols,):
        raise ValueError(f"x has length {x.size}, expected {m.num_cols}")
    y = [0.0] * m.num_rows
    xs = x.tolist()
    for r, c, v in zip(m.rows.tolist(), m.cols.tolist(), m.values.tolist()):
        y[r] += v * xs[c]
    return np.array(y, dtype=np.float64)


def identity(n: int) -> TripletMatrix:
    idx = np.arange(n)
    return TripletMatrix(n, n, idx, idx, np.ones(n))


def fixture_m8() -> TripletMatrix:
    """8x8 example matrix with 13 entries valued 1..13.

    Reproduces the published counts for the format figures: CSR row starts
    0,2,3,4,5,6,8,11; three nonzero 4x4 tiles; 11 ELLPACK and 7 row-grouped
    (group of 4) padding slots.
    """
    entries = [
        (0, 0), (0, 3), (1, 1), (2, 2), (3, 0), (4, 4), (5, 0),
        (5, 5), (6, 1), (6, 4), (6, 6), (7, 2), (7, 7),
    ]
    return canonicalize(
        [(r, c, float(k + 1)) for k, (r, c) in enumerate(entries)], 8, 8
    )


def random_matrix(rng: np.random.Generator, num_rows: int, num_cols: int,
                  density: float, integer: bool = True,
                  low: int = -8, high: int = 8) -> TripletMatrix:
    mask = rng.random((num_rows, num_cols)) < density
    r, c = np.nonzero(mask)
    if integer:
        v = rng.integers(low, high + 1, size=r.size).astype(np.float64)
    else:
        v = rng.standard_normal(r.size)
    return TripletMatrix(num_rows, num_cols, r, c, v)


def synthetic_matrix(num_rows: int, seed: int = 0, bandwidth: int = 2,
                     extra_per_row: float = 1.0) -> TripletMatrix:
    """Banded square matrix plus a seeded scatter of off-band entries."""
    rng = np.random.default_rng(seed)
    rows, cols = [], []
    for off in range(-bandwidth, bandwidth + 1):
        i = np.arange(max(0, -off), min(num_rows, num_rows - off))
        rows.append(i)
        cols.append(i + off)
    n_extra = rng.poisson(extra_per_row * num_rows)
    rows.append(rng.integers(0, num_rows, n_extra))
    cols.append(rng.integers(0, num_rows, n_extra))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = rng.standard_normal(rows.size)
    m = canonicalize(None, num_rows, num_rows, rows=rows, cols=cols, values=vals)
    return m
