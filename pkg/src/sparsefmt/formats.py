"""Storage layouts built from a :class:`TripletMatrix`, their SpMV kernels and
padding accounting.

ELLPACK and row-grouped CSR keep their slot arrays slot-major: the j-th entry
of consecutive rows sits in consecutive memory, which is what makes the
one-thread-per-row loads coalesce. Pad slots hold value 0 and column 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .matrix_core import TripletMatrix, row_lengths

INDEX_BYTES = 4
DEFAULT_SLOT_BUDGET = 2**31

PRECISION_DTYPES = {"single": np.float32, "double": np.float64}
PRECISION_BYTES = {"single": 4, "double": 8}


class SlotBudgetExceeded(MemoryError):
    pass


def _check_x(x, num_cols, dtype=np.float64):
    x = np.asarray(x, dtype=dtype)
    if x.shape != (num_cols,):
        raise ValueError(f"x has length {x.size}, expected {num_cols}")
    return x


# -- CSR ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CsrMatrix:
    num_rows: int
    num_cols: int
    values: np.ndarray
    columns: np.ndarray
    row_pointers: np.ndarray

    format_name = "csr"

    @property
    def nnz(self) -> int:
        return int(self.row_pointers[-1])

    def astype(self, dtype) -> "CsrMatrix":
        return CsrMatrix(self.num_rows, self.num_cols, self.values.astype(dtype),
                         self.columns, self.row_pointers)

    def to_triplets(self) -> TripletMatrix:
        rows = np.repeat(np.arange(self.num_rows), np.diff(self.row_pointers))
        return TripletMatrix(self.num_rows, self.num_cols, rows, self.columns,
                             self.values.astype(np.float64))


def build_csr(m: TripletMatrix) -> CsrMatrix:
    rp = np.zeros(m.num_rows + 1, dtype=np.int64)
    np.cumsum(row_lengths(m), out=rp[1:])
    return CsrMatrix(m.num_rows, m.num_cols, m.values.copy(), m.cols.copy(), rp)


def spmv_csr(a: CsrMatrix, x) -> np.ndarray:
    """One logical thread per row; step j adds the j-th entry of every row
    that still has one."""
    x = _check_x(x, a.num_cols, a.values.dtype)
    y = np.zeros(a.num_rows, dtype=a.values.dtype)
    starts = a.row_pointers[:-1]
    lens = np.diff(a.row_pointers)
    active = np.flatnonzero(lens)
    j = 0
    while active.size:
        ptr = starts[active] + j
        y[active] += a.values[ptr] * x[a.columns[ptr]]
        j += 1
        active = active[lens[active] > j]
    return y


# -- ELLPACK -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EllpackMatrix:
    num_rows: int
    num_cols: int
    width: int
    values: np.ndarray
    columns: np.ndarray
    # row lengths are kept only for conversion back to triplets; the kernel
    # reads every slot
    row_lengths: np.ndarray

    format_name = "ellpack"

    @property
    def stored_slots(self) -> int:
        return self.num_rows * self.width

    @property
    def nnz(self) -> int:
        return int(self.row_lengths.sum())

    def astype(self, dtype) -> "EllpackMatrix":
        return EllpackMatrix(self.num_rows, self.num_cols, self.width,
                             self.values.astype(dtype), self.columns, self.row_lengths)

    def to_triplets(self) -> TripletMatrix:
        n = self.num_rows
        rows, cols, vals = [], [], []
        for j in range(self.width):
            live = np.flatnonzero(self.row_lengths > j)
            rows.append(live)
            cols.append(self.columns[j * n + live])
            vals.append(self.values[j * n + live])
        if not rows:
            return TripletMatrix(n, self.num_cols, [], [], [])
        rows, cols, vals = (np.concatenate(a) for a in (rows, cols, vals))
        order = np.lexsort((cols, rows))
        return TripletMatrix(n, self.num_cols, rows[order], cols[order],
                             vals[order].astype(np.float64))


def _slot_index(m: TripletMatrix) -> np.ndarray:
    """Position of each entry within its row (0 for the row's first entry)."""
    rp = np.zeros(m.num_rows + 1, dtype=np.int64)
    np.cumsum(row_lengths(m), out=rp[1:])
    return np.arange(m.nnz()) - rp[m.rows]


def build_ellpack(m: TripletMatrix, width: int | None = None,
                  slot_budget: int = DEFAULT_SLOT_BUDGET) -> EllpackMatrix:
    lens = row_lengths(m)
    k = int(lens.max()) if lens.size else 0
    if width is None:
        width = k
    elif width < k:
        raise ValueError(f"width {width} below the longest row ({k})")
    n = m.num_rows
    if n * width > slot_budget:
        raise SlotBudgetExceeded(
            f"ELLPACK needs {n}x{width} = {n * width} slots, budget is {slot_budget}")
    values = np.zeros(n * width, dtype=np.float64)
    columns = np.zeros(n * width, dtype=np.int64)
    pos = _slot_index(m) * n + m.rows
    values[pos] = m.values
    columns[pos] = m.cols
    return EllpackMatrix(n, m.num_cols, width, values, columns, lens)


def spmv_ellpack(a: EllpackMatrix, x) -> np.ndarray:
    x = _check_x(x, a.num_cols, a.values.dtype)
    n = a.num_rows
    y = np.zeros(n, dtype=a.values.dtype)
    for j in range(a.width):
        sl = slice(j * n, (j + 1) * n)
        y += a.values[sl] * x[a.columns[sl]]
    return y


# -- COO / Hybrid ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CooArrays:
    num_rows: int
    num_cols: int
    rows: np.ndarray
    columns: np.ndarray
    values: np.ndarray

    format_name = "coo"

    @property
    def nnz(self) -> int:
        return int(self.rows.size)

    def astype(self, dtype) -> "CooArrays":
        return CooArrays(self.num_rows, self.num_cols, self.rows, self.columns,
                         self.values.astype(dtype))

    def to_triplets(self) -> TripletMatrix:
        return TripletMatrix(self.num_rows, self.num_cols, self.rows, self.columns,
                             self.values.astype(np.float64))


def build_coo(m: TripletMatrix) -> CooArrays:
    return CooArrays(m.num_rows, m.num_cols, m.rows.copy(), m.cols.copy(), m.values.copy())


def spmv_coo(a: CooArrays, x, accumulate_into=None) -> np.ndarray:
    """Add v * x[col] into y[row] for every entry, in array order."""
    x = _check_x(x, a.num_cols, a.values.dtype)
    if accumulate_into is None:
        y = np.zeros(a.num_rows, dtype=a.values.dtype)
    else:
        y = np.array(accumulate_into, dtype=a.values.dtype)
        if y.shape != (a.num_rows,):
            raise ValueError(f"accumulator has length {y.size}, expected {a.num_rows}")
    # unbuffered, so repeated rows accumulate sequentially in array order
    np.add.at(y, a.rows, a.values * x[a.columns])
    return y


def hybrid_cost(row_lens: Sequence[int], k: int) -> int:
    """Stored words for an ELLPACK part of width k plus its COO overflow."""
    lens = np.asarray(row_lens, dtype=np.int64)
    return int(2 * lens.size * k + 3 * np.maximum(lens - k, 0).sum())


def choose_k1(row_lens: Sequence[int]) -> int:
    """Width of the ELLPACK part minimizing stored words (value+column per
    ELLPACK slot, value+row+column per COO entry); ties go to the smaller k."""
    lens = np.sort(np.asarray(row_lens, dtype=np.int64))
    if lens.size == 0:
        return 0
    kmax = int(lens[-1])
    ks = np.arange(kmax + 1)
    # overflow(k) = sum(max(len - k, 0)) via suffix sums over the sorted lengths
    idx = np.searchsorted(lens, ks, side="right")
    suffix = np.concatenate([np.cumsum(lens[::-1])[::-1], [0]])
    overflow = suffix[idx] - ks * (lens.size - idx)
    cost = 2 * lens.size * ks + 3 * overflow
    return int(np.argmin(cost))


@dataclass(frozen=True, eq=False)
class HybridMatrix:
    ell: EllpackMatrix
    coo: CooArrays

    format_name = "hybrid"

    @property
    def num_rows(self) -> int:
        return self.ell.num_rows

    @property
    def num_cols(self) -> int:
        return self.ell.num_cols

    @property
    def k1(self) -> int:
        return self.ell.width

    @property
    def nnz(self) -> int:
        return self.ell.nnz + self.coo.nnz

    def astype(self, dtype) -> "HybridMatrix":
        return HybridMatrix(self.ell.astype(dtype), self.coo.astype(dtype))

    def to_triplets(self) -> TripletMatrix:
        a, b = self.ell.to_triplets(), self.coo.to_triplets()
        rows = np.concatenate([a.rows, b.rows])
        cols = np.concatenate([a.cols, b.cols])
        vals = np.concatenate([a.values, b.values])
        order = np.lexsort((cols, rows))
        return TripletMatrix(self.num_rows, self.num_cols, rows[order], cols[order], vals[order])


def build_hybrid(m: TripletMatrix, k1: int | None = None) -> HybridMatrix:
    lens = row_lengths(m)
    kmax = int(lens.max()) if lens.size else 0
    if k1 is None:
        k1 = choose_k1(lens)
    if not 0 <= k1 <= kmax:
        raise ValueError(f"k1={k1} outside [0, {kmax}]")
    in_ell = _slot_index(m) < k1
    ell_part = TripletMatrix(m.num_rows, m.num_cols, m.rows[in_ell], m.cols[in_ell],
                             m.values[in_ell])
    ell = build_ellpack(ell_part, width=k1)
    over = ~in_ell
    coo = CooArrays(m.num_rows, m.num_cols, m.rows[over], m.cols[over], m.values[over])
    return HybridMatrix(ell, coo)


def spmv_hybrid(a: HybridMatrix, x) -> np.ndarray:
    y = spmv_ellpack(a.ell, x)
    return spmv_coo(a.coo, x, accumulate_into=y)


# -- Blocked CSR -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BcsrMatrix:
    num_rows: int
    num_cols: int
    block_dims: tuple[int, int]
    block_row_pointers: np.ndarray
    block_column_index: np.ndarray
    # r*c scalars per stored block, row-major inside the block
    block_values: np.ndarray
    # which block-local slots hold a source entry; bookkeeping only, not part
    # of the stored footprint
    occupied: np.ndarray

    format_name = "bcsr"

    @property
    def nnz(self) -> int:
        return int(self.occupied.sum())

    @property
    def num_blocks(self) -> int:
        return int(self.block_column_index.size)

    @property
    def stored_slots(self) -> int:
        r, c = self.block_dims
        return self.num_blocks * r * c

    @property
    def efficiency(self) -> float:
        return self.nnz / self.stored_slots if self.stored_slots else 1.0

    def astype(self, dtype) -> "BcsrMatrix":
        return BcsrMatrix(self.num_rows, self.num_cols, self.block_dims,
                          self.block_row_pointers, self.block_column_index,
                          self.block_values.astype(dtype), self.occupied)

    def to_triplets(self) -> TripletMatrix:
        r, c = self.block_dims
        brow = np.repeat(np.arange(self.block_row_pointers.size - 1),
                         np.diff(self.block_row_pointers))
        vals = self.block_values.reshape(-1, r, c)
        b, i, j = np.nonzero(self.occupied.reshape(-1, r, c))
        rows = brow[b] * r + i
        cols = self.block_column_index[b] * c + j
        v = vals[b, i, j].astype(np.float64)
        order = np.lexsort((cols, rows))
        return TripletMatrix(self.num_rows, self.num_cols, rows[order], cols[order], v[order])


def build_bcsr(m: TripletMatrix, block_dims: tuple[int, int] = (4, 4)) -> BcsrMatrix:
    r, c = block_dims
    if r <= 0 or c <= 0:
        raise ValueError("block dimensions must be positive")
    n_brows = -(-m.num_rows // r)
    n_bcols = -(-m.num_cols // c)
    br, bc = m.rows // r, m.cols // c
    block_key = br * n_bcols + bc
    uniq, which = np.unique(block_key, return_inverse=True)
    block_rows = uniq // n_bcols
    block_cols = uniq % n_bcols
    bvals = np.zeros((uniq.size, r, c), dtype=np.float64)
    bvals[which, m.rows % r, m.cols % c] = m.values
    occ = np.zeros(bvals.shape, dtype=bool)
    occ[which, m.rows % r, m.cols % c] = True
    brp = np.zeros(n_brows + 1, dtype=np.int64)
    np.cumsum(np.bincount(block_rows, minlength=n_brows), out=brp[1:])
    return BcsrMatrix(m.num_rows, m.num_cols, (r, c), brp, block_cols.astype(np.int64),
                      bvals.reshape(-1), occ.reshape(-1))


def spmv_bcsr(a: BcsrMatrix, x) -> np.ndarray:
    r, c = a.block_dims
    x = _check_x(x, a.num_cols, a.block_values.dtype)
    n_brows = a.block_row_pointers.size - 1
    xp = np.zeros(-(-a.num_cols // c) * c, dtype=x.dtype)
    xp[: a.num_cols] = x
    yp = np.zeros(n_brows * r, dtype=x.dtype)
    blocks = a.block_values.reshape(-1, r, c)
    lens = np.diff(a.block_row_pointers)
    starts = a.block_row_pointers[:-1]
    active = np.flatnonzero(lens)
    step = 0
    # block rows advance in lockstep, one stored block per step; inside a block
    # each row accumulates its c products left to right
    while active.size:
        b = starts[active] + step
        xs = xp.reshape(-1, c)[a.block_column_index[b]]
        out = yp.reshape(-1, r)
        for jj in range(c):
            out[active] += blocks[b, :, jj] * xs[:, jj, None]
        step += 1
        active = active[lens[active] > step]
    return yp[: a.num_rows]


# -- Row-grouped CSR ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RgcsrMatrix:
    num_rows: int
    num_cols: int
    group_size: int
    values: np.ndarray
    columns: np.ndarray
    group_pointers: np.ndarray
    row_lengths: np.ndarray

    format_name = "rgcsr"

    @property
    def num_groups(self) -> int:
        return int(self.group_pointers.size - 1)

    @property
    def stored_slots(self) -> int:
        return int(self.group_pointers[-1])

    @property
    def nnz(self) -> int:
        return int(self.row_lengths.sum())

    def group_rows(self, g: int) -> int:
        """Number of rows in group g; only the last group can be short."""
        return min(self.group_size, self.num_rows - g * self.group_size)

    def slot_offsets(self) -> np.ndarray:
        """Offset of every real entry, in row-major entry order."""
        rows = np.repeat(np.arange(self.num_rows), self.row_lengths)
        rp = np.zeros(self.num_rows + 1, dtype=np.int64)
        np.cumsum(self.row_lengths, out=rp[1:])
        j = np.arange(rows.size) - rp[rows]
        g = rows // self.group_size
        s = np.minimum(self.group_size, self.num_rows - g * self.group_size)
        return self.group_pointers[g] + rows % self.group_size + j * s

    def astype(self, dtype) -> "RgcsrMatrix":
        return RgcsrMatrix(self.num_rows, self.num_cols, self.group_size,
                           self.values.astype(dtype), self.columns,
                           self.group_pointers, self.row_lengths)

    def to_triplets(self) -> TripletMatrix:
        off = self.slot_offsets()
        rows = np.repeat(np.arange(self.num_rows), self.row_lengths)
        return TripletMatrix(self.num_rows, self.num_cols, rows, self.columns[off],
                             self.values[off].astype(np.float64))


def group_widths(lens: np.ndarray, group_size: int) -> np.ndarray:
    n = lens.size
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.arange(0, n, group_size)
    return np.maximum.reduceat(lens, starts)


def build_rgcsr(m: TripletMatrix, group_size: int) -> RgcsrMatrix:
    if group_size < 1:
        raise ValueError("group size must be at least 1")
    n, g = m.num_rows, group_size
    lens = row_lengths(m)
    widths = group_widths(lens, g)
    sizes = np.minimum(g, n - np.arange(widths.size) * g)
    gp = np.zeros(widths.size + 1, dtype=np.int64)
    np.cumsum(sizes * widths, out=gp[1:])
    a = RgcsrMatrix(n, m.num_cols, g, np.zeros(gp[-1]), np.zeros(gp[-1], dtype=np.int64),
                    gp, lens)
    off = a.slot_offsets()
    a.values[off] = m.values
    a.columns[off] = m.cols
    return a


def spmv_rgcsr(a: RgcsrMatrix, x, counter: dict | None = None) -> np.ndarray:
    """Row-grouped kernel: each row walks only its own ``row_lengths`` entries,
    striding by its group's row count. Padding is never read.

    If ``counter`` is given, ``counter["madd"]`` receives the number of
    multiply-add pairs executed.
    """
    x = _check_x(x, a.num_cols, a.values.dtype)
    n, g = a.num_rows, a.group_size
    y = np.zeros(n, dtype=a.values.dtype)
    rows = np.arange(n)
    grp = rows // g
    stride = np.minimum(g, n - grp * g)
    ptr = a.group_pointers[grp] + rows % g
    lens = a.row_lengths
    active = np.flatnonzero(lens)
    madd = 0
    j = 0
    while active.size:
        p = ptr[active] + j * stride[active]
        y[active] += a.values[p] * x[a.columns[p]]
        madd += active.size
        j += 1
        active = active[lens[active] > j]
    if counter is not None:
        counter["madd"] = madd
    return y


# -- accounting --------------------------------------------------------------

@dataclass(frozen=True)
class FillReport:
    format_name: str
    stored_slots: int
    nnz: int
    artificial_zeros: int
    fill_percent: float
    bytes_single: int
    bytes_double: int
    extra: dict = field(default_factory=dict)

    @property
    def efficiency(self) -> float:
        return self.nnz / self.stored_slots if self.stored_slots else 1.0


def _footprint(fmt, value_bytes: int) -> int:
    i = INDEX_BYTES
    if isinstance(fmt, CsrMatrix):
        return fmt.nnz * (value_bytes + i) + (fmt.num_rows + 1) * i
    if isinstance(fmt, EllpackMatrix):
        return fmt.stored_slots * (value_bytes + i)
    if isinstance(fmt, CooArrays):
        return fmt.nnz * (value_bytes + 2 * i)
    if isinstance(fmt, HybridMatrix):
        return _footprint(fmt.ell, value_bytes) + _footprint(fmt.coo, value_bytes)
    if isinstance(fmt, BcsrMatrix):
        return (fmt.stored_slots * value_bytes + fmt.num_blocks * i
                + fmt.block_row_pointers.size * i)
    if isinstance(fmt, RgcsrMatrix):
        return (fmt.stored_slots * (value_bytes + i) + fmt.group_pointers.size * i
                + fmt.num_rows * i)
    raise TypeError(f"unknown format {type(fmt).__name__}")


def fill_report(fmt) -> FillReport:
    extra = {}
    if isinstance(fmt, (CsrMatrix, CooArrays)):
        slots = fmt.nnz
    elif isinstance(fmt, HybridMatrix):
        slots = fmt.ell.stored_slots + fmt.coo.nnz
        extra = {"k1": fmt.k1, "ell_nnz": fmt.ell.nnz, "coo_nnz": fmt.coo.nnz}
    elif isinstance(fmt, (EllpackMatrix, BcsrMatrix, RgcsrMatrix)):
        slots = fmt.stored_slots
        if isinstance(fmt, RgcsrMatrix):
            extra = {"group_size": fmt.group_size}
        elif isinstance(fmt, BcsrMatrix):
            extra = {"num_blocks": fmt.num_blocks, "block_dims": list(fmt.block_dims)}
    else:
        raise TypeError(f"unknown format {type(fmt).__name__}")
    nnz = fmt.nnz
    pad = slots - nnz
    return FillReport(
        format_name=fmt.format_name,
        stored_slots=int(slots),
        nnz=int(nnz),
        artificial_zeros=int(pad),
        fill_percent=100.0 * pad / nnz if nnz else 0.0,
        bytes_single=_footprint(fmt, 4),
        bytes_double=_footprint(fmt, 8),
        extra=extra,
    )


# -- dispatch and debug dump -------------------------------------------------

FORMATS = ("csr", "ellpack", "coo", "hybrid", "bcsr", "rgcsr")


def build(name: str, m: TripletMatrix, group_size: int | None = None, **kw):
    if name == "csr":
        return build_csr(m)
    if name == "ellpack":
        return build_ellpack(m, **kw)
    if name == "coo":
        return build_coo(m)
    if name == "hybrid":
        return build_hybrid(m, **kw)
    if name == "bcsr":
        return build_bcsr(m, **kw)
    if name == "rgcsr":
        if group_size is None:
            raise ValueError("rgcsr needs a group size")
        return build_rgcsr(m, group_size)
    raise ValueError(f"unknown format {name!r}; expected one of {', '.join(FORMATS)}")


def spmv(fmt, x) -> np.ndarray:
    if isinstance(fmt, CsrMatrix):
        return spmv_csr(fmt, x)
    if isinstance(fmt, EllpackMatrix):
        return spmv_ellpack(fmt, x)
    if isinstance(fmt, CooArrays):
        return spmv_coo(fmt, x)
    if isinstance(fmt, HybridMatrix):
        return spmv_hybrid(fmt, x)
    if isinstance(fmt, BcsrMatrix):
        return spmv_bcsr(fmt, x)
    if isinstance(fmt, RgcsrMatrix):
        return spmv_rgcsr(fmt, x)
    raise TypeError(f"unknown format {type(fmt).__name__}")


def _plain(a: np.ndarray) -> list:
    return a.tolist()


def to_debug_dict(fmt) -> dict:
    head = {"format": fmt.format_name, "numRows": fmt.num_rows, "numCols": fmt.num_cols}
    if isinstance(fmt, CsrMatrix):
        return head | {"values": _plain(fmt.values), "columns": _plain(fmt.columns),
                       "rowPointers": _plain(fmt.row_pointers)}
    if isinstance(fmt, EllpackMatrix):
        return head | {"width": fmt.width, "values": _plain(fmt.values),
                       "columns": _plain(fmt.columns)}
    if isinstance(fmt, CooArrays):
        return head | {"rows": _plain(fmt.rows), "columns": _plain(fmt.columns),
                       "values": _plain(fmt.values)}
    if isinstance(fmt, HybridMatrix):
        return head | {"ell": to_debug_dict(fmt.ell), "coo": to_debug_dict(fmt.coo)}
    if isinstance(fmt, BcsrMatrix):
        return head | {"blockDims": list(fmt.block_dims),
                       "rowPointers": _plain(fmt.block_row_pointers),
                       "columns": _plain(fmt.block_column_index),
                       "values": _plain(fmt.block_values)}
    if isinstance(fmt, RgcsrMatrix):
        return head | {"groupSize": fmt.group_size, "values": _plain(fmt.values),
                       "columns": _plain(fmt.columns),
                       "groupPointers": _plain(fmt.group_pointers),
                       "rowLengths": _plain(fmt.row_lengths)}
    raise TypeError(f"unknown format {type(fmt).__name__}")


def to_debug_json(fmt) -> str:
    return json.dumps(to_debug_dict(fmt), indent=2)
