"""Deterministic model of coalesced global-memory traffic for one-thread-per-row
SpMV kernels, a texture-cache model for reads of x, and roofline/GFLOPS
arithmetic.

Memory is served in aligned ``segment_bytes`` segments; the threads of one
half-warp that load in the same step share a transaction per distinct segment
they touch. Threads are launched in blocks (one block per row group for the
row-grouped kernel) and half-warps never span two blocks.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from .formats import PRECISION_BYTES, build_csr, build_ellpack, build_rgcsr
from .matrix_core import TripletMatrix, row_lengths

ARRAYS = ("values", "columns", "x", "output")


@dataclass(frozen=True)
class AccessModel:
    segment_bytes: int = 128
    half_warp: int = 16
    warp: int = 32
    index_bytes: int = 4
    bandwidth_gb_s: float = 141.0

    def __post_init__(self):
        if self.segment_bytes <= 0 or self.segment_bytes & (self.segment_bytes - 1):
            raise ValueError("segment_bytes must be a power of two")
        if not 0 < self.half_warp <= self.warp:
            raise ValueError("half_warp must be in (0, warp]")


@dataclass(frozen=True)
class TransactionReport:
    transactions: dict
    min_possible_by_array: dict
    x_trace: np.ndarray = field(repr=False, compare=False)

    @property
    def total(self) -> int:
        return sum(self.transactions.values())

    @property
    def min_possible(self) -> int:
        return sum(self.min_possible_by_array.values())

    @property
    def efficiency(self) -> float:
        return self.min_possible / self.total if self.total else 1.0

    def array_efficiency(self, name: str) -> float:
        t = self.transactions[name]
        return self.min_possible_by_array[name] / t if t else 1.0

    def to_dict(self) -> dict:
        return {
            "transactions": dict(self.transactions),
            "min_possible": self.min_possible,
            "efficiency": self.efficiency,
        }


@dataclass(frozen=True)
class CacheConfig:
    line_bytes: int = 128
    num_lines: int = 64

    def __post_init__(self):
        if self.line_bytes <= 0 or self.num_lines <= 0:
            raise ValueError("cache needs positive line size and line count")


@dataclass(frozen=True)
class CacheReport:
    hits: int
    misses: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PeakEstimate:
    precision: str
    cached_x: bool
    bytes_per_nnz: int
    gflops: float

    def to_dict(self) -> dict:
        return {"bytes_per_nnz": self.bytes_per_nnz, "gflops": self.gflops}


def count_segment_transactions(addresses, model: AccessModel = AccessModel()) -> int:
    """Transactions for one half-warp step: distinct segments touched."""
    a = np.asarray(addresses, dtype=np.int64)
    if a.size > model.half_warp:
        raise ValueError(f"{a.size} addresses for a half-warp of {model.half_warp}")
    return int(np.unique(a // model.segment_bytes).size)


def _count_step(keys: np.ndarray, seg: np.ndarray) -> int:
    """Distinct (half-warp, segment) pairs."""
    if keys.size == 0:
        return 0
    pairs = np.stack([keys, seg], axis=1)
    return int(np.unique(pairs, axis=0).shape[0])


def _min_step(keys: np.ndarray, elem: np.ndarray, elem_bytes: int, seg_bytes: int) -> int:
    """Per half-warp, ceil(distinct bytes requested / segment size), summed."""
    if keys.size == 0:
        return 0
    pairs = np.unique(np.stack([keys, elem], axis=1), axis=0)
    hw, counts = np.unique(pairs[:, 0], return_counts=True)
    return int((-(-(counts * elem_bytes) // seg_bytes)).sum())


class _Tally:
    def __init__(self, model: AccessModel, value_bytes: int):
        self.model = model
        self.bytes = {"values": value_bytes, "columns": model.index_bytes,
                      "x": value_bytes, "output": value_bytes}
        self.tx = dict.fromkeys(ARRAYS, 0)
        self.min = dict.fromkeys(ARRAYS, 0)

    def add(self, name: str, hw: np.ndarray, elem: np.ndarray):
        seg = (elem * self.bytes[name]) // self.model.segment_bytes
        self.tx[name] += _count_step(hw, seg)
        self.min[name] += _min_step(hw, elem, self.bytes[name], self.model.segment_bytes)


def _half_warp_ids(num_rows: int, block_size: int, half_warp: int) -> np.ndarray:
    rows = np.arange(num_rows)
    per_block = -(-block_size // half_warp)
    return (rows // block_size) * per_block + (rows % block_size) // half_warp


def simulate_spmv_traffic(fmt: str, m: TripletMatrix, model: AccessModel = AccessModel(),
                          precision: str = "single", group_size: int | None = None,
                          block_size: int | None = None) -> TransactionReport:
    """Replay the address streams of the one-thread-per-row kernels.

    ``fmt`` is ``"csr"`` (scalar CSR), ``"ellpack"`` or ``"rgcsr"``. The
    row-grouped kernel launches one block per group; the other two use
    ``block_size`` threads per block, defaulting to ``group_size`` when given
    so the formats can be compared under the same launch shape, else to the
    warp size.

    A thread whose row is exhausted issues no loads. The ELLPACK kernel reads
    every slot of its row, padding included. Each thread writes its output
    element once. The recorded x trace is ordered by block, then step, then
    thread.
    """
    if fmt not in ("csr", "ellpack", "rgcsr"):
        raise ValueError(f"traffic model supports csr, ellpack, rgcsr; got {fmt!r}")
    value_bytes = PRECISION_BYTES[precision]
    n = m.num_rows
    lens = row_lengths(m)
    rows = np.arange(n)

    if fmt == "rgcsr":
        if group_size is None:
            raise ValueError("rgcsr needs a group size")
        a = build_rgcsr(m, group_size)
        block_size = group_size
        grp = rows // group_size
        stride = np.minimum(group_size, n - grp * group_size)
        base = a.group_pointers[grp] + rows % group_size
        steps = lens
        columns = a.columns
    elif fmt == "csr":
        a = build_csr(m)
        block_size = block_size or group_size or model.warp
        stride = np.ones(n, dtype=np.int64)
        base = a.row_pointers[:-1]
        steps = lens
        columns = a.columns
    else:
        a = build_ellpack(m)
        block_size = block_size or group_size or model.warp
        stride = np.full(n, n, dtype=np.int64)
        base = rows
        steps = np.full(n, a.width, dtype=np.int64)
        columns = a.columns
    if block_size < 1:
        raise ValueError("block size must be at least 1")

    hw = _half_warp_ids(n, block_size, model.half_warp)
    tally = _Tally(model, value_bytes)
    trace_parts, trace_keys = [], []
    block = rows // block_size

    active = np.flatnonzero(steps)
    j = 0
    while active.size:
        ptr = base[active] + j * stride[active]
        h = hw[active]
        tally.add("values", h, ptr)
        tally.add("columns", h, ptr)
        xcol = columns[ptr]
        tally.add("x", h, xcol)
        trace_parts.append(xcol)
        trace_keys.append(np.stack([block[active], np.full(active.size, j), active], axis=1))
        j += 1
        active = active[steps[active] > j]
    tally.add("output", hw, rows)

    if trace_parts:
        keys = np.concatenate(trace_keys)
        order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
        x_trace = np.concatenate(trace_parts)[order]
    else:
        x_trace = np.zeros(0, dtype=np.int64)
    return TransactionReport(dict(tally.tx), dict(tally.min), x_trace)


def simulate_texture_cache(x_read_trace, cache: CacheConfig = CacheConfig(),
                           element_bytes: int = 4) -> CacheReport:
    """Fully associative LRU over cache lines, replaying x element reads."""
    if cache.num_lines <= 0:
        raise ValueError("zero-capacity cache")
    lines = (np.asarray(x_read_trace, dtype=np.int64) * element_bytes) // cache.line_bytes
    lru: OrderedDict[int, None] = OrderedDict()
    hits = misses = 0
    for line in lines.tolist():
        if line in lru:
            hits += 1
            lru.move_to_end(line)
        else:
            misses += 1
            lru[line] = None
            if len(lru) > cache.num_lines:
                lru.popitem(last=False)
    return CacheReport(hits, misses)


def peak_performance(model: AccessModel = AccessModel(), precision: str = "single",
                     cached_x: bool = False) -> PeakEstimate:
    """Bandwidth-bound GFLOPS: per nonzero one column index and one value are
    read, plus one x element unless x is served from cache; two flops each."""
    value_bytes = PRECISION_BYTES[precision]
    per_nnz = model.index_bytes + value_bytes + (0 if cached_x else value_bytes)
    return PeakEstimate(precision, cached_x, per_nnz, 2 * model.bandwidth_gb_s / per_nnz)


def measured_gflops(nnz: int, seconds: float) -> float:
    if seconds <= 0:
        raise ValueError("elapsed time must be positive")
    return 2 * nnz / seconds / 1e9
