import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsefmt import formats as F
from sparsefmt.matrix_core import (
    TripletMatrix,
    canonicalize,
    identity,
    row_lengths,
    spmv_reference,
)

from conftest import M8_ONES, seeded_matrix

ALL = ("csr", "ellpack", "coo", "hybrid", "bcsr", "rgcsr")


def dense_ones(n):
    return canonicalize([(i, j, 1.0) for i in range(n) for j in range(n)], n, n)


def lengths_matrix(lens, num_cols=None):
    """Row i holds entries in columns 0..lens[i]-1, valued 1, 2, 3, ..."""
    num_cols = num_cols or max(max(lens, default=1), 1)
    raw, v = [], 1.0
    for i, n in enumerate(lens):
        for j in range(n):
            raw.append((i, j, v))
            v += 1
    return canonicalize(raw, len(lens), num_cols)


def exhaustive_k1(lens):
    """Independent scan: evaluate every width and keep the first minimum."""
    best_k, best = 0, None
    for k in range(max(lens, default=0) + 1):
        cost = 2 * len(lens) * k + 3 * sum(max(0, n - k) for n in lens)
        if best is None or cost < best:
            best_k, best = k, cost
    return best_k


# -- CSR ---------------------------------------------------------------------

def test_csr_fixture_row_pointers(m8):
    a = F.build_csr(m8)
    assert a.row_pointers.tolist() == [0, 2, 3, 4, 5, 6, 8, 11, 13]
    assert a.values.tolist() == [float(v) for v in range(1, 14)]


def test_csr_empty_and_identity():
    assert F.build_csr(TripletMatrix(3, 3, [], [], [])).row_pointers.tolist() == [0, 0, 0, 0]
    a = F.build_csr(identity(3))
    assert a.values.tolist() == [1.0, 1.0, 1.0]
    assert a.columns.tolist() == [0, 1, 2]
    assert a.row_pointers.tolist() == [0, 1, 2, 3]


def test_spmv_csr(m8):
    a = F.build_csr(m8)
    assert F.spmv_csr(a, np.ones(8)).tolist() == M8_ONES
    assert F.spmv_csr(a, np.zeros(8)).tolist() == [0.0] * 8
    assert F.spmv_csr(F.build_csr(identity(3)), [4, 5, 6]).tolist() == [4, 5, 6]
    with pytest.raises(ValueError):
        F.spmv_csr(a, np.ones(9))


# -- ELLPACK -----------------------------------------------------------------

def test_ellpack_fixture(m8):
    a = F.build_ellpack(m8)
    assert a.width == 3
    assert a.stored_slots == 24
    assert F.fill_report(a).artificial_zeros == 11


def test_ellpack_slot_major_layout(m8):
    a = F.build_ellpack(m8)
    # slot 0 of rows 0..7, then slot 1, then slot 2; pads are (0, col 0)
    assert a.values.tolist() == [1, 3, 4, 5, 6, 7, 9, 12,
                                 2, 0, 0, 0, 0, 8, 10, 13,
                                 0, 0, 0, 0, 0, 0, 11, 0]
    assert a.columns[8:16].tolist() == [3, 0, 0, 0, 0, 5, 4, 7]


def test_ellpack_identity_and_skewed():
    a = F.build_ellpack(identity(5))
    assert (a.width, F.fill_report(a).artificial_zeros) == (1, 0)
    a = F.build_ellpack(lengths_matrix([4, 1, 1, 1]))
    assert (a.width, a.stored_slots, F.fill_report(a).artificial_zeros) == (4, 16, 9)


def test_ellpack_slot_budget():
    # diagonal plus one full row: 2N-1 entries but N*N slots
    n = 40
    raw = [(i, i, 1.0) for i in range(n)] + [(0, j, 1.0) for j in range(1, n)]
    m = canonicalize(raw, n, n)
    with pytest.raises(F.SlotBudgetExceeded):
        F.build_ellpack(m, slot_budget=n * n - 1)
    assert F.build_ellpack(m, slot_budget=n * n).stored_slots == n * n


def test_spmv_ellpack(m8):
    assert F.spmv_ellpack(F.build_ellpack(m8), np.ones(8)).tolist() == M8_ONES
    one_row = canonicalize([(0, 2, 3.0)], 1, 3)
    assert F.spmv_ellpack(F.build_ellpack(one_row), [0, 0, 5]).tolist() == [15.0]


# -- COO / Hybrid ------------------------------------------------------------

def test_spmv_coo_accumulates():
    a = F.CooArrays(1, 1, np.array([0]), np.array([0]), np.array([2.0]))
    assert F.spmv_coo(a, [3.0], [1.0]).tolist() == [7.0]
    empty = F.CooArrays(2, 2, np.zeros(0, int), np.zeros(0, int), np.zeros(0))
    assert F.spmv_coo(empty, [1.0, 1.0], [4.0, 5.0]).tolist() == [4.0, 5.0]
    with pytest.raises(ValueError):
        F.spmv_coo(a, [3.0], [1.0, 2.0])


def test_spmv_coo_fixture(m8):
    assert F.spmv_coo(F.build_coo(m8), np.ones(8), np.zeros(8)).tolist() == M8_ONES


def test_choose_k1_examples():
    assert [F.hybrid_cost([2, 1, 1, 1, 1, 2, 3, 2], k) for k in range(4)] == [39, 31, 35, 48]
    assert F.choose_k1([2, 1, 1, 1, 1, 2, 3, 2]) == 1
    assert F.choose_k1([3, 3, 3, 3]) == 3
    assert F.choose_k1([0, 0, 0]) == 0
    assert F.choose_k1([]) == 0


@given(st.lists(st.integers(0, 40), max_size=50))
def test_choose_k1_matches_exhaustive_scan(lens):
    assert F.choose_k1(lens) == exhaustive_k1(lens)


def test_hybrid_fixture_split(m8):
    h = F.build_hybrid(m8, 1)
    assert h.ell.nnz == 8
    assert h.coo.to_triplets().entries == [
        (0, 3, 2.0), (5, 5, 8.0), (6, 4, 10.0), (6, 6, 11.0), (7, 7, 13.0)]
    assert F.spmv_hybrid(h, np.ones(8)).tolist() == M8_ONES
    assert F.build_hybrid(m8).k1 == 1


def test_hybrid_degenerate_widths(m8):
    full = F.build_hybrid(m8, 3)
    assert full.coo.nnz == 0
    ell = F.build_ellpack(m8)
    assert np.array_equal(full.ell.values, ell.values)
    assert np.array_equal(full.ell.columns, ell.columns)

    none = F.build_hybrid(m8, 0)
    assert none.ell.stored_slots == 0 and none.coo.nnz == 13
    x = np.arange(8.0)
    assert F.spmv_hybrid(none, x).tolist() == F.spmv_coo(F.build_coo(m8), x).tolist()
    assert F.spmv_hybrid(none, np.zeros(8)).tolist() == [0.0] * 8

    with pytest.raises(ValueError):
        F.build_hybrid(m8, 4)


# -- Blocked CSR -------------------------------------------------------------

def test_bcsr_fixture(m8):
    a = F.build_bcsr(m8)
    assert a.num_blocks == 3
    assert a.block_row_pointers.tolist() == [0, 1, 3]
    assert a.block_column_index.tolist() == [0, 0, 1]
    rep = F.fill_report(a)
    assert (rep.stored_slots, rep.artificial_zeros) == (48, 35)
    assert round(100 * rep.efficiency) == 27


def test_bcsr_identity_and_dense():
    rep = F.fill_report(F.build_bcsr(identity(4)))
    assert (rep.stored_slots, rep.artificial_zeros) == (16, 12)
    a = F.build_bcsr(dense_ones(4))
    assert (a.num_blocks, F.fill_report(a).artificial_zeros) == (1, 0)
    assert F.spmv_bcsr(a, np.ones(4)).tolist() == [4.0] * 4


def test_bcsr_partial_tiles_and_custom_dims():
    m = canonicalize([(0, 0, 1.0), (4, 5, 2.0), (5, 2, 3.0)], 6, 7)
    a = F.build_bcsr(m, (4, 4))
    assert a.num_blocks == 3
    assert F.spmv_bcsr(a, np.arange(7.0)).tolist() == spmv_reference(m, np.arange(7.0)).tolist()
    b = F.build_bcsr(m, (2, 3))
    assert b.stored_slots == 3 * 6
    assert b.to_triplets() == m


def test_bcsr_rejects_zero_dims(m8):
    with pytest.raises(ValueError):
        F.build_bcsr(m8, (0, 4))


def test_spmv_bcsr(m8):
    a = F.build_bcsr(m8)
    assert F.spmv_bcsr(a, np.ones(8)).tolist() == M8_ONES
    assert F.spmv_bcsr(a, np.zeros(8)).tolist() == [0.0] * 8


# -- Row-grouped CSR ---------------------------------------------------------

def test_rgcsr_fixture_layout(m8):
    a = F.build_rgcsr(m8, 4)
    assert a.group_pointers.tolist() == [0, 8, 20]
    assert a.row_lengths.tolist() == [2, 1, 1, 1, 1, 2, 3, 2]
    assert a.values.tolist() == [1, 3, 4, 5, 2, 0, 0, 0,
                                 6, 7, 9, 12, 0, 8, 10, 13, 0, 0, 11, 0]
    assert F.fill_report(a).artificial_zeros == 7


def test_rgcsr_single_group_is_ellpack(m8):
    a = F.build_rgcsr(m8, 8)
    assert a.num_groups == 1
    assert a.stored_slots == 24
    assert F.fill_report(a).artificial_zeros == 11
    assert np.array_equal(a.values, F.build_ellpack(m8).values)


def test_rgcsr_short_last_group_strides_by_its_row_count():
    m = lengths_matrix([1, 1, 1, 3, 2])
    a = F.build_rgcsr(m, 3)
    assert a.group_pointers.tolist() == [0, 3, 9]
    # last group has two rows: row 3 at 3, 5, 7; row 4 at 4, 6
    assert a.values[3:].tolist() == [4.0, 7.0, 5.0, 8.0, 6.0, 0.0]


def test_rgcsr_identity_has_no_padding():
    for g in (1, 2, 3, 7):
        assert F.fill_report(F.build_rgcsr(identity(7), g)).artificial_zeros == 0


def test_rgcsr_rejects_zero_group(m8):
    with pytest.raises(ValueError):
        F.build_rgcsr(m8, 0)


def test_spmv_rgcsr_skips_padding(m8):
    a = F.build_rgcsr(m8, 4)
    counter = {}
    assert F.spmv_rgcsr(a, np.ones(8), counter).tolist() == M8_ONES
    assert counter["madd"] == 13
    assert a.stored_slots == 20
    assert F.spmv_rgcsr(a, np.zeros(8)).tolist() == [0.0] * 8


def test_spmv_rgcsr_never_reads_padding(m8):
    a = F.build_rgcsr(m8, 4)
    pad = np.ones(a.stored_slots, bool)
    pad[a.slot_offsets()] = False
    poisoned = F.RgcsrMatrix(a.num_rows, a.num_cols, a.group_size,
                             np.where(pad, np.nan, a.values), a.columns,
                             a.group_pointers, a.row_lengths)
    assert F.spmv_rgcsr(poisoned, np.ones(8)).tolist() == M8_ONES


# -- accounting --------------------------------------------------------------

def test_fill_percent(m8):
    assert F.fill_report(F.build_rgcsr(m8, 4)).fill_percent == pytest.approx(100 * 7 / 13)
    assert F.fill_report(F.build_ellpack(m8)).fill_percent == pytest.approx(84.615, abs=1e-3)
    assert F.fill_report(F.build_csr(m8)).fill_percent == 0.0
    assert F.fill_report(F.build_coo(m8)).artificial_zeros == 0


def test_footprints(m8):
    # 13 values + 13 column indices + 9 row pointers
    assert F.fill_report(F.build_csr(m8)).bytes_single == 13 * 8 + 9 * 4
    assert F.fill_report(F.build_csr(m8)).bytes_double == 13 * 12 + 9 * 4
    # 20 slots of value+column, 3 group pointers, 8 row lengths
    assert F.fill_report(F.build_rgcsr(m8, 4)).bytes_double == 20 * 12 + 3 * 4 + 8 * 4
    assert F.fill_report(F.build_ellpack(m8)).bytes_single == 24 * 8
    assert F.fill_report(F.build_coo(m8)).bytes_single == 13 * 12
    # 48 values, 3 block column indices, 3 block row pointers
    assert F.fill_report(F.build_bcsr(m8)).bytes_single == 48 * 4 + 3 * 4 + 3 * 4


def test_debug_json_field_names(m8):
    d = json.loads(F.to_debug_json(F.build_rgcsr(m8, 4)))
    assert d["groupPointers"] == [0, 8, 20]
    assert d["rowLengths"] == [2, 1, 1, 1, 1, 2, 3, 2]
    assert len(d["values"]) == len(d["columns"]) == 20
    d = json.loads(F.to_debug_json(F.build_csr(m8)))
    assert d["rowPointers"] == [0, 2, 3, 4, 5, 6, 8, 11, 13]
    d = json.loads(F.to_debug_json(F.build_hybrid(m8, 1)))
    assert set(d["ell"]) >= {"values", "columns"} and len(d["coo"]["values"]) == 5
    for name in ALL:
        json.loads(F.to_debug_json(F.build(name, m8, group_size=4)))


# -- properties --------------------------------------------------------------

def _build_all(m):
    return [F.build(name, m, group_size=g)
            for name, g in [("csr", None), ("ellpack", None), ("coo", None),
                            ("hybrid", None), ("bcsr", None), ("rgcsr", 1),
                            ("rgcsr", 3), ("rgcsr", 16), ("rgcsr", 64)]]


@pytest.mark.parametrize("seed", range(40))
def test_round_trip(seed):
    m = seeded_matrix(seed)
    for a in _build_all(m):
        assert a.to_triplets() == m, a.format_name


@pytest.mark.parametrize("seed", range(40))
def test_integer_spmv_matches_oracle_exactly(seed):
    m = seeded_matrix(seed)
    x = np.random.default_rng(seed).integers(-8, 9, m.num_cols).astype(float)
    want = spmv_reference(m, x).tolist()
    for a in _build_all(m):
        assert F.spmv(a, x).tolist() == want, a.format_name


@pytest.mark.parametrize("seed", range(20))
def test_double_spmv_matches_oracle(seed):
    m = seeded_matrix(seed, integer=False)
    x = np.random.default_rng(seed).standard_normal(m.num_cols)
    want = spmv_reference(m, x)
    scale = max(np.abs(want).max(initial=0.0), 1e-300)
    for a in _build_all(m):
        assert np.max(np.abs(F.spmv(a, x) - want), initial=0.0) <= 1e-12 * scale


@pytest.mark.parametrize("seed", range(30))
def test_rgcsr_padding_monotone_in_doubling_group(seed):
    m = seeded_matrix(seed)
    counts, g = [], 1
    while True:
        counts.append(F.fill_report(F.build_rgcsr(m, g)).artificial_zeros)
        if g >= m.num_rows:
            break
        g *= 2
    assert counts[0] == 0
    assert counts[-1] == F.fill_report(F.build_ellpack(m)).artificial_zeros
    assert counts == sorted(counts)


@pytest.mark.parametrize("seed", range(30))
def test_hybrid_partition(seed):
    m = seeded_matrix(seed)
    h = F.build_hybrid(m)
    assert h.ell.nnz + h.coo.nnz == m.nnz()
    ell = h.ell.to_triplets()
    keys = set(zip(ell.rows.tolist(), ell.cols.tolist()))
    assert keys.isdisjoint(zip(h.coo.rows.tolist(), h.coo.columns.tolist()))
    lens = row_lengths(m)
    assert row_lengths(ell).tolist() == np.minimum(lens, h.k1).tolist()


def test_single_precision_storage_mode(m8):
    for a in _build_all(m8):
        y = F.spmv(a.astype(np.float32), np.ones(8, np.float32))
        assert y.dtype == np.float32
        assert y.tolist() == M8_ONES


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=20), st.integers(1, 8))
def test_rgcsr_layout_invariants(lens, g):
    m = lengths_matrix(lens, 7)
    a = F.build_rgcsr(m, g)
    n = len(lens)
    assert a.num_groups == -(-n // g)
    assert a.group_pointers[-1] == a.values.size
    for k in range(a.num_groups):
        s = a.group_rows(k)
        width = max(lens[k * g:k * g + s])
        assert a.group_pointers[k + 1] - a.group_pointers[k] == s * width
    pad = np.ones(a.stored_slots, bool)
    pad[a.slot_offsets()] = False
    assert not a.values[pad].any() and not a.columns[pad].any()
