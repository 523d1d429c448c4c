"""Sparse storage formats for one-thread-per-row SpMV: CSR, blocked CSR,
ELLPACK, COO/Hybrid and row-grouped CSR, with padding accounting, row
reordering and a coalesced-memory traffic model."""

from .formats import (
    BcsrMatrix,
    CooArrays,
    CsrMatrix,
    EllpackMatrix,
    FillReport,
    HybridMatrix,
    RgcsrMatrix,
    build,
    build_bcsr,
    build_coo,
    build_csr,
    build_ellpack,
    build_hybrid,
    build_rgcsr,
    choose_k1,
    fill_report,
    spmv,
    spmv_bcsr,
    spmv_coo,
    spmv_csr,
    spmv_ellpack,
    spmv_hybrid,
    spmv_rgcsr,
    to_debug_json,
)
from .matrix_core import (
    MatrixStats,
    TripletMatrix,
    canonicalize,
    fixture_m8,
    matrix_stats,
    parse_matrix_market,
    row_lengths,
    spmv_reference,
)
from .memsim import (
    AccessModel,
    CacheConfig,
    count_segment_transactions,
    measured_gflops,
    peak_performance,
    simulate_spmv_traffic,
    simulate_texture_cache,
)
from .reorder import (
    Permutation,
    apply_permutation,
    descending_row_permutation,
    load_permutation,
    min_padding_row_permutation,
)

__version__ = "0.1.0"
