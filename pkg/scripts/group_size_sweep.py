"""Padding and simulated traffic of row-grouped CSR across group sizes and
row orderings, on Matrix Market files or seeded synthetic matrices.

    python scripts/group_size_sweep.py synthetic:20000 path/to/matrix.mtx
"""

import argparse
import json

from sparsefmt import formats as F
from sparsefmt.cli import load_matrix, ordered
from sparsefmt.memsim import CacheConfig, simulate_spmv_traffic, simulate_texture_cache


def sweep(m, group_sizes, orderings, precision):
    rows = []
    base = simulate_spmv_traffic("csr", m, precision=precision, block_size=32)
    rows.append({"format": "csr", "group_size": None, "ordering": "none",
                 "fill_percent": 0.0, "values_tx": base.transactions["values"],
                 "x_tx": base.transactions["x"]})
    for ordering in orderings:
        pm = ordered(m, ordering)
        for g in group_sizes:
            rep = F.fill_report(F.build_rgcsr(pm, g))
            tr = simulate_spmv_traffic("rgcsr", pm, precision=precision, group_size=g)
            cache = simulate_texture_cache(tr.x_trace, CacheConfig(),
                                           F.PRECISION_BYTES[precision])
            rows.append({"format": "rgcsr", "group_size": g, "ordering": ordering,
                         "fill_percent": rep.fill_percent,
                         "values_tx": tr.transactions["values"],
                         "x_tx": tr.transactions["x"],
                         "cache_hits": cache.hits, "cache_misses": cache.misses})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("matrix", nargs="+")
    ap.add_argument("--group-size", type=int, nargs="+", default=[32, 64, 128, 256])
    ap.add_argument("--ordering", nargs="+", default=["none", "descending"])
    ap.add_argument("--precision", choices=["single", "double"], default="double")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()

    for spec in args.matrix:
        name, m = load_matrix(spec, args.seed)
        rows = sweep(m, args.group_size, args.ordering, args.precision)
        if args.json:
            print(json.dumps({"matrix": name, "rows": rows}, indent=2))
            continue
        print(f"{name}: {m.num_rows} rows, nnz {m.nnz()}")
        print(f"  {'format':<7}{'group':>6} {'ordering':<11}{'fill%':>9}{'values tx':>11}"
              f"{'x tx':>9}{'cache hit/miss':>17}")
        for r in rows:
            hm = f"{r['cache_hits']}/{r['cache_misses']}" if "cache_hits" in r else ""
            print(f"  {r['format']:<7}{r['group_size'] or '':>6} {r['ordering']:<11}"
                  f"{r['fill_percent']:>9.2f}{r['values_tx']:>11}{r['x_tx']:>9}{hm:>17}")


if __name__ == "__main__":
    main()
