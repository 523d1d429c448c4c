"""Print storage counts of every format on the 8x8 example matrix."""

import numpy as np

from sparsefmt import formats as F
from sparsefmt.matrix_core import fixture_m8, spmv_reference


def main():
    m = fixture_m8()
    x = np.ones(m.num_cols)
    ref = spmv_reference(m, x)
    print(f"{'format':<12}{'slots':>7}{'art.zeros':>11}{'fill%':>9}{'eff%':>7}  y == oracle")
    for name, g in [("csr", None), ("coo", None), ("bcsr", None), ("ellpack", None),
                    ("hybrid", None), ("rgcsr", 4), ("rgcsr", 8)]:
        a = F.build(name, m, group_size=g)
        r = F.fill_report(a)
        label = name + (f"/{g}" if g else "")
        ok = np.array_equal(F.spmv(a, x), ref)
        print(f"{label:<12}{r.stored_slots:>7}{r.artificial_zeros:>11}{r.fill_percent:>9.2f}"
              f"{100 * r.efficiency:>7.1f}  {ok}")
    print("\nrow-grouped layout, group of 4:")
    print(F.to_debug_json(F.build_rgcsr(m, 4)))


if __name__ == "__main__":
    main()
