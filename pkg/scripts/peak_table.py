"""Bandwidth-bound peak GFLOPS of the row-grouped kernel."""

import argparse

from sparsefmt.memsim import AccessModel, peak_performance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bandwidth", type=float, default=141.0, help="GB/s")
    args = ap.parse_args()
    model = AccessModel(bandwidth_gb_s=args.bandwidth)
    print(f"{'texture cache for x':<22}{'single':>10}{'double':>10}")
    for cached in (False, True):
        row = [peak_performance(model, p, cached).gflops for p in ("single", "double")]
        print(f"{'with' if cached else 'without':<22}{row[0]:>10.2f}{row[1]:>10.2f}")


if __name__ == "__main__":
    main()
