"""Command-line driver: ``inspect``, ``bench``, ``simulate`` and ``reorder``.

Matrix arguments are Matrix Market paths, ``fixture:m8`` or
``synthetic:ROWS`` (banded plus seeded scatter, see ``--seed``).
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import formats as F
from .matrix_core import (
    MatrixMarketError,
    TripletMatrix,
    drop_stored_zeros,
    fixture_m8,
    matrix_stats,
    read_matrix_market,
    row_lengths,
    spmv_reference,
    synthetic_matrix,
    write_matrix_market,
)
from .memsim import (
    AccessModel,
    CacheConfig,
    peak_performance,
    simulate_spmv_traffic,
    simulate_texture_cache,
)
from .memsim import measured_gflops
from .reorder import (
    Permutation,
    PermutationError,
    apply_permutation,
    descending_row_permutation,
    read_permutation,
)

DEFAULT_GROUP_SIZES = (32, 64, 128, 256)
CHECK_RTOL = {"double": 1e-10, "single": 1e-5}

BENCH_COLUMNS = (
    "matrix_name", "format_name", "group_size", "precision", "ordering", "nnz",
    "repetitions", "median_seconds", "gflops", "fill_percent", "artificial_zeros",
    "bytes", "checksum", "oracle_checksum",
)


class ChecksumMismatch(RuntimeError):
    pass


@dataclass
class BenchRecord:
    matrix_name: str
    format_name: str
    group_size: int | None
    precision: str
    ordering: str
    nnz: int
    repetitions: int
    median_seconds: float
    gflops: float
    fill_percent: float
    artificial_zeros: int
    bytes: int
    checksum: float
    oracle_checksum: float


@dataclass
class RunConfig:
    inputs: list[str]
    formats: list[str] = field(default_factory=lambda: ["csr", "hybrid", "rgcsr"])
    group_sizes: list[int] = field(default_factory=lambda: list(DEFAULT_GROUP_SIZES))
    precisions: list[str] = field(default_factory=lambda: ["double"])
    ordering: str = "none"
    repetitions: int = 20
    out: str | None = None
    seed: int = 0
    x_ones: bool = False
    drop_zeros: bool = False

    def __post_init__(self):
        if not self.formats:
            raise ValueError("at least one format is required")
        if any(g < 1 for g in self.group_sizes):
            raise ValueError("group sizes must be at least 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")


# -- inputs ------------------------------------------------------------------

def load_matrix(spec: str, seed: int = 0, drop_zeros: bool = False) -> tuple[str, TripletMatrix]:
    if spec == "fixture:m8":
        name, m = "m8", fixture_m8()
    elif spec.startswith("synthetic:"):
        n = int(spec.split(":", 1)[1])
        name, m = f"synthetic{n}_seed{seed}", synthetic_matrix(n, seed=seed)
    else:
        name, m = Path(spec).stem, read_matrix_market(spec)
    if drop_zeros:
        m = drop_stored_zeros(m)
    return name, m


def resolve_ordering(m: TripletMatrix, ordering: str) -> Permutation | None:
    if ordering == "none":
        return None
    if ordering == "descending":
        return descending_row_permutation(m)
    if ordering.startswith("file:"):
        return read_permutation(ordering[5:])
    raise ValueError(f"unknown ordering {ordering!r}")


def ordered(m: TripletMatrix, ordering: str, mode: str = "rows") -> TripletMatrix:
    p = resolve_ordering(m, ordering)
    return m if p is None else apply_permutation(m, p, mode)


def make_x(n: int, seed: int, ones: bool) -> np.ndarray:
    if ones:
        return np.ones(n)
    return np.random.default_rng(seed).uniform(-1.0, 1.0, n)


def _format_jobs(names, group_sizes):
    for name in names:
        if name == "rgcsr":
            for g in group_sizes:
                yield name, g
        else:
            yield name, None


# -- commands ----------------------------------------------------------------

def cmd_inspect(matrix: TripletMatrix, formats=("csr", "ellpack", "hybrid", "bcsr", "rgcsr"),
                group_sizes=DEFAULT_GROUP_SIZES) -> dict:
    stats = matrix_stats(matrix)
    reports = []
    for name, g in _format_jobs(formats, group_sizes):
        try:
            rep = F.fill_report(F.build(name, matrix, group_size=g))
        except F.SlotBudgetExceeded as e:
            reports.append({"format_name": name, "error": str(e)})
            continue
        reports.append(asdict(rep))
    return {"stats": asdict(stats), "fill": reports}


def _check(y, y_ref, scale, precision, what):
    tol = CHECK_RTOL[precision] * max(scale, 1.0)
    err = float(np.max(np.abs(y - y_ref))) if y.size else 0.0
    if err > tol:
        raise ChecksumMismatch(f"{what}: max deviation {err:.3e} exceeds {tol:.3e}")
    cs, ref_cs = float(np.sum(y)), float(np.sum(y_ref))
    if abs(cs - ref_cs) > tol * max(y.size, 1):
        raise ChecksumMismatch(f"{what}: checksum {cs!r} != oracle {ref_cs!r}")
    return cs, ref_cs


def bench_one(name: str, matrix: TripletMatrix, fmt: str, group_size, precision: str,
              repetitions: int, x: np.ndarray, ordering: str = "none") -> BenchRecord:
    dtype = F.PRECISION_DTYPES[precision]
    a = F.build(fmt, matrix, group_size=group_size)
    a_cast = a.astype(dtype)
    x_cast = x.astype(dtype)
    # the oracle sees the same rounded inputs the kernel does
    ref_m = a_cast.to_triplets()
    y_ref = spmv_reference(ref_m, x_cast.astype(np.float64))
    scale = float(np.abs(ref_m.values) @ np.abs(x_cast[ref_m.cols].astype(np.float64))) \
        if ref_m.nnz() else 0.0
    what = f"{name}/{fmt}" + (f"/g{group_size}" if group_size else "") + f"/{precision}"
    y = F.spmv(a_cast, x_cast).astype(np.float64)
    checksum, oracle_checksum = _check(y, y_ref, scale, precision, what)

    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        F.spmv(a_cast, x_cast)
        times.append(time.perf_counter() - t0)
    med = statistics.median(times)
    rep = F.fill_report(a)
    return BenchRecord(
        matrix_name=name, format_name=fmt, group_size=group_size, precision=precision,
        ordering=ordering, nnz=matrix.nnz(), repetitions=repetitions, median_seconds=med,
        gflops=measured_gflops(matrix.nnz(), med), fill_percent=rep.fill_percent,
        artificial_zeros=rep.artificial_zeros,
        bytes=rep.bytes_single if precision == "single" else rep.bytes_double,
        checksum=checksum, oracle_checksum=oracle_checksum,
    )


def cmd_bench(config: RunConfig, log=sys.stderr) -> tuple[list[BenchRecord], list[str]]:
    records, failures = [], []
    for spec in config.inputs:
        name, m = load_matrix(spec, config.seed, config.drop_zeros)
        m = ordered(m, config.ordering)
        x = make_x(m.num_cols, config.seed, config.x_ones)
        for fmt, g in _format_jobs(config.formats, config.group_sizes):
            for prec in config.precisions:
                try:
                    records.append(bench_one(name, m, fmt, g, prec, config.repetitions, x,
                                             config.ordering))
                except (ChecksumMismatch, F.SlotBudgetExceeded) as e:
                    failures.append(str(e))
                    print(f"error: {e}", file=log)
    if config.out:
        write_bench(records, config.out, config)
    return records, failures


def write_bench(records: list[BenchRecord], out: str, config: RunConfig | None = None) -> None:
    base = Path(out)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    with open(base.with_suffix(".csv"), "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow({k: ("" if v is None else v) for k, v in asdict(r).items()})
    payload = {
        "timing": "median wall-clock seconds of `repetitions` SpMV calls after one checked run",
        "config": asdict(config) if config else None,
        "records": [asdict(r) for r in records],
    }
    with open(base.with_suffix(".json"), "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def cmd_simulate(matrix: TripletMatrix, fmt: str, group_size: int | None = None,
                 precision: str = "single", cache: CacheConfig = CacheConfig(),
                 model: AccessModel = AccessModel(), ordering: str = "none",
                 mode: str = "rows") -> dict:
    m = ordered(matrix, ordering, mode)
    if fmt == "rgcsr" and group_size is None:
        raise ValueError("rgcsr needs --group-size")
    tr = simulate_spmv_traffic(fmt, m, model, precision, group_size=group_size)
    value_bytes = F.PRECISION_BYTES[precision]
    cr = simulate_texture_cache(tr.x_trace, cache, value_bytes)
    rep = F.fill_report(F.build(fmt, m, group_size=group_size))
    peak = peak_performance(model, precision, cached_x=True)
    return {
        "format": fmt,
        "group_size": group_size,
        "precision": precision,
        "ordering": ordering,
        "artificial_zeros": rep.artificial_zeros,
        "fill_percent": rep.fill_percent,
        **tr.to_dict(),
        "values_efficiency": tr.array_efficiency("values"),
        "cache": cr.to_dict(),
        "peak": peak.to_dict() | {"cached_x": True},
    }


def cmd_reorder(matrix: TripletMatrix, ordering: str, out: str | None,
                group_sizes=DEFAULT_GROUP_SIZES, mode: str = "rows") -> dict:
    if ordering == "none":
        raise ValueError("reorder needs --ordering descending or file:PATH")
    p = resolve_ordering(matrix, ordering)
    pm = apply_permutation(matrix, p, mode)
    if out:
        write_matrix_market(pm, out, comment=f"rows permuted ({ordering}, {mode})")
    rows = []
    for g in group_sizes:
        before = F.fill_report(F.build_rgcsr(matrix, g))
        after = F.fill_report(F.build_rgcsr(pm, g))
        rows.append({
            "group_size": g,
            "artificial_zeros_before": before.artificial_zeros,
            "artificial_zeros_after": after.artificial_zeros,
            "fill_percent_before": before.fill_percent,
            "fill_percent_after": after.fill_percent,
        })
    return {"ordering": ordering, "mode": mode, "output": out, "groups": rows, "matrix": pm}


# -- argument parsing --------------------------------------------------------

def _split(values, cast=str):
    out = []
    for v in values or []:
        out.extend(cast(s) for s in v.split(",") if s)
    return out


def _add_common(p, formats_default):
    p.add_argument("--format", action="append", help=f"comma list (default {formats_default})")
    p.add_argument("--group-size", action="append", help="comma list of RgCSR group sizes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--drop-zeros", action="store_true", help="discard explicitly stored zeros")
    p.add_argument("--out", help="output path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparsefmt", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="row statistics and padding per format")
    p.add_argument("matrix")
    _add_common(p, "csr,ellpack,hybrid,bcsr,rgcsr")

    p = sub.add_parser("bench", help="checked wall-clock SpMV benchmark")
    p.add_argument("matrix", nargs="+")
    _add_common(p, "csr,hybrid,rgcsr")
    p.add_argument("--precision", action="append", choices=["single", "double"])
    p.add_argument("--ordering", default="none")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--x", choices=["random", "ones"], default="random")

    p = sub.add_parser("simulate", help="simulated memory transactions and texture cache")
    p.add_argument("matrix")
    _add_common(p, "rgcsr")
    p.add_argument("--precision", choices=["single", "double"], default="single")
    p.add_argument("--ordering", action="append",
                   help="none, descending or file:PATH; repeat for a row per ordering")
    p.add_argument("--mode", choices=["rows", "symmetric"], default="rows")
    p.add_argument("--cache-lines", type=int, default=64)
    p.add_argument("--line-bytes", type=int, default=128)
    p.add_argument("--bandwidth", type=float, default=141.0)

    p = sub.add_parser("reorder", help="write a row-permuted matrix and report padding change")
    p.add_argument("matrix")
    p.add_argument("--ordering", required=True, help="descending or file:PATH")
    p.add_argument("--mode", choices=["rows", "symmetric"], default="rows")
    p.add_argument("--group-size", action="append")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--drop-zeros", action="store_true")
    p.add_argument("--out")
    return ap


def _print_inspect(name, result):
    s = result["stats"]
    print(f"{name}: {s['num_rows']} rows, nnz {s['nnz']}, row length "
          f"max/mean/min {s['row_len_max']}/{s['row_len_mean']:.3f}/{s['row_len_min']}, "
          f"density {s['density_percent']:.4g}%")
    print(f"{'format':<10}{'group':>7}{'slots':>12}{'art.zeros':>12}{'fill%':>10}"
          f"{'bytes(s)':>12}{'bytes(d)':>12}")
    for r in result["fill"]:
        if "error" in r:
            print(f"{r['format_name']:<10} {r['error']}")
            continue
        g = r["extra"].get("group_size", "")
        print(f"{r['format_name']:<10}{g!s:>7}{r['stored_slots']:>12}{r['artificial_zeros']:>12}"
              f"{r['fill_percent']:>10.2f}{r['bytes_single']:>12}{r['bytes_double']:>12}")


def _dump_json(obj, out):
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "inspect":
            name, m = load_matrix(args.matrix, args.seed, args.drop_zeros)
            formats = _split(args.format) or ["csr", "ellpack", "hybrid", "bcsr", "rgcsr"]
            groups = _split(args.group_size, int) or list(DEFAULT_GROUP_SIZES)
            result = cmd_inspect(m, formats, groups)
            _print_inspect(name, result)
            if args.out:
                _dump_json({"matrix": name} | result, args.out)
            return 0

        if args.command == "bench":
            config = RunConfig(
                inputs=args.matrix,
                formats=_split(args.format) or ["csr", "hybrid", "rgcsr"],
                group_sizes=_split(args.group_size, int) or list(DEFAULT_GROUP_SIZES),
                precisions=args.precision or ["double"],
                ordering=args.ordering, repetitions=args.reps, out=args.out,
                seed=args.seed, x_ones=args.x == "ones", drop_zeros=args.drop_zeros,
            )
            records, failures = cmd_bench(config)
            w = csv.DictWriter(sys.stdout, fieldnames=BENCH_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in records:
                w.writerow({k: ("" if v is None else v) for k, v in asdict(r).items()})
            return 1 if failures else 0

        if args.command == "simulate":
            name, m = load_matrix(args.matrix, args.seed, args.drop_zeros)
            formats = _split(args.format) or ["rgcsr"]
            if len(formats) != 1:
                raise ValueError("simulate takes exactly one --format")
            groups = _split(args.group_size, int)
            group = groups[0] if groups else None
            model = AccessModel(bandwidth_gb_s=args.bandwidth)
            cache = CacheConfig(line_bytes=args.line_bytes, num_lines=args.cache_lines)
            reports = [
                {"matrix": name} | cmd_simulate(m, formats[0], group, args.precision, cache,
                                                model, ordering, args.mode)
                for ordering in (args.ordering or ["none"])
            ]
            _dump_json(reports[0] if len(reports) == 1 else reports, args.out)
            return 0

        if args.command == "reorder":
            name, m = load_matrix(args.matrix, args.seed, args.drop_zeros)
            groups = _split(args.group_size, int) or list(DEFAULT_GROUP_SIZES)
            result = cmd_reorder(m, args.ordering, args.out, groups, args.mode)
            print(f"{name}: ordering {args.ordering} ({args.mode})"
                  + (f" -> {args.out}" if args.out else ""))
            for r in result["groups"]:
                print(f"  group {r['group_size']:>4}: artificial zeros "
                      f"{r['artificial_zeros_before']} -> {r['artificial_zeros_after']} "
                      f"({r['fill_percent_before']:.2f}% -> {r['fill_percent_after']:.2f}%)")
            return 0
    except (MatrixMarketError, PermutationError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
