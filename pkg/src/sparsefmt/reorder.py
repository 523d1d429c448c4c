"""Row orderings that shrink row-grouped padding, and loading of orderings
computed by external tools (one 0-based row index per line)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import group_widths
from .matrix_core import TripletMatrix, canonicalize, row_lengths


class PermutationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Permutation:
    """New row ``i`` is old row ``map[i]``."""

    map: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.map, dtype=np.int64)
        if p.ndim != 1:
            raise PermutationError("permutation must be one-dimensional")
        n = p.size
        if n and (p.min() < 0 or p.max() >= n):
            raise PermutationError(f"index out of range 0..{n - 1}")
        if np.bincount(p, minlength=n).max(initial=1) > 1:
            raise PermutationError("not a bijection: repeated index")
        p.setflags(write=False)
        object.__setattr__(self, "map", p)

    def __len__(self):
        return int(self.map.size)

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.map, other.map)

    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.map)
        inv[self.map] = np.arange(self.map.size)
        return inv

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.map, np.arange(self.map.size)))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))


def descending_row_permutation(m: TripletMatrix) -> Permutation:
    """Rows by decreasing length; equal lengths keep their original order."""
    lens = row_lengths(m)
    return Permutation(np.argsort(-lens, kind="stable"))


def padding_for_lengths(lens, group_size: int) -> int:
    """Row-grouped padding slots for rows laid out in the given order."""
    lens = np.asarray(lens, dtype=np.int64)
    n = lens.size
    if n == 0:
        return 0
    widths = group_widths(lens, group_size)
    sizes = np.minimum(group_size, n - np.arange(widths.size) * group_size)
    return int((sizes * widths).sum() - lens.sum())


def min_padding_row_permutation(m: TripletMatrix, group_size: int) -> Permutation:
    """Row permutation with the fewest row-grouped padding slots for this
    group size.

    Plain descending order is optimal only when every group is full. With a
    short last group the best layout still takes the rows in descending
    order, but the short group may be better off holding an earlier slice of
    that order; every position is tried.
    """
    if group_size < 1:
        raise ValueError("group size must be at least 1")
    desc = descending_row_permutation(m).map
    n = desc.size
    short = n % group_size
    if short == 0:
        return Permutation(desc)
    lens = row_lengths(m)[desc]
    n_full = n // group_size
    best, best_cost = None, None
    for k in range(n_full + 1):
        # short group takes the slice right after the first k full groups
        cut = k * group_size
        order = np.concatenate([desc[:cut], desc[cut + short:], desc[cut:cut + short]])
        cost = padding_for_lengths(np.concatenate(
            [lens[:cut], lens[cut + short:], lens[cut:cut + short]]), group_size)
        if best_cost is None or cost < best_cost:
            best, best_cost = order, cost
    return Permutation(best)


def apply_permutation(m: TripletMatrix, p: Permutation, mode: str = "rows") -> TripletMatrix:
    """Permute rows (``mode="rows"``) or rows and columns alike
    (``mode="symmetric"``)."""
    if len(p) != m.num_rows:
        raise PermutationError(f"permutation has length {len(p)}, matrix has {m.num_rows} rows")
    inv = p.inverse()
    rows = inv[m.rows]
    cols = m.cols
    if mode == "symmetric":
        if m.num_rows != m.num_cols:
            raise PermutationError("symmetric permutation needs a square matrix")
        cols = inv[m.cols]
    elif mode != "rows":
        raise ValueError(f"unknown mode {mode!r}")
    return canonicalize(None, m.num_rows, m.num_cols, rows=rows, cols=cols, values=m.values)


def load_permutation(text: str) -> Permutation:
    idx = []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s:
            continue
        try:
            idx.append(int(s))
        except ValueError:
            raise PermutationError(f"line {lineno}: not an integer: {s!r}") from None
    return Permutation(np.array(idx, dtype=np.int64))


def read_permutation(path) -> Permutation:
    with open(path, encoding="utf-8") as f:
        return load_permutation(f.read())


def format_permutation(p: Permutation) -> str:
    return "".join(f"{i}\n" for i in p.map.tolist())
