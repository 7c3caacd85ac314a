"""Rankings, partitions of the item set and interleavings.

Conventions used throughout the package:

* A ranking of n items is a tuple ``r`` of 0-based ranks: ``r[j]`` is the rank
  of item ``j`` (0 is the most preferred position).
* The ordering view lists items from first to last and is ``inverse(r)``.
* ``compose(s, t)[i] == s[t[i]]``: apply ``t`` first, then ``s``.
* Rankings of S_n are indexed by their lexicographic (Lehmer code) position.

Files use 1-based values; convert with :func:`from_one_based` and
:func:`to_one_based` at the boundary only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .config import CapError, check_dense_n
from .kernels import lehmer_index_batch

Ranking = tuple[int, ...]

MAX_INTERLEAVINGS = 5_000_000


def validate(r: Sequence[int], n: int | None = None) -> Ranking:
    """Return ``r`` as a tuple after checking it is a permutation of 0..n-1."""
    r = tuple(int(v) for v in r)
    size = len(r) if n is None else n
    if len(r) != size:
        raise ValueError(f"expected a ranking of {size} items, got {len(r)} values")
    seen: set[int] = set()
    for v in r:
        if not 0 <= v < size:
            raise ValueError(f"rank value {v + 1} is outside 1..{size}")
        if v in seen:
            raise ValueError(f"duplicate rank value {v + 1}")
        seen.add(v)
    return r


def from_one_based(values: Iterable[int]) -> Ranking:
    return validate([int(v) - 1 for v in values])


def to_one_based(r: Sequence[int]) -> tuple[int, ...]:
    return tuple(int(v) + 1 for v in r)


def identity(n: int) -> Ranking:
    return tuple(range(n))


def compose(s: Sequence[int], t: Sequence[int]) -> Ranking:
    """(s o t)[i] = s[t[i]]."""
    if len(s) != len(t):
        raise ValueError(f"cannot compose rankings of sizes {len(s)} and {len(t)}")
    return tuple(s[v] for v in t)


def inverse(s: Sequence[int]) -> Ranking:
    out = [0] * len(s)
    for i, v in enumerate(s):
        out[v] = i
    return tuple(out)


def rank_index(s: Sequence[int]) -> int:
    """Position of ``s`` in the lexicographic enumeration of S_n."""
    n = len(s)
    idx = 0
    for i in range(n):
        smaller = sum(1 for j in range(i + 1, n) if s[j] < s[i])
        idx = idx * (n - i) + smaller
    return idx


def from_index(n: int, idx: int) -> Ranking:
    total = math.factorial(n)
    if not 0 <= idx < total:
        raise ValueError(f"index {idx} out of range for S_{n} (0..{total - 1})")
    digits = []
    for base in range(1, n + 1):
        idx, d = divmod(idx, base)
        digits.append(d)
    digits.reverse()
    pool = list(range(n))
    return tuple(pool.pop(d) for d in digits)


@lru_cache(maxsize=None)
def _all_rankings(n: int) -> np.ndarray:
    arr = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)
    arr.setflags(write=False)
    return arr


def all_rankings(n: int) -> np.ndarray:
    """(n!, n) read-only array of every ranking, row i having rank_index i."""
    check_dense_n(n, "enumeration of S_n")
    return _all_rankings(n)


def enumerate_sn(n: int) -> list[Ranking]:
    return [tuple(int(v) for v in row) for row in all_rankings(n)]


def index_batch(perms: np.ndarray) -> np.ndarray:
    """rank_index of every row of an (N, n) array."""
    perms = np.asarray(perms)
    if perms.ndim != 2:
        raise ValueError("expected a 2-d array of rankings")
    return lehmer_index_batch(perms)


def relative_ranks_batch(perms: np.ndarray, items: Sequence[int]) -> np.ndarray:
    """Rows of relative rankings of ``items`` (in the given item order)."""
    sub = np.asarray(perms)[:, list(items)]
    return np.argsort(np.argsort(sub, axis=1, kind="stable"), axis=1, kind="stable")


@dataclass(frozen=True)
class ItemPartition:
    """Split of items 0..n-1 into A (``a_items``) and its complement B."""

    a_items: tuple[int, ...]
    n: int
    b_items: tuple[int, ...] = field(init=False)
    order: tuple[int, ...] = field(init=False, repr=False)
    position: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        a = tuple(sorted(int(v) for v in self.a_items))
        if len(set(a)) != len(a):
            raise ValueError("repeated item in partition")
        if any(not 0 <= v < self.n for v in a):
            raise ValueError(f"partition items must lie in 0..{self.n - 1}")
        if not 0 < len(a) < self.n:
            raise ValueError("both sides of a partition must be nonempty")
        aset = set(a)
        b = tuple(v for v in range(self.n) if v not in aset)
        order = a + b
        object.__setattr__(self, "a_items", a)
        object.__setattr__(self, "b_items", b)
        # order maps contiguous position -> item; position is its inverse
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "position", inverse(order))

    @property
    def p(self) -> int:
        return len(self.a_items)

    @property
    def q(self) -> int:
        return len(self.b_items)

    @classmethod
    def contiguous(cls, p: int, q: int) -> "ItemPartition":
        return cls(tuple(range(p)), p + q)


def is_interleaving(t: Sequence[int], p: int) -> bool:
    return all(t[i] < t[i + 1] for i in range(p - 1)) and all(
        t[i] < t[i + 1] for i in range(p, len(t) - 1)
    )


def interleaving_from_subset(a_ranks: Iterable[int], n: int) -> Ranking:
    a = sorted(a_ranks)
    aset = set(a)
    return tuple(a) + tuple(v for v in range(n) if v not in aset)


def _check_interleaving_count(p: int, q: int) -> int:
    if p < 0 or q < 0:
        raise ValueError("interleaving sizes must be nonnegative")
    count = math.comb(p + q, p)
    if count > MAX_INTERLEAVINGS:
        raise CapError(f"C({p + q},{p}) = {count} interleavings exceeds the table cap {MAX_INTERLEAVINGS}")
    return count


def enumerate_interleavings(p: int, q: int) -> list[Ranking]:
    """All (p, q) interleavings in lexicographic order."""
    _check_interleaving_count(p, q)
    n = p + q
    return [interleaving_from_subset(c, n) for c in itertools.combinations(range(n), p)]


@lru_cache(maxsize=None)
def interleavings_array(p: int, q: int) -> np.ndarray:
    _check_interleaving_count(p, q)
    n = p + q
    arr = np.array(enumerate_interleavings(p, q), dtype=np.int64).reshape(-1, n)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def _subset_rank_table(n: int, p: int) -> np.ndarray:
    # cum[i, v] = sum_{u < v} C(n-1-u, p-1-i): lexicographic rank contributions
    cum = np.zeros((max(p, 1), n + 1), dtype=np.int64)
    for i in range(p):
        for v in range(n):
            cum[i, v + 1] = cum[i, v] + math.comb(n - 1 - v, p - 1 - i)
    return cum


def subset_index_batch(sorted_subsets: np.ndarray, n: int) -> np.ndarray:
    """Lexicographic rank of each row (an increasing p-subset of 0..n-1)."""
    sorted_subsets = np.asarray(sorted_subsets, dtype=np.int64)
    count, p = sorted_subsets.shape
    if p == 0:
        return np.zeros(count, dtype=np.int64)
    cum = _subset_rank_table(n, p)
    prev = np.concatenate([np.full((count, 1), -1), sorted_subsets[:, :-1]], axis=1)
    rows = np.arange(p)[None, :]
    return (cum[rows, sorted_subsets] - cum[rows, prev + 1]).sum(axis=1)


def interleaving_index(t: Sequence[int], p: int) -> int:
    """Position of interleaving ``t`` in :func:`enumerate_interleavings` order."""
    if not is_interleaving(t, p):
        raise ValueError(f"{tuple(t)} is not a ({p},{len(t) - p}) interleaving")
    return int(subset_index_batch(np.array([t[:p]]), len(t))[0])


def interleaving_map(s: Sequence[int], part: ItemPartition) -> Ranking:
    if len(s) != part.n:
        raise ValueError("ranking and partition sizes differ")
    return tuple(sorted(s[a] for a in part.a_items)) + tuple(sorted(s[b] for b in part.b_items))


def relative_rank_map(s: Sequence[int], items: Sequence[int]) -> Ranking:
    """Ranks of ``items`` relative to each other, listed in the order of ``items``."""
    values = [s[i] for i in items]
    order = sorted(range(len(values)), key=values.__getitem__)
    return inverse(order)


def decompose(s: Sequence[int], part: ItemPartition) -> tuple[Ranking, Ranking, Ranking]:
    """Split a ranking into (interleaving, relative ranking of A, relative ranking of B)."""
    return (
        interleaving_map(s, part),
        relative_rank_map(s, part.a_items),
        relative_rank_map(s, part.b_items),
    )


def recompose(
    t: Sequence[int], pa: Sequence[int], pb: Sequence[int], part: ItemPartition | None = None
) -> Ranking:
    """Inverse of :func:`decompose`; ``part`` defaults to the contiguous split."""
    p, q = len(pa), len(pb)
    if len(t) != p + q:
        raise ValueError(f"interleaving of size {len(t)} does not match factor sizes {p}+{q}")
    if part is None:
        part = ItemPartition.contiguous(p, q)
    elif (part.p, part.q) != (p, q):
        raise ValueError("factor sizes do not match the partition")
    out = [0] * (p + q)
    for i, a in enumerate(part.a_items):
        out[a] = t[pa[i]]
    for i, b in enumerate(part.b_items):
        out[b] = t[p + pb[i]]
    return tuple(out)


def decompose_batch(perms: np.ndarray, part: ItemPartition) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized decompose returning (interleaving index, A index, B index) per row."""
    perms = np.asarray(perms, dtype=np.int64)
    a_ranks = np.sort(perms[:, list(part.a_items)], axis=1)
    tau = subset_index_batch(a_ranks, part.n)
    a_idx = index_batch(relative_ranks_batch(perms, part.a_items))
    b_idx = index_batch(relative_ranks_batch(perms, part.b_items))
    return tau, a_idx, b_idx


def recompose_batch(
    taus: np.ndarray, pas: np.ndarray, pbs: np.ndarray, part: ItemPartition
) -> np.ndarray:
    """Row-wise recompose of arrays of interleavings and factor rankings."""
    taus = np.asarray(taus, dtype=np.int64)
    out = np.empty_like(taus)
    p = part.p
    rows = np.arange(taus.shape[0])[:, None]
    out[:, list(part.a_items)] = taus[rows, np.asarray(pas, dtype=np.int64)]
    out[:, list(part.b_items)] = taus[rows, p + np.asarray(pbs, dtype=np.int64)]
    return out
