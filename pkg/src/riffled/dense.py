"""Distributions over S_n stored as full probability tables, plus ranking samples.

These are exact but exponential in n, and serve as the reference every
factored or spectral computation is checked against.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from . import perm
from .config import check_dense_n

NORM_TOL = 1e-12


class DenseDistribution:
    """Table of n! values indexed by :func:`riffled.perm.rank_index`.

    Normalized tables are checked to sum to one; pass ``normalized=False`` for
    likelihood functions or other nonnegative weightings.
    """

    __slots__ = ("n", "probs", "normalized")

    def __init__(self, n: int, probs: Sequence[float] | np.ndarray, normalized: bool = True):
        check_dense_n(n, "dense distribution")
        arr = np.array(probs, dtype=np.float64)
        if arr.shape != (math.factorial(n),):
            raise ValueError(f"expected {math.factorial(n)} values for S_{n}, got shape {arr.shape}")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("probabilities must be finite and nonnegative")
        if normalized and abs(arr.sum() - 1.0) > NORM_TOL * max(1.0, arr.size ** 0.5):
            raise ValueError(f"probabilities sum to {arr.sum()!r}, not 1")
        arr.setflags(write=False)
        self.n = n
        self.probs = arr
        self.normalized = normalized

    def __repr__(self) -> str:
        return f"DenseDistribution(n={self.n}, support={int(np.count_nonzero(self.probs))})"

    def prob(self, r: Sequence[int]) -> float:
        return float(self.probs[perm.rank_index(r)])

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs)

    def mode(self) -> perm.Ranking:
        """Highest-probability ranking; ties go to the lexicographically smallest."""
        return perm.from_index(self.n, int(np.argmax(self.probs)))


def normalize(n: int, values: np.ndarray) -> DenseDistribution:
    total = float(np.sum(values))
    if total <= 0:
        raise ValueError("cannot normalize: total mass is zero")
    return DenseDistribution(n, np.asarray(values, dtype=np.float64) / total)


def uniform(n: int) -> DenseDistribution:
    size = math.factorial(n)
    return DenseDistribution(n, np.full(size, 1.0 / size))


def delta(n: int, r: Sequence[int]) -> DenseDistribution:
    probs = np.zeros(math.factorial(n))
    probs[perm.rank_index(perm.validate(r, n))] = 1.0
    return DenseDistribution(n, probs)


def random_distribution(n: int, rng: np.random.Generator, concentration: float = 1.0) -> DenseDistribution:
    """Dirichlet draw over S_n, mostly for tests."""
    return normalize(n, rng.dirichlet(np.full(math.factorial(n), concentration)))


@dataclass(frozen=True)
class SampleSet:
    """Distinct rankings with positive integer counts."""

    n: int
    rankings: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        rankings = np.asarray(self.rankings, dtype=np.int64).reshape(-1, self.n)
        counts = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if rankings.shape[0] != counts.shape[0]:
            raise ValueError("rankings and counts differ in length")
        if np.any(counts < 1):
            raise ValueError("sample counts must be positive")
        if rankings.size and not np.all(np.sort(rankings, axis=1) == np.arange(self.n)):
            raise ValueError("every record must be a permutation of the items")
        rankings.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "rankings", rankings)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_rankings(cls, n: int, rankings: Iterable[Sequence[int]], counts: Iterable[int] | None = None) -> "SampleSet":
        """Aggregate repeated rankings; row order follows first appearance."""
        rows = [perm.validate(r, n) for r in rankings]
        weights = [1] * len(rows) if counts is None else [int(c) for c in counts]
        if len(weights) != len(rows):
            raise ValueError("rankings and counts differ in length")
        totals: dict[tuple[int, ...], int] = {}
        for r, c in zip(rows, weights):
            if c < 1:
                raise ValueError("sample counts must be positive")
            totals[r] = totals.get(r, 0) + c
        keys = list(totals)
        return cls(n, np.array(keys, dtype=np.int64).reshape(-1, n), np.array([totals[k] for k in keys], dtype=np.int64))

    @classmethod
    def from_array(cls, rankings: np.ndarray) -> "SampleSet":
        rankings = np.asarray(rankings, dtype=np.int64)
        if rankings.shape[0] == 0:
            return cls(rankings.shape[1], rankings, np.zeros(0, dtype=np.int64))
        uniq, inverse_idx, counts = np.unique(rankings, axis=0, return_inverse=True, return_counts=True)
        # restore first-appearance order (np.unique sorts rows)
        first = np.full(uniq.shape[0], rankings.shape[0])
        np.minimum.at(first, inverse_idx.reshape(-1), np.arange(rankings.shape[0]))
        order = np.argsort(first)
        return cls(rankings.shape[1], uniq[order], counts[order])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return self.total

    def expanded(self) -> np.ndarray:
        """One row per individual sample."""
        return np.repeat(self.rankings, self.counts, axis=0)

    def canonical(self) -> "SampleSet":
        """Same multiset with rows sorted lexicographically."""
        if self.rankings.shape[0] == 0:
            return self
        order = np.lexsort(self.rankings.T[::-1])
        return SampleSet(self.n, self.rankings[order], self.counts[order])

    def restrict(self, items: Sequence[int]) -> "SampleSet":
        """Relative rankings of ``items`` (listed in increasing item order)."""
        items = sorted(items)
        rel = perm.relative_ranks_batch(self.rankings, items)
        idx = perm.index_batch(rel)
        uniq, inv = np.unique(idx, return_inverse=True)
        counts = np.bincount(inv.reshape(-1), weights=self.counts, minlength=uniq.size).astype(np.int64)
        rows = rel[np.unique(inv.reshape(-1), return_index=True)[1]]
        return SampleSet(len(items), rows, counts)

    def resample(self, rng: np.random.Generator, size: int, replace: bool = True) -> "SampleSet":
        """Draw ``size`` individual samples (with replacement by default)."""
        flat = self.expanded()
        if not replace and size > flat.shape[0]:
            raise ValueError("cannot draw more samples than available without replacement")
        pick = rng.choice(flat.shape[0], size=size, replace=replace)
        return SampleSet.from_array(flat[pick])


Data = Union[SampleSet, DenseDistribution]


def weighted_rankings(data: Data) -> tuple[np.ndarray, np.ndarray]:
    """(rankings, weights) for either a sample set or the support of a table."""
    if isinstance(data, SampleSet):
        return np.asarray(data.rankings), data.counts.astype(np.float64)
    support = data.support()
    return perm.all_rankings(data.n)[support], data.probs[support]


def from_samples(samples: SampleSet, smoothing: float = 0.0) -> DenseDistribution:
    if samples.total == 0:
        raise ValueError("empty sample set")
    if smoothing < 0:
        raise ValueError("smoothing must be nonnegative")
    counts = np.bincount(perm.index_batch(samples.rankings), weights=samples.counts, minlength=math.factorial(samples.n))
    return normalize(samples.n, counts + smoothing)


def _same_n(p: DenseDistribution, q: DenseDistribution) -> None:
    if p.n != q.n:
        raise ValueError(f"distributions over S_{p.n} and S_{q.n} are not comparable")


def entropy(h: DenseDistribution) -> float:
    p = h.probs[h.probs > 0]
    return float(-(p * np.log(p)).sum())


def kl_divergence(p: DenseDistribution, q: DenseDistribution) -> float:
    """KL(p || q) in nats; +inf when p puts mass where q has none."""
    _same_n(p, q)
    mask = p.probs > 0
    if np.any(q.probs[mask] == 0):
        return math.inf
    return max(0.0, float((p.probs[mask] * np.log(p.probs[mask] / q.probs[mask])).sum()))


def tv_distance(p: DenseDistribution, q: DenseDistribution) -> float:
    _same_n(p, q)
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


@dataclass(frozen=True)
class MarginalTable:
    """k-th order marginals: ``values[a, b]`` is the mass of rankings placing
    item tuple ``tuples[b]`` at rank tuple ``tuples[a]``.

    For k = 1 this is the first-order matrix (row = rank, column = item).
    """

    n: int
    k: int
    tuples: tuple[tuple[int, ...], ...]
    values: np.ndarray

    def get(self, ranks: Sequence[int], items: Sequence[int]) -> float:
        index = {t: i for i, t in enumerate(self.tuples)}
        return float(self.values[index[tuple(ranks)], index[tuple(items)]])


def ordered_tuples(n: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.permutations(range(n), k))


def kth_order_marginals(h: DenseDistribution, k: int) -> MarginalTable:
    n = h.n
    if not 1 <= k <= n:
        raise ValueError(f"marginal order must lie in 1..{n}, got {k}")
    tuples = ordered_tuples(n, k)
    tup = np.array(tuples, dtype=np.int64).reshape(-1, k)
    powers = n ** np.arange(k - 1, -1, -1)
    lookup = np.full(n ** k, -1, dtype=np.int64)
    lookup[tup @ powers] = np.arange(len(tuples))
    support = h.support()
    perms = perm.all_rankings(n)[support]
    size = len(tuples)
    values = np.zeros(size * size)
    # process in chunks to bound memory
    chunk = max(1, 4_000_000 // max(size, 1))
    for start in range(0, support.size, chunk):
        block = perms[start:start + chunk]
        ranks = block[:, tup]  # (N, size, k)
        r_idx = lookup[ranks @ powers]
        flat = r_idx * size + np.arange(size)[None, :]
        w = np.broadcast_to(h.probs[support[start:start + chunk]][:, None], flat.shape)
        values += np.bincount(flat.ravel(), weights=w.ravel(), minlength=size * size)
    return MarginalTable(n, k, tuple(tuples), values.reshape(size, size))


def first_order_marginals(h: DenseDistribution) -> np.ndarray:
    """n x n matrix with entry [rank, item]."""
    return kth_order_marginals(h, 1).values


def sample_first_order_counts(samples: SampleSet) -> np.ndarray:
    """Counts of (rank, item) pairs straight from samples; works for any n."""
    n = samples.n
    out = np.zeros((n, n), dtype=np.int64)
    for item in range(n):
        out[:, item] = np.bincount(samples.rankings[:, item], weights=samples.counts, minlength=n).astype(np.int64)
    return out


def pairwise_marginal(h: DenseDistribution, i: int, j: int) -> float:
    """Probability that item i is ranked ahead of item j."""
    if i == j:
        raise ValueError("pairwise marginal needs two distinct items")
    perms = perm.all_rankings(h.n)
    return float(h.probs[perms[:, i] < perms[:, j]].sum())


def left_multiplication_indices(n: int, s: Sequence[int]) -> np.ndarray:
    """out[idx(r)] = idx(s o r) for every r in S_n."""
    perms = perm.all_rankings(n)
    return perm.index_batch(np.asarray(s, dtype=np.int64)[perms])


def convolve(m: DenseDistribution, h: DenseDistribution) -> DenseDistribution:
    """[m * h](s) = sum_t m(t) h(t^-1 s)."""
    _same_n(m, h)
    n = m.n
    perms = perm.all_rankings(n)
    out = np.zeros(perms.shape[0])
    for t in m.support():
        # s = t o r, so out[idx(t o r)] += m(t) h(r)
        out[left_multiplication_indices(n, perms[t])] += m.probs[t] * h.probs
    return DenseDistribution(n, out, normalized=m.normalized and h.normalized)


def pointwise_condition(prior: DenseDistribution, likelihood: DenseDistribution | np.ndarray) -> DenseDistribution:
    """Normalized product prior * likelihood (Bayes rule)."""
    values = likelihood.probs if isinstance(likelihood, DenseDistribution) else np.asarray(likelihood, dtype=np.float64)
    if values.shape != prior.probs.shape:
        raise ValueError("likelihood does not match the prior's group")
    post = prior.probs * values
    if post.sum() <= 0:
        raise ValueError("zero evidence: the likelihood vanishes on the prior's support")
    return normalize(prior.n, post)


def pairwise_likelihood(n: int, i: int, j: int, beta: float = 1.0) -> DenseDistribution:
    """beta where item i is ranked ahead of item j, 1 - beta elsewhere (unnormalized)."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    perms = perm.all_rankings(n)
    return DenseDistribution(n, np.where(perms[:, i] < perms[:, j], beta, 1.0 - beta), normalized=False)


def relative_marginal(h: DenseDistribution, items: Sequence[int]) -> DenseDistribution:
    """Distribution of the relative ranking of ``items`` (taken in increasing order)."""
    items = sorted(items)
    perms = perm.all_rankings(h.n)
    idx = perm.index_batch(perm.relative_ranks_batch(perms, items))
    return DenseDistribution(len(items), np.bincount(idx, weights=h.probs, minlength=math.factorial(len(items))), normalized=h.normalized)


def from_marginal_table(table: MarginalTable) -> DenseDistribution:
    """Rebuild h from its (n-1)-th or n-th order marginals (which determine it)."""
    n, k = table.n, table.k
    if k < n - 1:
        raise ValueError("only marginals of order n-1 or n determine the distribution")
    index = {t: i for i, t in enumerate(table.tuples)}
    items = tuple(range(k))
    col = index[items]
    perms = perm.all_rankings(n)
    probs = np.array([table.values[index[tuple(int(v) for v in row[:k])], col] for row in perms])
    return DenseDistribution(n, probs, normalized=False)
