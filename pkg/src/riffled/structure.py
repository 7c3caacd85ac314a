"""Learning riffle independent splits and hierarchies from ranking data.

Triplet scores ``I[i, j, k]`` are plug-in mutual informations (nats) between
the absolute rank of item ``i`` and the event "j is ranked ahead of k".
Across a riffle independent split they vanish, so good splits minimize the
sum of scores over triplets that cross the split.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import dense, riffle
from .dense import DenseDistribution, SampleSet
from .kernels import triplet_counts
from .tree import TreeNode

DEFAULT_BUDGET = 2_000_000


@dataclass(frozen=True)
class TripletMITensor:
    """``values[i, j, k]`` for distinct items; entries with repeated indices are 0."""

    n: int
    values: np.ndarray
    m: float
    smoothing: float


def _xlogx(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _default_smoothing(data: dense.Data, smoothing: float | None) -> float:
    if smoothing is not None:
        if smoothing < 0:
            raise ValueError("smoothing must be nonnegative")
        return float(smoothing)
    if isinstance(data, SampleSet):
        return 1.0 / max(data.total, 1)
    return 0.0


def estimate_triplet_mi(data: dense.Data, smoothing: float | None = None) -> TripletMITensor:
    """Triplet mutual information from samples (or exactly, from a dense table).

    ``smoothing`` is a pseudocount added to each of the 2n cells of every
    (rank of i, [j before k]) table; it defaults to 1/m for samples and 0 for
    dense tables.
    """
    rankings, weights = dense.weighted_rankings(data)
    n = rankings.shape[1]
    total = float(weights.sum())
    if total <= 0:
        raise ValueError("need at least one sample")
    s = _default_smoothing(data, smoothing)
    counts = triplet_counts(rankings, weights)  # [i, r, j, k]
    marg = np.zeros((n, n))
    for i in range(n):
        marg[i] = np.bincount(rankings[:, i], weights=weights, minlength=n)
    ahead = np.transpose(counts, (0, 2, 3, 1))  # [i, j, k, r]
    behind = marg[:, None, None, :] - ahead
    norm = total + 2 * n * s
    p1 = (ahead + s) / norm
    p0 = (np.clip(behind, 0.0, None) + s) / norm
    h_joint = -(_xlogx(p1) + _xlogx(p0)).sum(axis=-1)
    h_rank = -_xlogx(p1 + p0).sum(axis=-1)
    h_event = -(_xlogx(p1.sum(axis=-1)) + _xlogx(p0.sum(axis=-1)))
    mi = np.clip(h_rank + h_event - h_joint, 0.0, None)
    idx = np.arange(n)
    mi[idx, idx, :] = 0.0
    mi[idx, :, idx] = 0.0
    mi[:, idx, idx] = 0.0
    return TripletMITensor(n, mi, total, s)


def _masks(n: int, subsets: Sequence[Sequence[int]]) -> np.ndarray:
    out = np.zeros((len(subsets), n))
    for row, sub in enumerate(subsets):
        out[row, list(sub)] = 1.0
    return out


def _block_sums(values: np.ndarray, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """sum_{i,j,k} values[i,j,k] first[s,i] second[s,j] second[s,k] for every row s."""
    n = values.shape[0]
    pair = (second[:, :, None] * second[:, None, :]).reshape(second.shape[0], n * n)
    return np.einsum("si,is->s", first, values.reshape(n, n * n) @ pair.T)


def cross_and_internal(T: TripletMITensor, subsets: Sequence[Sequence[int]]) -> dict[str, np.ndarray]:
    """Cross and internal sums for many candidate sets A at once."""
    a = _masks(T.n, subsets)
    b = 1.0 - a
    return {
        "cross_ab": _block_sums(T.values, a, b),
        "cross_ba": _block_sums(T.values, b, a),
        "internal_a": _block_sums(T.values, a, a),
        "internal_b": _block_sums(T.values, b, b),
    }


def _check_subset(n: int, A: Iterable[int]) -> tuple[int, ...]:
    A = tuple(sorted(set(int(v) for v in A)))
    if not 1 <= len(A) <= n - 1 or any(not 0 <= v < n for v in A):
        raise ValueError(f"A must be a proper nonempty subset of 0..{n - 1}")
    return A


def cross_triplet_count(n: int, k: int) -> int:
    """Number of crossing triplets (i; j, k) with distinct j, k."""
    return k * (n - k) * (n - k - 1) + (n - k) * k * (k - 1)


def _cross_values(parts: dict[str, np.ndarray]) -> np.ndarray:
    return parts["cross_ab"] + parts["cross_ba"]


def _ratio(num: np.ndarray, internal: np.ndarray) -> np.ndarray:
    den = num + internal
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def _balanced_values(parts: dict[str, np.ndarray]) -> np.ndarray:
    return _ratio(parts["cross_ab"], parts["internal_a"]) + _ratio(parts["cross_ba"], parts["internal_b"])


def objective_cross(T: TripletMITensor, A: Iterable[int]) -> float:
    A = _check_subset(T.n, A)
    return float(_cross_values(cross_and_internal(T, [A]))[0])


def objective_balanced(T: TripletMITensor, A: Iterable[int]) -> float:
    """Normalized-cut style score: each side's crossing sum over (crossing + internal)."""
    A = _check_subset(T.n, A)
    return float(_balanced_values(cross_and_internal(T, [A]))[0])


def _pair_mi(x: np.ndarray, y: np.ndarray, w: np.ndarray, s: float) -> float:
    total = w.sum() + 4 * s
    table = np.array([[w[~x & ~y].sum(), w[~x & y].sum()], [w[x & ~y].sum(), w[x & y].sum()]]) + s
    table /= total
    mi = _xlogx(table).sum() - _xlogx(table.sum(axis=1)).sum() - _xlogx(table.sum(axis=0)).sum()
    return max(0.0, float(mi))


def quadruplet_mi(data: dense.Data, i: int, j: int, k: int, l: int, smoothing: float | None = None) -> float:
    """MI between the events "i ahead of j" and "k ahead of l"."""
    rankings, weights = dense.weighted_rankings(data)
    s = _default_smoothing(data, smoothing)
    return _pair_mi(rankings[:, i] < rankings[:, j], rankings[:, k] < rankings[:, l], weights, s)


def objective_quad(data: dense.Data, A: Iterable[int], smoothing: float | None = None) -> float:
    """Sum of pairwise-event MI over item pairs inside A against pairs inside B."""
    rankings, weights = dense.weighted_rankings(data)
    n = rankings.shape[1]
    A = _check_subset(n, A)
    B = tuple(v for v in range(n) if v not in A)
    if len(A) < 2 or len(B) < 2:
        warnings.warn("quadruplet objective is empty when a side has fewer than two items; returning 0", stacklevel=2)
        return 0.0
    s = _default_smoothing(data, smoothing)
    events_a = [rankings[:, i] < rankings[:, j] for i, j in itertools.combinations(A, 2)]
    events_b = [rankings[:, k] < rankings[:, l] for k, l in itertools.combinations(B, 2)]
    return float(sum(_pair_mi(x, y, weights, s) for x in events_a for y in events_b))


@dataclass(frozen=True)
class PartitionResult:
    a_items: tuple[int, ...]
    b_items: tuple[int, ...]
    value: float
    objective: str


def _score(T: TripletMITensor, subsets: list[tuple[int, ...]], objective: str) -> tuple[np.ndarray, np.ndarray]:
    parts = cross_and_internal(T, subsets)
    cross = _cross_values(parts)
    if objective == "cross":
        return cross, cross
    if objective == "balanced":
        return _balanced_values(parts), cross
    raise ValueError(f"unknown objective {objective!r}")


def _pick(subsets: list[tuple[int, ...]], values: np.ndarray, cross: np.ndarray) -> int:
    """Index of the best candidate: value, then crossing sum, then the subset itself."""
    return min(range(len(subsets)), key=lambda r: (values[r], cross[r], subsets[r]))


def _orient(n: int, A: tuple[int, ...], k: int | None) -> tuple[tuple[int, ...], tuple[int, ...]]:
    B = tuple(v for v in range(n) if v not in A)
    if k is not None:
        if len(A) == k and len(B) == k:
            return min(A, B), max(A, B)
        return (A, B) if len(A) == k else (B, A)
    if len(B) < len(A) or (len(B) == len(A) and B < A):
        return B, A
    return A, B


def exhaustive_partition(T: TripletMITensor, k: int | None, objective: str = "cross",
                         budget: int = DEFAULT_BUDGET) -> PartitionResult:
    """Global minimizer over all k-subsets (all sizes up to n/2 when k is None)."""
    n = T.n
    if n < 2:
        raise ValueError("need at least two items to split")
    sizes = [k] if k is not None else list(range(1, n // 2 + 1))
    if k is not None and not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in 1..{n - 1}")
    count = sum(math.comb(n, s) for s in sizes)
    if count > budget:
        raise ValueError(f"exhaustive search over {count} subsets exceeds the budget of {budget}")
    subsets = [c for s in sizes for c in itertools.combinations(range(n), s)]
    best_value = best_cross = None
    best_subset = None
    chunk = 20000
    for start in range(0, len(subsets), chunk):
        block = subsets[start:start + chunk]
        values, cross = _score(T, block, objective)
        r = _pick(block, values, cross)
        key = (values[r], cross[r], block[r])
        if best_subset is None or key < (best_value, best_cross, best_subset):
            best_value, best_cross, best_subset = values[r], cross[r], block[r]
    a, b = _orient(n, best_subset, k)
    return PartitionResult(a, b, float(best_value), objective)


def anchors_partition(data_or_T: dense.Data | TripletMITensor, k: int | None = None,
                      objective: str | None = None, smoothing: float | None = None) -> PartitionResult:
    """Anchor-based split search.

    With the first item as one anchor and each other item as the second, the
    items least informative about the anchors' relative order form a
    candidate side (of size k and n-k when k is known, every size otherwise).
    Singletons are added as candidates when k is unknown or equals 1 or n-1,
    since an anchor can itself be a singleton side. The best candidate under
    the objective (crossing sum when k is known, balanced otherwise) wins.
    """
    T = data_or_T if isinstance(data_or_T, TripletMITensor) else estimate_triplet_mi(data_or_T, smoothing)
    n = T.n
    if n < 3:
        raise ValueError("the anchor search needs at least three items")
    if k is not None and not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in 1..{n - 1}")
    if objective is None:
        objective = "cross" if k is not None else "balanced"
    sizes = sorted({k, n - k} & set(range(1, n - 1))) if k is not None else list(range(1, n - 1))
    a1 = 0
    candidates: set[tuple[int, ...]] = set()
    for a2 in range(1, n):
        others = [x for x in range(n) if x not in (a1, a2)]
        order = sorted(others, key=lambda x: (T.values[x, a1, a2], x))
        for s in sizes:
            candidates.add(tuple(sorted(order[:s])))
    if k is None or k in (1, n - 1):
        candidates.update((x,) for x in range(n))
    oriented = sorted({_orient(n, c, k)[0] for c in candidates})
    values, cross = _score(T, oriented, objective)
    r = _pick(oriented, values, cross)
    a, b = _orient(n, oriented[r], k)
    return PartitionResult(a, b, float(values[r]), objective)


# ----------------------------------------------------------------------------
# hierarchies


@dataclass(frozen=True)
class LearnedHierarchy:
    """A learned tree plus the objective value found at each split."""

    tree: TreeNode
    node_values: Mapping[tuple[int, ...], float] = field(default_factory=dict, compare=False)
    method: str = "exhaustive"
    mode: str = "general"
    k: int | None = None
    objective: str = "balanced"
    leaf_cap: int = 2

    @property
    def n(self) -> int:
        return len(self.tree.items)

    def canonical(self):
        return self.tree.canonical()

    def describe(self) -> str:
        return self.tree.describe()

    def fit(self, data: dense.Data, smoothing: float = 0.0) -> riffle.HierarchicalModel:
        return riffle.fit_parameters(self.tree, data, smoothing)


def _restrict(data: dense.Data, items: Sequence[int]) -> dense.Data:
    if isinstance(data, SampleSet):
        return data.restrict(items)
    return dense.relative_marginal(data, items)


def learn_hierarchy(
    data: dense.Data,
    mode: str = "general",
    k: int | None = None,
    leaf_cap: int = 2,
    objective: str | None = None,
    method: str = "exhaustive",
    smoothing: float | None = None,
    budget: int = DEFAULT_BUDGET,
) -> LearnedHierarchy:
    """Top-down recursive splitting.

    ``mode="thin"`` peels a k-set (kept as a leaf) off at every split and
    recurses on the rest; ``mode="general"`` searches all split sizes and
    recurses on both sides. Each node's triplet scores are re-estimated from
    the relative rankings of its own items. Sets of at most ``leaf_cap`` items
    (at most ``max(k, leaf_cap)`` in thin mode) become leaves.
    """
    if mode not in ("thin", "general"):
        raise ValueError("mode must be 'thin' or 'general'")
    if method not in ("exhaustive", "anchors"):
        raise ValueError("method must be 'exhaustive' or 'anchors'")
    if mode == "thin" and (k is None or k < 1):
        raise ValueError("thin mode needs a positive k")
    if leaf_cap < 1:
        raise ValueError("leaf_cap must be at least 1")
    if objective is None:
        objective = "cross" if mode == "thin" else "balanced"
    if isinstance(data, SampleSet):
        data = data.canonical()
    n = data.n
    node_values: dict[tuple[int, ...], float] = {}

    def split_set(items: tuple[int, ...], local: dense.Data, size: int | None) -> PartitionResult:
        if len(items) == 2:
            return PartitionResult((0,), (1,), 0.0, objective)
        T = estimate_triplet_mi(local, smoothing)
        if method == "anchors":
            return anchors_partition(T, size, objective)
        return exhaustive_partition(T, size, objective, budget)

    def grow(items: tuple[int, ...]) -> TreeNode:
        limit = max(k, leaf_cap) if mode == "thin" else leaf_cap
        if len(items) <= limit:
            return TreeNode(items)
        local = _restrict(data, items)
        size = k if mode == "thin" else None
        res = split_set(items, local, size)
        a = tuple(items[v] for v in res.a_items)
        b = tuple(items[v] for v in res.b_items)
        node_values[items] = res.value
        if mode == "thin":
            return TreeNode(items, (TreeNode(a), grow(b)))
        return TreeNode(items, (grow(a), grow(b)))

    tree = grow(tuple(range(n)))
    return LearnedHierarchy(tree, node_values, method, mode, k, objective, leaf_cap)


MEASURES = ("exact", "topmost", "leaf_sets")


def _as_tree(x: LearnedHierarchy | TreeNode) -> TreeNode:
    return x.tree if isinstance(x, LearnedHierarchy) else x


def structure_agreement(a: LearnedHierarchy | TreeNode, b: LearnedHierarchy | TreeNode, measure: str = "exact") -> bool:
    ta, tb = _as_tree(a), _as_tree(b)
    if ta.items != tb.items:
        raise ValueError("trees cover different item sets")
    if measure == "exact":
        return ta.canonical() == tb.canonical()
    if measure == "topmost":
        return ta.top_split() == tb.top_split()
    if measure == "leaf_sets":
        return ta.leaf_sets() == tb.leaf_sets()
    raise ValueError(f"unknown agreement measure {measure!r}; choose from {MEASURES}")


@dataclass(frozen=True)
class BootstrapReport:
    """``fractions[size][name]`` is the share of resamples satisfying predicate ``name``."""

    B: int
    sizes: tuple[int, ...]
    fractions: Mapping[int, Mapping[str, float]]
    reference: TreeNode | None = None

    def rows(self) -> list[tuple[int, int, str, float]]:
        return [(size, self.B, name, frac) for size in self.sizes for name, frac in self.fractions[size].items()]


Predicate = Callable[[LearnedHierarchy], bool]


def bootstrap_stability(
    samples: SampleSet,
    B: int,
    sizes: Sequence[int],
    rng: np.random.Generator,
    predicates: Mapping[str, Predicate] | None = None,
    reference: LearnedHierarchy | TreeNode | None = None,
    replace: bool = True,
    **learn_options,
) -> BootstrapReport:
    """Resample, relearn, and report how often each predicate holds.

    Without explicit predicates the three agreement measures against
    ``reference`` (by default the tree learned from all samples) are used.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    if samples.total == 0:
        raise ValueError("cannot resample an empty sample set")
    if predicates is None:
        ref = reference if reference is not None else learn_hierarchy(samples, **learn_options)
        ref_tree = _as_tree(ref)
        predicates = {m: (lambda h, m=m: structure_agreement(h, ref_tree, m)) for m in MEASURES}
    else:
        ref_tree = _as_tree(reference) if reference is not None else None
    fractions: dict[int, dict[str, float]] = {}
    for size in sizes:
        hits = {name: 0 for name in predicates}
        for _ in range(B):
            boot = samples.resample(rng, size, replace=replace)
            learned = learn_hierarchy(boot, **learn_options)
            for name, pred in predicates.items():
                hits[name] += bool(pred(learned))
        fractions[size] = {name: hits[name] / B for name in predicates}
    return BootstrapReport(B, tuple(sizes), fractions, ref_tree)
