"""Random riffle independent models with known structure, for experiments and tests."""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from . import dense, perm, riffle
from .dense import DenseDistribution, SampleSet
from .riffle import HierarchicalModel, Node
from .tree import TreeNode, chain, leaf, split


def cyclic_factor(k: int, rng: np.random.Generator, noise: float = 0.2, concentration: float = 1.0) -> DenseDistribution:
    """Uniform over the k rotations of a random relabeling, mixed with Dirichlet noise.

    Rotations make every triplet of items strongly dependent, which plain
    Dirichlet draws do not.
    """
    if k == 1:
        return dense.uniform(1)
    base = np.zeros(math.factorial(k))
    relabel = rng.permutation(k)
    for c in range(k):
        base[perm.rank_index(tuple(int((relabel[i] + c) % k) for i in range(k)))] += 1.0 / k
    mixed = (1 - noise) * base + noise * rng.dirichlet(np.full(base.size, concentration))
    return dense.normalize(k, mixed)


def random_alpha(rng: np.random.Generator, low: float = 0.1, high: float = 0.5) -> float:
    """Bias drawn from [low, high), reflected to 1 - alpha half the time."""
    a = float(rng.uniform(low, high))
    return 1.0 - a if rng.random() < 0.5 else a


def min_internal_mi(h: DenseDistribution, a_items: Sequence[int]) -> float:
    """Smallest triplet mutual information among triplets inside A or inside B."""
    from .structure import estimate_triplet_mi

    T = estimate_triplet_mi(h)
    b_items = [v for v in range(h.n) if v not in set(a_items)]
    vals = [T.values[i, j, k] for blk in (a_items, b_items) for i, j, k in itertools.permutations(blk, 3)]
    return float(min(vals)) if vals else math.inf


def strongly_connected_model(
    rng: np.random.Generator,
    n: int = 8,
    a_size: int = 3,
    noise: float = 0.2,
    epsilon: float = 0.05,
    max_tries: int = 100,
) -> tuple[HierarchicalModel, tuple[int, ...]]:
    """Single split with a biased interleaving and strongly connected factors.

    Draws are rejected until every internal triplet has mutual information of
    at least ``epsilon`` (checked on exact probabilities). Returns the model
    and the A set.
    """
    for _ in range(max_tries):
        a_items = tuple(sorted(int(v) for v in rng.choice(n, a_size, replace=False)))
        part = perm.ItemPartition(a_items, n)
        f = cyclic_factor(a_size, rng, noise)
        g = cyclic_factor(n - a_size, rng, noise)
        m = riffle.biased_riffle(a_size, n - a_size, random_alpha(rng))
        model = riffle.join(m, f, g, part)
        if epsilon <= 0 or min_internal_mi(riffle.to_dense(model), a_items) >= epsilon:
            return model, a_items
    raise RuntimeError(f"no draw reached epsilon={epsilon} in {max_tries} tries")


def thin_chain_structure(n: int, k: int, rng: np.random.Generator, leaf_cap: int | None = None) -> TreeNode:
    """Random k-thin chain: peel k random items per level until the rest fits in a leaf."""
    order = [int(v) for v in rng.permutation(n)]
    groups = [order[i:i + k] for i in range(0, n, k)]
    return chain(groups, leaf_cap=k if leaf_cap is None else leaf_cap)


def balanced_structure(n: int, rng: np.random.Generator, leaf_cap: int = 2) -> TreeNode:
    """Roughly balanced random tree: halves of a random item order, sizes jittered by one."""

    def grow(items: list[int]) -> TreeNode:
        if len(items) <= leaf_cap:
            return leaf(items)
        half = len(items) // 2
        if len(items) >= 6:
            half += int(rng.integers(-1, 2))
        return split(grow(items[:half]), grow(items[half:]))

    return grow([int(v) for v in rng.permutation(n)])


def random_model(structure: TreeNode, rng: np.random.Generator, concentration: float = 1.0,
                 interleavings: str = "table") -> HierarchicalModel:
    """Model of the given shape with Dirichlet leaves.

    ``interleavings`` is "table" (Dirichlet tables) or "biased" (random alpha).
    """
    if interleavings == "table":
        return riffle.model_from_structure(structure, rng, concentration)
    if interleavings != "biased":
        raise ValueError("interleavings must be 'table' or 'biased'")

    def build(t: TreeNode) -> Node:
        if t.is_leaf:
            return riffle.leaf_node(t.items, dense.random_distribution(len(t.items), rng, concentration))
        left, right = build(t.children[0]), build(t.children[1])
        m = riffle.biased_riffle(len(left.items), len(right.items), random_alpha(rng))
        return riffle.internal_node(left, right, m)

    return HierarchicalModel(build(structure))


def draw_samples(model: HierarchicalModel, m: int, rng: np.random.Generator) -> SampleSet:
    if m < 0:
        raise ValueError("sample count must be nonnegative")
    return SampleSet.from_array(riffle.sample_batch(model, rng, m).reshape(m, model.n))


def synth(kind: str, n: int, m: int, seed: int, k: int = 1, leaf_cap: int = 2,
          concentration: float = 1.0, interleavings: str = "table") -> tuple[SampleSet, HierarchicalModel]:
    """Ground-truth model plus ``m`` samples; the same arguments always give the same output.

    ``kind`` is "thin" (k-thin chain), "balanced" or "split" (one strongly
    connected split with |A| = k).
    """
    rng = np.random.default_rng(seed)
    if kind == "thin":
        model = random_model(thin_chain_structure(n, k, rng, max(k, leaf_cap)), rng, concentration, interleavings)
    elif kind == "balanced":
        model = random_model(balanced_structure(n, rng, leaf_cap), rng, concentration, interleavings)
    elif kind == "split":
        model, _ = strongly_connected_model(rng, n, k)
    else:
        raise ValueError(f"unknown structure kind {kind!r}; choose thin, balanced or split")
    return draw_samples(model, m, rng), model


__all__ = [
    "balanced_structure",
    "cyclic_factor",
    "draw_samples",
    "min_internal_mi",
    "random_alpha",
    "random_model",
    "strongly_connected_model",
    "synth",
    "thin_chain_structure",
]
