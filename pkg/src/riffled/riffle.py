"""Interleaving distributions and hierarchical riffle independent models.

Biased riffle orientation: cards are dropped from the bottom of two piles,
pile A holding ``p`` cards and pile B holding ``q``. With ``a`` and ``b`` cards
left, A drops next with probability ``alpha*a / (alpha*a + (1-alpha)*b)`` and
its card takes the last rank still free. ``alpha = 0`` therefore yields the
interleaving that puts all of A ahead of B, ``alpha = 1`` puts B first and
``alpha = 0.5`` gives the uniform interleaving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import dense, perm
from .dense import DenseDistribution, SampleSet
from .tree import TreeNode

NORM_TOL = 1e-12
GOLDEN_TOL = 1e-9


class NonDecomposableObservation(ValueError):
    """A pairwise observation that straddles a split has no exact factored update."""


@dataclass(frozen=True)
class InterleavingDistribution:
    """Probabilities over the (p, q) interleavings, in enumeration order.

    ``kind`` records how the table was produced: "table", "biased"
    (``params = {"alpha": a}``) or "mixture" (``{"weights": [...], "alphas": [...]}``).
    """

    p: int
    q: int
    probs: np.ndarray
    kind: str = "table"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        arr = np.array(self.probs, dtype=np.float64)
        size = math.comb(self.p + self.q, self.p)
        if arr.shape != (size,):
            raise ValueError(f"expected {size} interleaving probabilities, got shape {arr.shape}")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("interleaving probabilities must be finite and nonnegative")
        if abs(arr.sum() - 1.0) > NORM_TOL * max(1.0, size ** 0.5):
            raise ValueError(f"interleaving probabilities sum to {arr.sum()!r}")
        if self.kind not in ("table", "biased", "mixture"):
            raise ValueError(f"unknown interleaving kind {self.kind!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def n(self) -> int:
        return self.p + self.q

    def prob(self, t: Sequence[int]) -> float:
        return float(self.probs[perm.interleaving_index(t, self.p)])

    def to_dense(self) -> DenseDistribution:
        """Embed as a distribution on S_{p+q} supported on the interleavings."""
        table = np.zeros(math.factorial(self.n))
        table[perm.index_batch(perm.interleavings_array(self.p, self.q))] = self.probs
        return DenseDistribution(self.n, table)

    def entropy(self) -> float:
        nz = self.probs[self.probs > 0]
        return float(-(nz * np.log(nz)).sum())


def interleaving_from_dense(h: DenseDistribution, p: int) -> InterleavingDistribution:
    q = h.n - p
    probs = h.probs[perm.index_batch(perm.interleavings_array(p, q))]
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("distribution is not supported on the interleavings")
    return InterleavingDistribution(p, q, probs / probs.sum())


def uniform_interleaving(p: int, q: int) -> InterleavingDistribution:
    size = math.comb(p + q, p)
    return InterleavingDistribution(p, q, np.full(size, 1.0 / size))


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def _drop_left_weight(alpha: float, a: int, b: int) -> float:
    """Probability the next (bottom) card comes from pile A with a and b cards left."""
    if a == 0:
        return 0.0
    if b == 0:
        return 1.0
    return alpha * a / (alpha * a + (1.0 - alpha) * b)


@dataclass(frozen=True)
class _DropSteps:
    """For every interleaving, its sequence of unforced drops (a, b, from_A)."""

    a: np.ndarray
    b: np.ndarray
    from_a: np.ndarray
    owner: np.ndarray
    size: int


_STEP_CACHE: dict[tuple[int, int], _DropSteps] = {}


def _drop_steps(p: int, q: int) -> _DropSteps:
    key = (p, q)
    if key not in _STEP_CACHE:
        taus = perm.interleavings_array(p, q)
        count, n = taus.shape
        is_a = np.zeros((count, n), dtype=bool)
        if p:
            is_a[np.arange(count)[:, None], taus[:, :p]] = True
        a_left = np.full(count, p)
        b_left = np.full(count, q)
        rec_a, rec_b, rec_from, rec_owner = [], [], [], []
        for r in range(n - 1, -1, -1):
            drop_a = is_a[:, r]
            free = (a_left > 0) & (b_left > 0)
            idx = np.flatnonzero(free)
            rec_a.append(a_left[idx])
            rec_b.append(b_left[idx])
            rec_from.append(drop_a[idx])
            rec_owner.append(idx)
            a_left = a_left - drop_a
            b_left = b_left - ~drop_a
        cat = lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt)  # noqa: E731
        _STEP_CACHE[key] = _DropSteps(
            cat(rec_a, np.int64), cat(rec_b, np.int64), cat(rec_from, bool), cat(rec_owner, np.int64), count
        )
    return _STEP_CACHE[key]


def biased_log_probs(p: int, q: int, alpha: float) -> np.ndarray:
    """log m^alpha(tau) for every interleaving (-inf where the probability is 0)."""
    alpha = _check_alpha(alpha)
    steps = _drop_steps(p, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        left = alpha * steps.a
        right = (1.0 - alpha) * steps.b
        w = np.where(steps.from_a, left, right) / (left + right)
        logw = np.log(w)
    return np.bincount(steps.owner, weights=logw, minlength=steps.size) if logw.size else np.zeros(steps.size)


def biased_riffle(p: int, q: int, alpha: float) -> InterleavingDistribution:
    """Table of the biased riffle shuffle, built from the drop recurrence.

    Each interleaving's probability is the product of its drop weights; the
    recurrence conditions on which pile supplies the bottom card.
    """
    with np.errstate(over="ignore"):
        probs = np.exp(biased_log_probs(p, q, alpha))
    return InterleavingDistribution(p, q, probs / probs.sum(), kind="biased", params={"alpha": float(alpha)})


def mixture_riffle(p: int, q: int, weights: Sequence[float], alphas: Sequence[float]) -> InterleavingDistribution:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(alphas),) or np.any(weights < 0) or abs(weights.sum() - 1) > 1e-9:
        raise ValueError("mixture weights must be nonnegative, sum to 1 and match the alphas")
    probs = sum(w * biased_riffle(p, q, a).probs for w, a in zip(weights, alphas))
    return InterleavingDistribution(
        p, q, probs / probs.sum(), kind="mixture",
        params={"weights": [float(w) for w in weights], "alphas": [float(a) for a in alphas]},
    )


def interleaving_probability(t: Sequence[int], p: int, alpha: float) -> float:
    """Probability that :func:`draw_interleaving` returns ``t``, following the sampler step by step."""
    if not perm.is_interleaving(t, p):
        return 0.0
    alpha = _check_alpha(alpha)
    n = len(t)
    a_ranks = set(t[:p])
    a, b = p, n - p
    prob = 1.0
    for r in range(n - 1, -1, -1):
        w = _drop_left_weight(alpha, a, b)
        if r in a_ranks:
            prob *= w
            a -= 1
        else:
            prob *= 1.0 - w
            b -= 1
    return prob


def draw_interleaving(p: int, q: int, alpha: float, rng: np.random.Generator) -> perm.Ranking:
    """Simulate the drop-card process once."""
    alpha = _check_alpha(alpha)
    a, b = p, q
    a_ranks = []
    for r in range(p + q - 1, -1, -1):
        if rng.random() < _drop_left_weight(alpha, a, b):
            a_ranks.append(r)
            a -= 1
        else:
            b -= 1
    return perm.interleaving_from_subset(a_ranks, p + q)


# ----------------------------------------------------------------------------
# alpha fitting


def _drop_counts(m: InterleavingDistribution, weights: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Mass of A-drops and B-drops at each (a, b) state; compact sufficient statistic."""
    steps = _drop_steps(m.p, m.q)
    w = m.probs if weights is None else weights
    mass = w[steps.owner]
    key = steps.a * (m.q + 1) + steps.b
    size = (m.p + 1) * (m.q + 1)
    ca = np.bincount(key, weights=np.where(steps.from_a, mass, 0.0), minlength=size)
    cb = np.bincount(key, weights=np.where(steps.from_a, 0.0, mass), minlength=size)
    nz = np.flatnonzero((ca > 0) | (cb > 0))
    return ca[nz], cb[nz], nz // (m.q + 1), nz % (m.q + 1)


def _alpha_loglik(stats, alpha: float) -> float:
    ca, cb, a, b = stats
    with np.errstate(divide="ignore", invalid="ignore"):
        den = alpha * a + (1.0 - alpha) * b
        la = np.where(ca > 0, ca * np.log(alpha * a / den), 0.0)
        lb = np.where(cb > 0, cb * np.log((1.0 - alpha) * b / den), 0.0)
    total = float(la.sum() + lb.sum())
    return -math.inf if math.isnan(total) else total


def _golden_max(fn, lo: float = 0.0, hi: float = 1.0, tol: float = GOLDEN_TOL) -> float:
    """Maximize a unimodal function on [lo, hi]; endpoints are also compared."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, f2 = fn(x1), fn(x2)
    while hi - lo > tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = fn(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = fn(x1)
    best = (lo + hi) / 2.0
    candidates = [(fn(best), best), (fn(0.0), 0.0), (fn(1.0), 1.0)]
    top = max(c[0] for c in candidates)
    # prefer the interior point unless an endpoint is strictly better
    for value, x in candidates:
        if value == top:
            return x
    return best


def fit_alpha(m: InterleavingDistribution, weights: np.ndarray | None = None) -> float:
    """Bias maximizing sum_tau m(tau) log m^alpha(tau) (golden-section search)."""
    stats = _drop_counts(m, weights)
    if stats[0].size == 0:
        return 0.5
    return _golden_max(lambda x: _alpha_loglik(stats, x))


def alpha_loglik(m: InterleavingDistribution, alpha: float) -> float:
    return _alpha_loglik(_drop_counts(m), _check_alpha(alpha))


def fit_mixture_alphas(
    m: InterleavingDistribution,
    components: int = 2,
    restarts: int = 10,
    rng: np.random.Generator | None = None,
    tol: float = 1e-9,
    max_iter: int = 5000,
    merge_tol: float = 1e-3,
    single_tol: float = 1e-7,
    trace: list | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """EM fit of a mixture of biased riffles; returns (weights, alphas).

    Components whose alphas coincide within ``merge_tol`` (or carry no weight)
    are merged, and when one biased riffle reaches the mixture's
    log-likelihood to within ``single_tol`` it is returned alone.
    Results are sorted by decreasing alpha. ``trace``, when given, receives
    the log-likelihood sequence of the winning restart.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    support = m.probs > 0
    target = m.probs[support]
    # no mixture can beat sum m log m; if one riffle already reaches it, stop here
    single = fit_alpha(m)
    if alpha_loglik(m, single) >= float((target * np.log(target)).sum()) - single_tol:
        return np.ones(1), np.array([single])
    best = None
    for _ in range(max(1, restarts)):
        alphas = np.sort(rng.uniform(0.05, 0.95, size=components))[::-1].copy()
        weights = np.full(components, 1.0 / components)
        history = []
        prev = -math.inf
        for _ in range(max_iter):
            with np.errstate(divide="ignore", over="ignore"):
                comp = np.array([np.exp(biased_log_probs(m.p, m.q, a))[support] for a in alphas])
            joint = weights[:, None] * comp
            mix = joint.sum(axis=0)
            with np.errstate(divide="ignore"):
                ll = float((target * np.log(mix)).sum())
            history.append(ll)
            if ll - prev < tol and np.isfinite(ll):
                break
            prev = ll
            with np.errstate(invalid="ignore", divide="ignore"):
                resp = np.where(mix > 0, joint / mix, 1.0 / components)
            weights = (resp * target).sum(axis=1)
            weights /= weights.sum()
            for c in range(components):
                full = np.zeros_like(m.probs)
                full[support] = resp[c] * target
                stats = _drop_counts(m, full)
                if stats[0].size == 0:
                    continue
                cand = _golden_max(lambda x: _alpha_loglik(stats, x))
                # generalized EM: only move when the expected complete log-likelihood improves
                if _alpha_loglik(stats, cand) >= _alpha_loglik(stats, alphas[c]):
                    alphas[c] = cand
        if best is None or history[-1] > best[0]:
            best = (history[-1], weights.copy(), alphas.copy(), history)
    _, weights, alphas, history = best
    if trace is not None:
        trace.extend(history)
    order = np.argsort(-alphas, kind="stable")
    weights, alphas = weights[order], alphas[order]
    merged_w: list[float] = []
    merged_a: list[float] = []
    for w, a in zip(weights, alphas):
        if w <= 1e-12:
            continue
        if merged_a and abs(merged_a[-1] - a) <= merge_tol:
            total = merged_w[-1] + w
            merged_a[-1] = (merged_a[-1] * merged_w[-1] + a * w) / total
            merged_w[-1] = total
        else:
            merged_w.append(float(w))
            merged_a.append(float(a))
    w_arr = np.array(merged_w)
    if len(merged_a) > 1:
        # a single riffle that fits as well as the mixture is preferred
        if alpha_loglik(m, single) >= best[0] - single_tol:
            return np.ones(1), np.array([single])
    return w_arr / w_arr.sum(), np.array(merged_a)


# ----------------------------------------------------------------------------
# hierarchical models


@dataclass(frozen=True)
class Node:
    """Model node over ``items``; leaves carry ``factor``, internal nodes ``interleaving``."""

    items: tuple[int, ...]
    factor: DenseDistribution | None = None
    interleaving: InterleavingDistribution | None = None
    children: tuple["Node", ...] = ()

    def __post_init__(self) -> None:
        items = tuple(sorted(self.items))
        object.__setattr__(self, "items", items)
        if self.children:
            left, right = self.children
            if self.interleaving is None or self.factor is not None:
                raise ValueError("internal nodes carry an interleaving distribution only")
            if set(left.items) | set(right.items) != set(items) or set(left.items) & set(right.items):
                raise ValueError(f"children do not partition {items}")
            if (self.interleaving.p, self.interleaving.q) != (len(left.items), len(right.items)):
                raise ValueError("interleaving sizes do not match the children")
        else:
            if self.factor is None or self.interleaving is not None:
                raise ValueError("leaves carry a relative-ranking factor only")
            if self.factor.n != len(items) or not self.factor.normalized:
                raise ValueError("leaf factor must be a normalized distribution over the leaf's items")

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def partition(self) -> perm.ItemPartition:
        """The split at this node in local (0..|items|-1) coordinates."""
        pos = {v: i for i, v in enumerate(self.items)}
        return perm.ItemPartition(tuple(pos[v] for v in self.children[0].items), len(self.items))

    def structure(self) -> TreeNode:
        if self.is_leaf:
            return TreeNode(self.items)
        return TreeNode(self.items, (self.children[0].structure(), self.children[1].structure()))


def leaf_node(items: Sequence[int], factor: DenseDistribution | None = None) -> Node:
    items = tuple(sorted(items))
    if factor is None:
        factor = dense.uniform(len(items))
    return Node(items, factor=factor)


def internal_node(left: Node, right: Node, interleaving: InterleavingDistribution | None = None) -> Node:
    if interleaving is None:
        interleaving = uniform_interleaving(len(left.items), len(right.items))
    return Node(left.items + right.items, interleaving=interleaving, children=(left, right))


@dataclass(frozen=True)
class HierarchicalModel:
    root: Node

    def __post_init__(self) -> None:
        if self.root.items != tuple(range(len(self.root.items))):
            raise ValueError("the root must cover items 0..n-1")

    @property
    def n(self) -> int:
        return len(self.root.items)

    def structure(self) -> TreeNode:
        return self.root.structure()


def join(m: InterleavingDistribution, f: DenseDistribution, g: DenseDistribution, part: perm.ItemPartition | None = None) -> HierarchicalModel:
    """Two-leaf riffle independent model h = m(tau) f(phi_A) g(phi_B)."""
    if part is None:
        part = perm.ItemPartition.contiguous(f.n, g.n)
    return HierarchicalModel(internal_node(leaf_node(part.a_items, f), leaf_node(part.b_items, g), m))


def model_from_structure(structure: TreeNode, rng: np.random.Generator | None = None, concentration: float = 1.0) -> HierarchicalModel:
    """Model with the given shape: uniform parameters, or Dirichlet draws when ``rng`` is given."""

    def build(t: TreeNode) -> Node:
        if t.is_leaf:
            if rng is None:
                return leaf_node(t.items)
            return leaf_node(t.items, dense.random_distribution(len(t.items), rng, concentration))
        left, right = build(t.children[0]), build(t.children[1])
        p, q = len(left.items), len(right.items)
        if rng is None:
            m = uniform_interleaving(p, q)
        else:
            m = InterleavingDistribution(p, q, rng.dirichlet(np.full(math.comb(p + q, p), concentration)))
        return internal_node(left, right, m)

    return HierarchicalModel(build(structure))


def _log_table(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(values)


def _node_log_prob(node: Node, rel: np.ndarray) -> np.ndarray:
    if node.is_leaf:
        if node.factor.n == 1:
            return np.zeros(rel.shape[0])
        return _log_table(node.factor.probs)[perm.index_batch(rel)]
    part = node.partition
    a_ranks = np.sort(rel[:, list(part.a_items)], axis=1)
    tau = perm.subset_index_batch(a_ranks, part.n)
    out = _log_table(node.interleaving.probs)[tau]
    out = out + _node_log_prob(node.children[0], perm.relative_ranks_batch(rel, part.a_items))
    return out + _node_log_prob(node.children[1], perm.relative_ranks_batch(rel, part.b_items))


def log_prob_batch(model: HierarchicalModel, rankings: np.ndarray) -> np.ndarray:
    rankings = np.asarray(rankings, dtype=np.int64)
    if rankings.ndim != 2 or rankings.shape[1] != model.n:
        raise ValueError(f"expected rankings of {model.n} items")
    return _node_log_prob(model.root, rankings)


def log_prob(model: HierarchicalModel, s: Sequence[int]) -> float:
    s = perm.validate(s, model.n)
    return float(log_prob_batch(model, np.array([s]))[0])


def to_dense(model: HierarchicalModel) -> DenseDistribution:
    logp = log_prob_batch(model, perm.all_rankings(model.n))
    probs = np.exp(logp)
    return DenseDistribution(model.n, probs / probs.sum())


def mean_log_likelihood(model: HierarchicalModel, samples: SampleSet) -> float:
    if samples.total == 0:
        raise ValueError("empty sample set")
    logp = log_prob_batch(model, samples.rankings)
    with np.errstate(invalid="ignore"):
        return float((logp * samples.counts).sum() / samples.total)


def _node_sample(node: Node, rng: np.random.Generator, size: int) -> np.ndarray:
    k = len(node.items)
    if node.is_leaf:
        if k == 1:
            return np.zeros((size, 1), dtype=np.int64)
        idx = rng.choice(node.factor.probs.size, size=size, p=node.factor.probs)
        return np.asarray(perm.all_rankings(k))[idx]
    left = _node_sample(node.children[0], rng, size)
    right = _node_sample(node.children[1], rng, size)
    m = node.interleaving
    taus = perm.interleavings_array(m.p, m.q)[rng.choice(m.probs.size, size=size, p=m.probs)]
    return perm.recompose_batch(taus, left, right, node.partition)


def sample_batch(model: HierarchicalModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent rankings as an (size, n) array."""
    return _node_sample(model.root, rng, size)


def sample(model: HierarchicalModel, rng: np.random.Generator) -> perm.Ranking:
    return tuple(int(v) for v in sample_batch(model, rng, 1)[0])


# ----------------------------------------------------------------------------
# estimation


def riffle_split_mle(
    data: dense.Data, part: perm.ItemPartition, smoothing: float = 0.0
) -> tuple[InterleavingDistribution, DenseDistribution, DenseDistribution]:
    """Maximum likelihood interleaving and relative-ranking factors for a fixed split.

    Each factor is the normalized histogram of the corresponding projection of
    the data (plus ``smoothing`` per cell).
    """
    rankings, weights = dense.weighted_rankings(data)
    if rankings.shape[0] == 0 or weights.sum() <= 0:
        raise ValueError("riffle_split_mle needs at least one sample")
    if rankings.shape[1] != part.n:
        raise ValueError("data and partition sizes differ")
    tau, a_idx, b_idx = perm.decompose_batch(rankings, part)
    p, q = part.p, part.q
    m = np.bincount(tau, weights=weights, minlength=math.comb(p + q, p)) + smoothing
    f = np.bincount(a_idx, weights=weights, minlength=math.factorial(p)) + smoothing
    g = np.bincount(b_idx, weights=weights, minlength=math.factorial(q)) + smoothing
    return (
        InterleavingDistribution(p, q, m / m.sum()),
        DenseDistribution(p, f / f.sum()),
        DenseDistribution(q, g / g.sum()),
    )


def fit_parameters(structure: TreeNode, data: dense.Data, smoothing: float = 0.0) -> HierarchicalModel:
    """Maximum likelihood parameters for every node of a fixed tree."""
    rankings, weights = dense.weighted_rankings(data)
    if rankings.shape[0] == 0:
        raise ValueError("cannot fit parameters without data")

    def fit(t: TreeNode, rel: np.ndarray) -> Node:
        k = len(t.items)
        if t.is_leaf:
            counts = np.bincount(perm.index_batch(rel), weights=weights, minlength=math.factorial(k)) + smoothing
            return leaf_node(t.items, DenseDistribution(k, counts / counts.sum()))
        pos = {v: i for i, v in enumerate(t.items)}
        part = perm.ItemPartition(tuple(pos[v] for v in t.children[0].items), k)
        tau = perm.subset_index_batch(np.sort(rel[:, list(part.a_items)], axis=1), k)
        m = np.bincount(tau, weights=weights, minlength=math.comb(k, part.p)) + smoothing
        left = fit(t.children[0], perm.relative_ranks_batch(rel, part.a_items))
        right = fit(t.children[1], perm.relative_ranks_batch(rel, part.b_items))
        return internal_node(left, right, InterleavingDistribution(part.p, part.q, m / m.sum()))

    return HierarchicalModel(fit(structure, np.asarray(rankings, dtype=np.int64)))


def with_parametric_interleavings(model: HierarchicalModel, kind: str = "biased", components: int = 2,
                                  rng: np.random.Generator | None = None) -> HierarchicalModel:
    """Replace every interleaving table by its fitted biased riffle (or mixture)."""

    def convert(node: Node) -> Node:
        if node.is_leaf:
            return node
        m = node.interleaving
        if kind == "biased":
            new = biased_riffle(m.p, m.q, fit_alpha(m))
        elif kind == "mixture":
            w, a = fit_mixture_alphas(m, components=components, rng=rng)
            new = mixture_riffle(m.p, m.q, w, a)
        else:
            raise ValueError(f"unknown interleaving family {kind!r}")
        return internal_node(convert(node.children[0]), convert(node.children[1]), new)

    return HierarchicalModel(convert(model.root))


# ----------------------------------------------------------------------------
# inference


def condition(model: HierarchicalModel, likelihood: HierarchicalModel) -> HierarchicalModel:
    """Posterior of a prior and a likelihood sharing the same tree (factorwise products)."""
    if model.structure() != likelihood.structure():
        raise ValueError("prior and likelihood must decompose along the same tree")

    def product(a: Node, b: Node) -> Node:
        if a.is_leaf:
            return leaf_node(a.items, dense.pointwise_condition(a.factor, b.factor))
        vals = a.interleaving.probs * b.interleaving.probs
        if vals.sum() <= 0:
            raise ValueError("zero evidence at an interleaving factor")
        m = InterleavingDistribution(a.interleaving.p, a.interleaving.q, vals / vals.sum())
        return internal_node(product(a.children[0], b.children[0]), product(a.children[1], b.children[1]), m)

    return HierarchicalModel(product(model.root, likelihood.root))


def condition_pairwise(model: HierarchicalModel, i: int, j: int, beta: float = 1.0) -> HierarchicalModel:
    """Posterior after observing "item i is ranked ahead of item j" with reliability beta.

    Exact and structure-preserving only when i and j share a leaf; otherwise
    :class:`NonDecomposableObservation` is raised.
    """
    if i == j or not (0 <= i < model.n and 0 <= j < model.n):
        raise ValueError("need two distinct valid items")

    def update(node: Node) -> Node:
        if node.is_leaf:
            li, lj = node.items.index(i), node.items.index(j)
            like = dense.pairwise_likelihood(len(node.items), li, lj, beta)
            return leaf_node(node.items, dense.pointwise_condition(node.factor, like))
        left, right = node.children
        if i in left.items and j in left.items:
            return internal_node(update(left), right, node.interleaving)
        if i in right.items and j in right.items:
            return internal_node(left, update(right), node.interleaving)
        raise NonDecomposableObservation(
            f"items {i + 1} and {j + 1} are separated by the split {left.items} / {right.items}"
        )

    return HierarchicalModel(update(model.root))


def model_entropy(model: HierarchicalModel) -> float:
    def ent(node: Node) -> float:
        if node.is_leaf:
            return dense.entropy(node.factor)
        return node.interleaving.entropy() + ent(node.children[0]) + ent(node.children[1])

    return ent(model.root)


MAP_CANDIDATE_LIMIT = 1_000_000


def _argmax_set(values: np.ndarray) -> np.ndarray:
    return np.flatnonzero(values == values.max())


def map_assignment(model: HierarchicalModel) -> perm.Ranking:
    """Most probable ranking; ties are broken towards the lexicographically smallest."""

    def best(node: Node) -> np.ndarray:
        k = len(node.items)
        if node.is_leaf:
            if k == 1:
                return np.zeros((1, 1), dtype=np.int64)
            return np.asarray(perm.all_rankings(k))[_argmax_set(node.factor.probs)]
        left, right = best(node.children[0]), best(node.children[1])
        m = node.interleaving
        taus = perm.interleavings_array(m.p, m.q)[_argmax_set(m.probs)]
        total = taus.shape[0] * left.shape[0] * right.shape[0]
        if total > MAP_CANDIDATE_LIMIT:
            raise ValueError(f"too many tied maximizers ({total}) to break ties exactly")
        ti, li, ri = np.meshgrid(np.arange(taus.shape[0]), np.arange(left.shape[0]), np.arange(right.shape[0]), indexing="ij")
        return perm.recompose_batch(taus[ti.ravel()], left[li.ravel()], right[ri.ravel()], node.partition)

    cands = best(model.root)
    order = np.lexsort(cands.T[::-1])
    return tuple(int(v) for v in cands[order[0]])


# ----------------------------------------------------------------------------
# flattening to a single multi-way interleaving


@dataclass(frozen=True)
class DWayDecomposition:
    """Leaf sets, a joint distribution over multi-way interleavings, and leaf factors.

    ``labels[r, t]`` is the index of the leaf set occupying rank ``t`` in the
    r-th multi-way interleaving, whose probability is ``probs[r]``.
    """

    leaf_sets: tuple[tuple[int, ...], ...]
    labels: np.ndarray
    probs: np.ndarray
    factors: tuple[DenseDistribution, ...]

    @property
    def n(self) -> int:
        return sum(len(s) for s in self.leaf_sets)

    def to_dense(self) -> DenseDistribution:
        n = self.n
        perms = perm.all_rankings(n)
        item_label = np.empty(n, dtype=np.int64)
        for idx, items in enumerate(self.leaf_sets):
            item_label[list(items)] = idx
        d = len(self.leaf_sets)
        powers = d ** np.arange(n - 1, -1, -1, dtype=np.int64)
        seq = item_label[np.argsort(perms, axis=1)]
        keys = seq @ powers
        table_keys = self.labels @ powers
        order = np.argsort(table_keys)
        pos = np.searchsorted(table_keys[order], keys)
        pos = np.clip(pos, 0, len(order) - 1)
        found = table_keys[order][pos] == keys
        out = np.where(found, self.probs[order][pos], 0.0)
        for items, f in zip(self.leaf_sets, self.factors):
            if len(items) > 1:
                out = out * f.probs[perm.index_batch(perm.relative_ranks_batch(perms, items))]
        return DenseDistribution(n, out)


def flatten_to_dway(model: HierarchicalModel, max_entries: int = 5_000_000) -> DWayDecomposition:
    def flat(node: Node) -> tuple[list[tuple[int, ...]], np.ndarray, np.ndarray, list[DenseDistribution]]:
        if node.is_leaf:
            return [node.items], np.zeros((1, len(node.items)), dtype=np.int64), np.ones(1), [node.factor]
        ls, llab, lp, lf = flat(node.children[0])
        rs, rlab, rp, rf = flat(node.children[1])
        rlab = rlab + len(ls)
        m = node.interleaving
        taus = perm.interleavings_array(m.p, m.q)
        total = taus.shape[0] * llab.shape[0] * rlab.shape[0]
        if total > max_entries:
            raise ValueError(f"multi-way interleaving table would have {total} entries (cap {max_entries})")
        ti, li, ri = np.meshgrid(np.arange(taus.shape[0]), np.arange(llab.shape[0]), np.arange(rlab.shape[0]), indexing="ij")
        ti, li, ri = ti.ravel(), li.ravel(), ri.ravel()
        labels = np.empty((ti.size, m.p + m.q), dtype=np.int64)
        rows = np.arange(ti.size)[:, None]
        labels[rows, taus[ti, :m.p]] = llab[li]
        labels[rows, taus[ti, m.p:]] = rlab[ri]
        probs = m.probs[ti] * lp[li] * rp[ri]
        return ls + rs, labels, probs, lf + rf

    sets, labels, probs, factors = flat(model.root)
    return DWayDecomposition(tuple(sets), labels, probs, tuple(factors))
