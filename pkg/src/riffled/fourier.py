"""Fourier analysis on S_n with Young's orthogonal representation.

Conventions:

* ``FT(h)[lam] = sum_s h(s) rho_lam(s)`` with real orthogonal ``rho_lam``.
* Convolution ``[m * h](s) = sum_t m(t) h(t^-1 s)`` becomes ``FT(m) @ FT(h)``.
* Inverse: ``h(s) = (1/n!) sum_lam d_lam * sum(rho_lam(s) * H_lam)``.
* Standard tableaux of ``lam`` are ordered by the removable corner holding the
  largest entry (corners top to bottom), then recursively. With this ordering
  the restriction of ``rho_lam`` to S_{n-1} (rankings fixing the last item at
  the last rank) is block diagonal in the ``rho_mu`` of the smaller shapes.
* Levels are listed in reverse lexicographic order of partitions, so an
  order-k truncation (all ``lam`` with first part >= n-k) is a prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from . import perm
from .config import CapError, DEFAULT_MAX_FOURIER_N, check_dense_n
from .dense import DenseDistribution, MarginalTable, ordered_tuples
from .riffle import InterleavingDistribution

Partition = tuple[int, ...]


def partitions_of(n: int) -> list[Partition]:
    """Partitions of n, largest first part first, then reverse lexicographic."""
    if n < 1:
        raise ValueError("n must be positive")

    def gen(rest: int, cap: int) -> Iterator[Partition]:
        if rest == 0:
            yield ()
            return
        for first in range(min(rest, cap), 0, -1):
            for tail in gen(rest - first, first):
                yield (first,) + tail

    return list(gen(n, n))


def levels_for_order(n: int, order: int | None) -> list[Partition]:
    """Levels kept by an order-k truncation (all levels when ``order`` is None)."""
    parts = partitions_of(n)
    if order is None:
        return parts
    return [lam for lam in parts if lam[0] >= n - order]


def _corners(lam: Partition) -> list[int]:
    """Rows whose last box can be removed, top to bottom."""
    return [r for r in range(len(lam)) if r == len(lam) - 1 or lam[r] > lam[r + 1]]


def _remove(lam: Partition, row: int) -> Partition:
    out = list(lam)
    out[row] -= 1
    return tuple(v for v in out if v > 0)


@lru_cache(maxsize=None)
def standard_tableaux(lam: Partition) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Each tableau as the (row, col) cell of values 0..n-1, in branching order."""
    n = sum(lam)
    if n == 1:
        return (((0, 0),),)
    out = []
    for row in _corners(lam):
        cell = (row, lam[row] - 1)
        for t in standard_tableaux(_remove(lam, row)):
            out.append(t + (cell,))
    return tuple(out)


def dimension(lam: Partition) -> int:
    """Number of standard tableaux, by the hook length formula."""
    n = sum(lam)
    conj = [sum(1 for v in lam if v > c) for c in range(lam[0])] if lam else []
    hooks = 1
    for r, length in enumerate(lam):
        for c in range(length):
            hooks *= (length - c - 1) + (conj[c] - r - 1) + 1
    return math.factorial(n) // hooks


@dataclass(frozen=True)
class Generator:
    """Sparse form of rho(s_k): row t of rho @ M is diag[t]*M[t] + off[t]*M[partner[t]]."""

    diag: np.ndarray
    off: np.ndarray
    partner: np.ndarray

    def dense(self) -> np.ndarray:
        d = self.diag.size
        mat = np.diag(self.diag)
        mat[np.arange(d), self.partner] += self.off
        return mat

    def left_apply(self, mats: np.ndarray) -> np.ndarray:
        """rho(s_k) @ M for M of shape (..., d, d)."""
        return self.diag[:, None] * mats + self.off[:, None] * mats[..., self.partner, :]


@lru_cache(maxsize=None)
def _generators(lam: Partition) -> tuple[Generator, ...]:
    tabs = standard_tableaux(lam)
    index = {t: i for i, t in enumerate(tabs)}
    n = sum(lam)
    gens = []
    for k in range(n - 1):
        d = len(tabs)
        diag = np.zeros(d)
        off = np.zeros(d)
        partner = np.arange(d)
        for i, t in enumerate(tabs):
            (r1, c1), (r2, c2) = t[k], t[k + 1]
            axial = (c2 - r2) - (c1 - r1)
            diag[i] = 1.0 / axial
            swapped = list(t)
            swapped[k], swapped[k + 1] = swapped[k + 1], swapped[k]
            j = index.get(tuple(swapped))
            if j is not None:
                partner[i] = j
                off[i] = math.sqrt(1.0 - 1.0 / axial ** 2)
        gens.append(Generator(diag, off, partner))
    return tuple(gens)


class IrrepTable:
    """Dimensions and adjacent-transposition generators for every partition of n."""

    def __init__(self, n: int):
        self.n = n
        self.partitions = partitions_of(n)
        self.dims = {lam: dimension(lam) for lam in self.partitions}

    def generator(self, lam: Partition, k: int) -> np.ndarray:
        """Dense rho_lam of the transposition swapping k and k+1 (0-based)."""
        return _generators(lam)[k].dense()

    def generators(self, lam: Partition) -> list[np.ndarray]:
        return [g.dense() for g in _generators(lam)]


def adjacent_word(s: Sequence[int]) -> list[int]:
    """ks with s = s_{k1} o s_{k2} o ... (s_k swaps values k and k+1)."""
    pos = list(perm.inverse(s))
    word = []
    changed = True
    while changed:
        changed = False
        for k in range(len(s) - 1):
            if pos[k] > pos[k + 1]:
                word.append(k)
                pos[k], pos[k + 1] = pos[k + 1], pos[k]
                changed = True
    return word


def yor_matrix(lam: Partition, s: Sequence[int]) -> np.ndarray:
    """rho_lam(s) in Young's orthogonal form."""
    n = len(s)
    if sum(lam) != n:
        raise ValueError(f"partition {lam} does not partition {n}")
    gens = _generators(tuple(lam))
    mat = np.eye(dimension(tuple(lam)))
    for k in reversed(adjacent_word(s)):
        mat = gens[k].left_apply(mat)
    return mat


@lru_cache(maxsize=4)
def _parents(n: int) -> tuple[list[np.ndarray], list[np.ndarray], list[np.ndarray]]:
    """Group S_n by inversion count; each ranking gets a parent with one inversion less.

    Returns, per inversion level, (indices, parent indices, generator k) with
    ranking = s_k o parent.
    """
    if n < 2:
        return [], [], []
    perms = np.asarray(perm.all_rankings(n))
    pos = np.argsort(perms, axis=1)
    inv = np.triu(perms[:, :, None] > perms[:, None, :], 1).sum(axis=(1, 2))
    ks = np.argmax(pos[:, :-1] > pos[:, 1:], axis=1)
    # the parent swaps the values k and k+1 back
    parent_perms = perms.copy()
    lo = perms == ks[:, None]
    hi = perms == (ks + 1)[:, None]
    parent_perms[lo] = ks[np.nonzero(lo)[0]] + 1
    parent_perms[hi] = ks[np.nonzero(hi)[0]]
    parents = perm.index_batch(parent_perms)
    idx_levels, par_levels, k_levels = [], [], []
    for level in range(1, int(inv.max()) + 1):
        sel = np.flatnonzero(inv == level)
        idx_levels.append(sel)
        par_levels.append(parents[sel])
        k_levels.append(ks[sel])
    return idx_levels, par_levels, k_levels


_STACKS: dict[tuple[int, Partition], np.ndarray] = {}


def representation_stack(lam: Partition, max_n: int = DEFAULT_MAX_FOURIER_N) -> np.ndarray:
    """(n!, d, d) array of rho_lam(s) for every ranking, in rank_index order."""
    lam = tuple(lam)
    n = sum(lam)
    if n > max_n:
        raise CapError(f"full Fourier transforms are limited to n <= {max_n} (got n={n})")
    check_dense_n(n, "Fourier transform")
    key = (n, lam)
    if key not in _STACKS:
        d = dimension(lam)
        gens = _generators(lam)
        stack = np.empty((math.factorial(n), d, d))
        stack[0] = np.eye(d)
        for sel, par, ks in zip(*_parents(n)):
            for k in np.unique(ks):
                pick = ks == k
                stack[sel[pick]] = gens[k].left_apply(stack[par[pick]])
        stack.setflags(write=False)
        _STACKS[key] = stack
    return _STACKS[key]


@dataclass(frozen=True)
class FourierCoefficients:
    """Coefficient matrices for a prefix of the levels of S_n.

    ``order`` is None when every level is present, otherwise the truncation
    order k (levels with first part >= n-k).
    """

    n: int
    levels: tuple[Partition, ...]
    mats: tuple[np.ndarray, ...]
    order: int | None = None

    def __post_init__(self) -> None:
        if len(self.levels) != len(self.mats):
            raise ValueError("levels and matrices differ in number")
        for lam, mat in zip(self.levels, self.mats):
            d = dimension(lam)
            if sum(lam) != self.n or mat.shape != (d, d):
                raise ValueError(f"matrix for level {lam} has shape {mat.shape}, expected {(d, d)}")

    @property
    def truncated(self) -> bool:
        return self.order is not None and len(self.levels) < len(partitions_of(self.n))

    def __getitem__(self, lam: Sequence[int]) -> np.ndarray:
        return self.mats[self.levels.index(tuple(lam))]

    def get(self, lam: Partition) -> np.ndarray | None:
        lam = tuple(lam)
        return self.mats[self.levels.index(lam)] if lam in self.levels else None

    def max_abs_diff(self, other: "FourierCoefficients") -> float:
        if self.levels != other.levels:
            raise ValueError("coefficient sets have different levels")
        return max(float(np.abs(a - b).max()) for a, b in zip(self.mats, other.mats))


def _with_mats(F: FourierCoefficients, mats: list[np.ndarray]) -> FourierCoefficients:
    return FourierCoefficients(F.n, F.levels, tuple(mats), F.order)


def fourier_transform(h: DenseDistribution | np.ndarray, order: int | None = None, n: int | None = None) -> FourierCoefficients:
    """Transform of a table over S_n (all levels, or those of an order-k truncation)."""
    if isinstance(h, DenseDistribution):
        n, values = h.n, h.probs
    else:
        values = np.asarray(h, dtype=np.float64)
        if n is None:
            raise ValueError("n is required for raw tables")
    levels = levels_for_order(n, order)
    mats = tuple(np.tensordot(values, representation_stack(lam), axes=(0, 0)) for lam in levels)
    return FourierCoefficients(n, tuple(levels), mats, order)


def inverse_values(F: FourierCoefficients) -> np.ndarray:
    """Table of the inverse transform; absent levels count as zero."""
    n = F.n
    out = np.zeros(math.factorial(n))
    for lam, mat in zip(F.levels, F.mats):
        stack = representation_stack(lam)
        d = mat.shape[0]
        out += d * (stack.reshape(stack.shape[0], d * d) @ mat.ravel())
    return out / math.factorial(n)


def inverse_fourier_transform(F: FourierCoefficients, normalized: bool = True) -> DenseDistribution:
    values = inverse_values(F)
    values[np.abs(values) < 1e-13] = 0.0
    if np.any(values < 0):
        if values.min() < -1e-9:
            raise ValueError("inverse transform has negative entries; use inverse_values for signed tables")
        values = np.clip(values, 0.0, None)
    if normalized:
        values = values / values.sum()
    return DenseDistribution(F.n, values, normalized=normalized)


def _check_compatible(F: FourierCoefficients, G: FourierCoefficients) -> None:
    if F.n != G.n or F.levels != G.levels:
        raise ValueError("coefficient sets must share n and levels")


def convolve_fourier(F: FourierCoefficients, G: FourierCoefficients) -> FourierCoefficients:
    _check_compatible(F, G)
    return _with_mats(F, [a @ b for a, b in zip(F.mats, G.mats)])


def dual_transpose(F: FourierCoefficients) -> FourierCoefficients:
    """Coefficients of s -> f(s^-1)."""
    return _with_mats(F, [m.T.copy() for m in F.mats])


def truncate(F: FourierCoefficients, order: int) -> FourierCoefficients:
    keep = levels_for_order(F.n, order)
    missing = [lam for lam in keep if lam not in F.levels]
    if missing:
        raise ValueError(f"cannot truncate to order {order}: missing levels {missing}")
    return FourierCoefficients(F.n, tuple(keep), tuple(F[lam] for lam in keep), order)


def restrict_levels(F: FourierCoefficients, levels: Sequence[Partition], order: int | None) -> FourierCoefficients:
    missing = [lam for lam in levels if lam not in F.levels]
    if missing:
        raise ValueError(f"missing levels {missing}")
    return FourierCoefficients(F.n, tuple(levels), tuple(F[lam] for lam in levels), order)


# ----------------------------------------------------------------------------
# interleaving distributions in the Fourier domain


def _embed(F_small: dict[Partition, np.ndarray], lam: Partition) -> np.ndarray:
    """Coefficient at lam of f extended from S_{n-1} (last item fixed at the last rank)."""
    blocks = [F_small[_remove(lam, row)] for row in _corners(lam)]
    d = sum(b.shape[0] for b in blocks)
    out = np.zeros((d, d))
    at = 0
    for b in blocks:
        k = b.shape[0]
        out[at:at + k, at:at + k] = b
        at += k
    return out


def _drop_cycle(i: int, j: int) -> perm.Ranking:
    """Item relabeling for a drop from pile A on S_i with j cards in A.

    A's last item moves to item i-1 (the last rank) and B's items shift down.
    """
    return tuple(list(range(j - 1)) + [i - 1] + list(range(j - 1, i - 1)))


def rifflehat(p: int, q: int, alpha: float = 0.5, order: int | None = None) -> FourierCoefficients:
    """Fourier coefficients of the biased riffle on S_{p+q}, without enumerating S_{p+q}.

    Runs the drop recurrence over Pascal's triangle: cell (i, j) holds the
    coefficients of the (j, i-j) interleaving distribution.  Each step embeds
    the smaller cells and, for a drop from pile A, right-multiplies by the
    representation of the relabeling cycle.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    n = p + q
    row: dict[int, dict[Partition, np.ndarray]] = {}
    for i in range(1, n + 1):
        levels = levels_for_order(i, order)
        new_row: dict[int, dict[Partition, np.ndarray]] = {}
        lo, hi = max(0, p - (n - i)), min(p, i)
        for j in range(lo, hi + 1):
            if j == 0 or j == i:
                new_row[j] = {lam: np.eye(dimension(lam)) for lam in levels}
                continue
            a_w = alpha * j
            b_w = (1.0 - alpha) * (i - j)
            w_left = a_w / (a_w + b_w) if a_w + b_w > 0 else 0.0
            cycle = _drop_cycle(i, j)
            cell = {}
            for lam in levels:
                acc = np.zeros((dimension(lam), dimension(lam)))
                if w_left > 0:
                    acc += w_left * (_embed(row[j - 1], lam) @ yor_matrix(lam, cycle))
                if w_left < 1:
                    acc += (1.0 - w_left) * _embed(row[j], lam)
                cell[lam] = acc
            new_row[j] = cell
        row = new_row
    levels = levels_for_order(n, order)
    return FourierCoefficients(n, tuple(levels), tuple(row[p][lam] for lam in levels), order)


def interleaving_transform(m: InterleavingDistribution, order: int | None = None) -> FourierCoefficients:
    """Direct transform of an interleaving table embedded in S_{p+q}."""
    return fourier_transform(m.to_dense(), order)


# ----------------------------------------------------------------------------
# join / split and the riffle operations


def _blocks(p: int, q: int) -> np.ndarray:
    """Indices in S_{p+q} of (a, b+p) for all a in S_p, b in S_q (row-major in a, b)."""
    a = np.asarray(perm.all_rankings(p))
    b = np.asarray(perm.all_rankings(q)) + p
    stacked = np.concatenate([np.repeat(a, b.shape[0], axis=0), np.tile(b, (a.shape[0], 1))], axis=1)
    return perm.index_batch(stacked)


def _min_order(*orders: int | None) -> int | None:
    known = [o for o in orders if o is not None]
    return min(known) if known else None


def join_fourier(Fp: FourierCoefficients, Gq: FourierCoefficients, order: int | None = None) -> FourierCoefficients:
    """Coefficients of f(a) g(b) placed on the rankings (a, b+p) of S_{p+q}.

    Computed through the time domain. Levels missing from the inputs are
    treated as zero; the output keeps the levels of the smallest input order.
    """
    p, q = Fp.n, Gq.n
    n = p + q
    f = inverse_values(Fp)
    g = inverse_values(Gq)
    table = np.zeros(math.factorial(n))
    table[_blocks(p, q)] = np.outer(f, g).ravel()
    order = _min_order(Fp.order, Gq.order) if order is None else order
    return fourier_transform(table, order, n=n)


def split_fourier(H: FourierCoefficients, p: int, normalize: bool = True) -> tuple[FourierCoefficients, FourierCoefficients]:
    """Marginals of a function on S_{p+q} restricted to the rankings (a, b+p)."""
    n = H.n
    q = n - p
    if not 0 < p < n:
        raise ValueError("split sizes must both be positive")
    values = inverse_values(H)[_blocks(p, q)].reshape(math.factorial(p), math.factorial(q))
    f = values.sum(axis=1)
    g = values.sum(axis=0)
    if normalize:
        f = f / f.sum()
        g = g / g.sum()
    order_p = None if H.order is None else min(H.order, p)
    order_q = None if H.order is None else min(H.order, q)
    return fourier_transform(f, order_p, n=p), fourier_transform(g, order_q, n=q)


def riffle_join_fourier(Fp: FourierCoefficients, Gq: FourierCoefficients, M: FourierCoefficients) -> FourierCoefficients:
    """Coefficients of the riffle independent joint m * (f x g): M_lam @ joined_lam."""
    joined = join_fourier(Fp, Gq)
    missing = [lam for lam in joined.levels if lam not in M.levels]
    if missing:
        raise ValueError(f"interleaving coefficients lack levels {missing}")
    return _with_mats(joined, [M[lam] @ mat for lam, mat in zip(joined.levels, joined.mats)])


def riffle_split_fourier(H: FourierCoefficients, p: int) -> tuple[FourierCoefficients, FourierCoefficients]:
    """Relative-ranking factors from the joint's coefficients.

    Deconvolves with the dual of the uniform interleaving (transposed
    coefficients), splits, and normalizes so each factor sums to one.
    """
    unif = rifflehat(p, H.n - p, 0.5, H.order)
    shifted = _with_mats(H, [unif[lam].T @ mat for lam, mat in zip(H.levels, H.mats)])
    return split_fourier(shifted, p, normalize=True)


# ----------------------------------------------------------------------------
# marginals from low levels


@lru_cache(maxsize=None)
def _indicator_transforms(n: int, k: int) -> tuple[tuple[tuple[int, ...], ...], dict[Partition, np.ndarray]]:
    """For each level with first part >= n-k: (K*K, d*d) transforms of the indicators [s(items)=ranks]."""
    tuples = ordered_tuples(n, k)
    size = len(tuples)
    tup = np.array(tuples, dtype=np.int64).reshape(-1, k)
    powers = n ** np.arange(k - 1, -1, -1)
    lookup = np.full(n ** k, -1, dtype=np.int64)
    lookup[tup @ powers] = np.arange(size)
    perms = np.asarray(perm.all_rankings(n))
    out = {}
    for lam in levels_for_order(n, k):
        stack = representation_stack(lam)
        d = stack.shape[1]
        flat = stack.reshape(stack.shape[0], d * d)
        acc = np.zeros((size * size, d * d))
        chunk = max(1, 2_000_000 // max(size * d * d, 1))
        for start in range(0, perms.shape[0], chunk):
            block = perms[start:start + chunk]
            r_idx = lookup[block[:, tup] @ powers]
            keys = (r_idx * size + np.arange(size)[None, :]).ravel()
            rows = np.repeat(np.arange(block.shape[0]), size)
            np.add.at(acc, keys, flat[start:start + chunk][rows])
        out[lam] = acc
    return tuple(tuples), out


def reconstruct_kth_order_marginals(F: FourierCoefficients, k: int) -> MarginalTable:
    """k-th order marginal table from the levels with first part >= n-k."""
    n = F.n
    if not 1 <= k <= n:
        raise ValueError(f"marginal order must lie in 1..{n}")
    need = levels_for_order(n, k)
    missing = [lam for lam in need if lam not in F.levels]
    if missing:
        raise ValueError(f"order-{k} marginals need the missing levels {missing}")
    tuples, proj = _indicator_transforms(n, k)
    size = len(tuples)
    values = np.zeros(size * size)
    for lam in need:
        d = dimension(lam)
        values += d * (proj[lam] @ F[lam].ravel())
    return MarginalTable(n, k, tuples, (values / math.factorial(n)).reshape(size, size))
