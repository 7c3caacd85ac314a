"""Pure numpy implementations of the hot loops (used when the compiled core is absent)."""

from __future__ import annotations

import numpy as np


def lehmer_index_batch(perms: np.ndarray) -> np.ndarray:
    """Lexicographic index of every row of an (N, n) array of 0-based permutations."""
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    count, n = perms.shape
    out = np.zeros(count, dtype=np.int64)
    if n == 0:
        return out
    weight = 1
    for i in range(n - 1, -1, -1):
        smaller_after = (perms[:, i + 1:] < perms[:, i:i + 1]).sum(axis=1)
        out += smaller_after * weight
        weight *= n - i
    return out


def triplet_counts(perms: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """counts[i, r, j, k] = total weight of rows with perm[i] == r and perm[j] < perm[k]."""
    perms = np.ascontiguousarray(perms, dtype=np.int64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    count, n = perms.shape
    onehot = np.zeros((count, n, n))
    onehot[np.arange(count)[:, None], np.arange(n)[None, :], perms] = 1.0
    less = (perms[:, :, None] < perms[:, None, :]).astype(np.float64)
    left = (onehot * weights[:, None, None]).reshape(count, n * n)
    return (left.T @ less.reshape(count, n * n)).reshape(n, n, n, n)
