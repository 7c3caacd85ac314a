import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riffled import dense, perm, riffle, structure, synth, tree
from riffled.dense import DenseDistribution, SampleSet
from riffled.structure import TripletMITensor

from conftest import random_split_model


def brute_triplet_mi(h_or_samples, i, j, k, s=0.0):
    """Plug-in MI between rank of i and [j ahead of k], from a 2 x n table."""
    if isinstance(h_or_samples, DenseDistribution):
        rows, weights = perm.all_rankings(h_or_samples.n), h_or_samples.probs
    else:
        rows, weights = h_or_samples.rankings, h_or_samples.counts.astype(float)
    n = rows.shape[1]
    table = np.full((n, 2), s)
    for r, w in zip(rows, weights):
        table[r[i], int(r[j] < r[k])] += w
    table /= table.sum()
    px, py = table.sum(axis=1), table.sum(axis=0)
    mi = 0.0
    for a in range(n):
        for b in range(2):
            if table[a, b] > 0:
                mi += table[a, b] * math.log(table[a, b] / (px[a] * py[b]))
    return max(mi, 0.0)


def strongly_connected(seed, n=8, a_size=3):
    return synth.strongly_connected_model(np.random.default_rng(seed), n, a_size)


def exact_tensor(model):
    return structure.estimate_triplet_mi(riffle.to_dense(model))


def test_triplet_mi_matches_brute_dense():
    h = dense.random_distribution(4, np.random.default_rng(0))
    T = structure.estimate_triplet_mi(h)
    for i, j, k in itertools.permutations(range(4), 3):
        assert T.values[i, j, k] == pytest.approx(brute_triplet_mi(h, i, j, k), abs=1e-12)
    assert T.values[0, 0, 1] == 0 and T.values[1, 2, 2] == 0


def test_triplet_mi_matches_brute_samples():
    rng = np.random.default_rng(1)
    samples = SampleSet.from_array(np.array([rng.permutation(5) for _ in range(300)]))
    T = structure.estimate_triplet_mi(samples)
    assert T.smoothing == pytest.approx(1 / 300)
    for i, j, k in itertools.permutations(range(5), 3):
        assert T.values[i, j, k] == pytest.approx(brute_triplet_mi(samples, i, j, k, 1 / 300), abs=1e-12)


def test_uniform_samples_have_zero_mi():
    samples = SampleSet.from_rankings(4, perm.enumerate_sn(4), [3] * 24)
    assert np.abs(structure.estimate_triplet_mi(samples).values).max() < 1e-12


def test_cross_triplets_vanish_at_riffle_independent_split():
    rng = np.random.default_rng(2)
    m, f, g, part = random_split_model(rng, 6, (0, 1))
    T = structure.estimate_triplet_mi(riffle.to_dense(riffle.join(m, f, g, part)))
    A, B = (0, 1), (2, 3, 4, 5)
    for X, Y in ((A, B), (B, A)):
        for i in X:
            for j, k in itertools.permutations(Y, 2):
                assert abs(T.values[i, j, k]) < 1e-12
    assert abs(structure.objective_cross(T, A)) < 1e-12


def test_cross_triplet_count():
    for n in range(2, 9):
        for k in range(1, n):
            brute = sum(
                1 for i, j, l in itertools.permutations(range(n), 3)
                if (i < k) != (j < k) and (j < k) == (l < k)
            )
            assert structure.cross_triplet_count(n, k) == brute
    assert structure.cross_triplet_count(3, 1) == 2
    c = 0.37
    for n, k in ((3, 1), (5, 2), (6, 3)):
        T = TripletMITensor(n, _all_equal(n, c), 1.0, 0.0)
        assert structure.objective_cross(T, range(k)) == pytest.approx(c * structure.cross_triplet_count(n, k))


def _all_equal(n, c):
    values = np.full((n, n, n), c)
    idx = np.arange(n)
    values[idx, idx, :] = 0
    values[idx, :, idx] = 0
    values[:, idx, idx] = 0
    return values


def test_balanced_objective_arithmetic():
    # each side: crossing / (crossing + internal), summed
    T = TripletMITensor(6, _all_equal(6, 1.0), 1.0, 0.0)
    three = structure.objective_balanced(T, (0, 1, 2))
    one = structure.objective_balanced(T, (0,))
    assert three == pytest.approx(18 / 24 + 18 / 24)
    assert one == pytest.approx(20 / 20 + 0.0)
    zero = TripletMITensor(6, np.zeros((6, 6, 6)), 1.0, 0.0)
    assert structure.objective_balanced(zero, (0, 1)) == 0.0


def test_balanced_objective_zero_at_true_split():
    model, A = strongly_connected(0)
    T = exact_tensor(model)
    assert abs(structure.objective_balanced(T, A)) < 1e-12


def test_quad_objective():
    rng = np.random.default_rng(3)
    m, f, g, part = random_split_model(rng, 6, (0, 1, 2))
    h = riffle.to_dense(riffle.join(m, f, g, part))
    assert abs(structure.objective_quad(h, (0, 1, 2))) < 1e-12
    assert abs(structure.objective_quad(dense.uniform(5), (0, 1))) < 1e-12
    with pytest.warns(UserWarning):
        assert structure.objective_quad(h, (0,)) == 0.0


def counterexample_s4():
    """Interleaving AABB when item 0 precedes item 1, BBAA otherwise; uniform relative rankings."""
    part = perm.ItemPartition((0, 1), 4)
    table = np.zeros(24)
    for pa in perm.enumerate_sn(2):
        tau = (0, 1, 2, 3) if pa == (0, 1) else (2, 3, 0, 1)
        for pb in perm.enumerate_sn(2):
            table[perm.rank_index(perm.recompose(tau, pa, pb, part))] = 0.25
    return DenseDistribution(4, table)


def test_relative_rank_independence_is_not_enough():
    h = counterexample_s4()
    # the relative rankings of A and B are independent ...
    joint = np.zeros((2, 2))
    for s, p in zip(perm.enumerate_sn(4), h.probs):
        joint[int(s[0] < s[1]), int(s[2] < s[3])] += p
    assert np.allclose(joint, np.outer(joint.sum(1), joint.sum(0)), atol=1e-15)
    assert abs(structure.objective_quad(h, (0, 1))) < 1e-12
    # ... but the interleaving depends on phi_A, which the triplet terms detect
    T = structure.estimate_triplet_mi(h)
    assert structure.objective_cross(T, (0, 1)) > 0.1


def test_true_split_is_unique_minimum():
    for seed in range(3):
        model, A = strongly_connected(seed)
        T = exact_tensor(model)
        B = tuple(v for v in range(8) if v not in A)
        assert abs(structure.objective_cross(T, A)) < 1e-12
        for size in range(1, 8):
            for sub in itertools.combinations(range(8), size):
                if sub in (A, B):
                    continue
                assert structure.objective_cross(T, sub) > 1e-6


def test_exhaustive_examples():
    model, A = strongly_connected(4)
    T = exact_tensor(model)
    res = structure.exhaustive_partition(T, 3)
    assert res.a_items == A and abs(res.value) < 1e-12
    pair = TripletMITensor(2, np.zeros((2, 2, 2)), 1.0, 0.0)
    res = structure.exhaustive_partition(pair, 1)
    assert res.a_items == (0,) and res.value == 0
    zero = TripletMITensor(5, np.zeros((5, 5, 5)), 1.0, 0.0)
    assert structure.exhaustive_partition(zero, 2).a_items == (0, 1)
    with pytest.raises(ValueError, match="budget"):
        structure.exhaustive_partition(zero, 2, budget=5)


def test_anchors_examples():
    for seed in range(5):
        model, A = strongly_connected(10 + seed)
        T = exact_tensor(model)
        assert structure.anchors_partition(T, 3).a_items == A
        assert structure.anchors_partition(T, None).a_items == A
    res = structure.anchors_partition(dense.uniform(6), 2)
    assert abs(res.value) < 1e-12 and len(res.a_items) == 2


def apa_like_model(rng):
    shape = tree.split(tree.leaf((1,)), tree.split(tree.leaf((0, 2)), tree.leaf((3, 4))))
    return synth.random_model(shape, rng, 0.5, interleavings="biased"), shape


def test_anchors_agrees_with_exhaustive_on_apa_like_data():
    rng = np.random.default_rng(5)
    model, shape = apa_like_model(rng)
    samples = synth.draw_samples(model, 5000, rng)
    ex = structure.learn_hierarchy(samples, leaf_cap=2, method="exhaustive")
    an = structure.learn_hierarchy(samples, leaf_cap=2, method="anchors")
    assert ex.canonical() == an.canonical()


def test_learn_thin_chain_exact():
    rng = np.random.default_rng(6)
    shape = tree.chain([[int(v)] for v in rng.permutation(8)], leaf_cap=2)
    model = riffle.model_from_structure(shape, rng, 1.0)
    learned = structure.learn_hierarchy(riffle.to_dense(model), mode="thin", k=1, leaf_cap=2)
    assert structure.structure_agreement(learned, shape, "exact")


def test_learn_two_items():
    learned = structure.learn_hierarchy(dense.uniform(2), leaf_cap=1)
    assert learned.tree.canonical() == ((0,), (1,))


def test_learn_invariant_to_sample_order():
    rng = np.random.default_rng(7)
    model, _ = apa_like_model(rng)
    draws = riffle.sample_batch(model, rng, 800)
    base = structure.learn_hierarchy(SampleSet.from_array(draws), leaf_cap=2)
    for _ in range(3):
        shuffled = SampleSet.from_array(draws[rng.permutation(draws.shape[0])])
        again = structure.learn_hierarchy(shuffled, leaf_cap=2)
        assert again.canonical() == base.canonical()
        assert again.node_values == base.node_values


def test_recovery_improves_with_samples():
    sizes = (200, 1000, 5000)
    models = [strongly_connected(100 + s) for s in range(10)]
    medians = []
    for m in sizes:
        rates = []
        for rep in range(3):
            rng = np.random.default_rng(1000 * rep + m)
            hits = 0
            for model, A in models:
                T = structure.estimate_triplet_mi(synth.draw_samples(model, m, rng))
                hits += structure.exhaustive_partition(T, 3).a_items == A
            rates.append(hits / len(models))
        medians.append(float(np.median(rates)))
    assert all(a <= b for a, b in zip(medians, medians[1:]))
    assert medians[-1] == 1.0


def test_split_objective_agrees_with_likelihood():
    rng = np.random.default_rng(8)
    m, f, g, part = random_split_model(rng, 6, (1, 4))
    h = riffle.to_dense(riffle.join(m, f, g, part))
    T = structure.estimate_triplet_mi(h)
    subsets = list(itertools.combinations(range(6), 2))
    cross = np.array([structure.objective_cross(T, a) for a in subsets])
    loglik = []
    for a in subsets:
        p = perm.ItemPartition(a, 6)
        fitted = riffle.to_dense(riffle.join(*riffle.riffle_split_mle(h, p), p))
        with np.errstate(divide="ignore"):
            loglik.append(float(np.sum(np.where(h.probs > 0, h.probs * np.log(fitted.probs), 0.0))))
    best = subsets[int(np.argmin(cross))]
    assert best == (1, 4)
    assert loglik[subsets.index(best)] == pytest.approx(max(loglik), abs=1e-12)


SPLIT_RIGHT = tree.split(tree.leaf((0, 1)), tree.split(tree.leaf((2, 3)), tree.leaf((4, 5))))
SPLIT_LEFT = tree.split(tree.split(tree.leaf((0, 1)), tree.leaf((2, 3))), tree.leaf((4, 5)))


def test_structure_agreement():
    for measure in structure.MEASURES:
        assert structure.structure_agreement(SPLIT_RIGHT, SPLIT_RIGHT, measure)
    assert not structure.structure_agreement(SPLIT_RIGHT, SPLIT_LEFT, "exact")
    assert structure.structure_agreement(SPLIT_RIGHT, SPLIT_LEFT, "leaf_sets")
    assert not structure.structure_agreement(SPLIT_RIGHT, SPLIT_LEFT, "topmost")
    swapped = tree.split(tree.split(tree.leaf((4, 5)), tree.leaf((2, 3))), tree.leaf((0, 1)))
    assert structure.structure_agreement(SPLIT_RIGHT, swapped, "exact")
    with pytest.raises(ValueError):
        structure.structure_agreement(SPLIT_RIGHT, SPLIT_RIGHT, "nope")


def test_bootstrap_degenerate_resample():
    rng = np.random.default_rng(9)
    model, _ = apa_like_model(rng)
    samples = synth.draw_samples(model, 600, rng)
    report = structure.bootstrap_stability(samples, 1, [samples.total], np.random.default_rng(0), replace=False, leaf_cap=2)
    assert report.fractions[samples.total] == {"exact": 1.0, "topmost": 1.0, "leaf_sets": 1.0}


def test_bootstrap_leaf_sets_dominate_exact():
    rng = np.random.default_rng(10)
    shape = tree.chain([[int(v)] for v in rng.permutation(6)], leaf_cap=2)
    model = riffle.model_from_structure(shape, rng, 1.0)
    samples = synth.draw_samples(model, 2000, rng)
    report = structure.bootstrap_stability(
        samples, 10, [100, 400], np.random.default_rng(1), reference=shape, mode="thin", k=1, leaf_cap=2
    )
    for size in (100, 400):
        assert report.fractions[size]["leaf_sets"] >= report.fractions[size]["exact"]
    again = structure.bootstrap_stability(
        samples, 10, [100, 400], np.random.default_rng(1), reference=shape, mode="thin", k=1, leaf_cap=2
    )
    assert again.rows() == report.rows()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 4))
def test_exhaustive_is_global_minimum(seed, k):
    rng = np.random.default_rng(seed)
    T = structure.estimate_triplet_mi(dense.random_distribution(5, rng))
    res = structure.exhaustive_partition(T, k)
    values = {a: structure.objective_cross(T, a) for a in itertools.combinations(range(5), k)}
    assert len(res.a_items) == k
    assert res.value == pytest.approx(min(values.values()), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_triplet_mi_nonnegative_and_symmetric_in_pair(seed):
    T = structure.estimate_triplet_mi(dense.random_distribution(4, np.random.default_rng(seed)))
    assert np.all(T.values >= 0)
    # [j ahead of k] and [k ahead of j] carry the same information
    assert np.allclose(T.values, np.transpose(T.values, (0, 2, 1)), atol=1e-12)


def test_warning_free_default_paths():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        structure.learn_hierarchy(dense.uniform(4), leaf_cap=1)
