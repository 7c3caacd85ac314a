import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riffled import dense, perm, riffle
from riffled.dense import DenseDistribution, SampleSet

from conftest import random_split_model


def brute_kth(h, k):
    """Marginal table built straight from the definition."""
    tuples = list(itertools.permutations(range(h.n), k))
    out = np.zeros((len(tuples), len(tuples)))
    for s, p in zip(perm.enumerate_sn(h.n), h.probs):
        for a, ranks in enumerate(tuples):
            for b, items in enumerate(tuples):
                if all(s[i] == r for r, i in zip(ranks, items)):
                    out[a, b] += p
    return out


def test_normalization_checked():
    with pytest.raises(ValueError):
        DenseDistribution(3, [0.5] * 6)
    with pytest.raises(ValueError):
        DenseDistribution(3, [0.1] * 5)
    h = DenseDistribution(3, [1, 0, 0, 0, 0, 1], normalized=False)
    assert not h.normalized
    assert dense.normalize(3, h.probs).prob((2, 1, 0)) == 0.5


def test_from_samples():
    s0 = (2, 0, 1, 3)
    h = dense.from_samples(SampleSet.from_rankings(4, [s0]))
    assert h.prob(s0) == 1.0 and h.mode() == s0
    u = dense.from_samples(SampleSet.from_rankings(3, perm.enumerate_sn(3)))
    assert np.allclose(u.probs, 1 / 6)
    sm = dense.from_samples(SampleSet.from_rankings(3, [(0, 1, 2)]), smoothing=1.0)
    assert np.isclose(sm.prob((0, 1, 2)), 2 / 7)


def test_divergences():
    rng = np.random.default_rng(0)
    h = dense.random_distribution(4, rng)
    assert dense.kl_divergence(h, h) == 0.0
    assert np.isclose(dense.entropy(dense.uniform(4)), math.log(24))
    assert dense.tv_distance(h, h) == 0.0
    d = dense.delta(4, (0, 1, 2, 3))
    assert dense.kl_divergence(dense.uniform(4), d) == math.inf
    with pytest.raises(ValueError):
        dense.kl_divergence(h, dense.uniform(3))


def test_marginals_examples():
    assert np.allclose(dense.first_order_marginals(dense.uniform(5)), 0.2)
    s0 = (3, 0, 2, 1)
    table = dense.kth_order_marginals(dense.delta(4, s0), 2)
    for ranks in table.tuples:
        for items in table.tuples:
            expected = float(all(s0[i] == r for r, i in zip(ranks, items)))
            assert table.get(ranks, items) == expected


@pytest.mark.parametrize("k", [1, 2, 3])
def test_kth_marginals_match_brute(k):
    h = dense.random_distribution(4, np.random.default_rng(k))
    assert np.allclose(dense.kth_order_marginals(h, k).values, brute_kth(h, k), atol=1e-14)


def test_first_order_orientation():
    # rows are ranks, columns items
    h = dense.delta(3, (2, 0, 1))
    mat = dense.first_order_marginals(h)
    assert mat[2, 0] == 1 and mat[0, 1] == 1 and mat[1, 2] == 1


def test_sample_first_order_counts():
    samples = SampleSet.from_rankings(3, [(2, 0, 1), (0, 1, 2)], [3, 1])
    mat = dense.sample_first_order_counts(samples)
    assert mat.tolist() == [[1, 3, 0], [0, 1, 3], [3, 0, 1]]


def test_convolve_examples():
    rng = np.random.default_rng(1)
    h = dense.random_distribution(4, rng)
    assert np.allclose(dense.convolve(dense.delta(4, perm.identity(4)), h).probs, h.probs)
    t, s = (1, 3, 0, 2), (2, 0, 3, 1)
    out = dense.convolve(dense.delta(4, t), dense.delta(4, s))
    assert out.prob(perm.compose(t, s)) == 1.0


def test_convolve_against_definition():
    rng = np.random.default_rng(2)
    m, h = dense.random_distribution(4, rng), dense.random_distribution(4, rng)
    expected = np.zeros(24)
    for a, pa in zip(perm.enumerate_sn(4), m.probs):
        for b, pb in zip(perm.enumerate_sn(4), h.probs):
            expected[perm.rank_index(perm.compose(a, b))] += pa * pb
    assert np.allclose(dense.convolve(m, h).probs, expected, atol=1e-15)


def test_convolve_uniform_interleaving_gives_riffle_joint():
    rng = np.random.default_rng(3)
    part = perm.ItemPartition((0, 1), 6)
    f, g = dense.random_distribution(2, rng), dense.random_distribution(4, rng)
    m = riffle.uniform_interleaving(2, 4)
    stacked = np.zeros(720)
    for a, pa in zip(perm.enumerate_sn(2), f.probs):
        for b, pb in zip(perm.enumerate_sn(4), g.probs):
            stacked[perm.rank_index(a + tuple(v + 2 for v in b))] = pa * pb
    joint = dense.convolve(m.to_dense(), DenseDistribution(6, stacked))
    model = riffle.join(m, f, g, part)
    logp = riffle.log_prob_batch(model, perm.all_rankings(6))
    assert np.max(np.abs(joint.probs - np.exp(logp))) < 1e-12


def test_pointwise_condition():
    rng = np.random.default_rng(4)
    h = dense.random_distribution(4, rng)
    assert np.allclose(dense.pointwise_condition(h, np.ones(24)).probs, h.probs)
    post = dense.pointwise_condition(dense.uniform(4), dense.pairwise_likelihood(4, 0, 2))
    for s, p in zip(perm.enumerate_sn(4), post.probs):
        assert p == pytest.approx(1 / 12 if s[0] < s[2] else 0.0)
    with pytest.raises(ValueError, match="zero evidence"):
        dense.pointwise_condition(dense.delta(4, (1, 0, 2, 3)), dense.pairwise_likelihood(4, 0, 1))


def test_relative_marginal_and_reconstruction():
    h = dense.random_distribution(4, np.random.default_rng(5))
    rel = dense.relative_marginal(h, (1, 3))
    expected = sum(p for s, p in zip(perm.enumerate_sn(4), h.probs) if s[1] < s[3])
    assert rel.prob((0, 1)) == pytest.approx(expected)
    assert dense.pairwise_marginal(h, 1, 3) == pytest.approx(expected)


def test_sample_set_helpers():
    s = SampleSet.from_rankings(3, [(0, 1, 2), (2, 1, 0), (0, 1, 2)])
    assert s.total == 3 and s.rankings.shape == (2, 3) and s.counts.tolist() == [2, 1]
    assert SampleSet.from_array(s.expanded()).counts.tolist() == [2, 1]
    sub = s.restrict((0, 2))
    assert sub.total == 3 and dict(zip(map(tuple, sub.rankings.tolist()), sub.counts.tolist())) == {(0, 1): 2, (1, 0): 1}
    empty = SampleSet.from_array(np.zeros((0, 4), dtype=np.int64))
    assert empty.total == 0 and empty.n == 4
    with pytest.raises(ValueError):
        SampleSet.from_rankings(3, [(0, 0, 1)])


probs_4 = st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=24, max_size=24).filter(lambda v: sum(v) > 1e-3)


@settings(max_examples=60, deadline=None)
@given(values=probs_4, other=probs_4)
def test_mass_conservation(values, other):
    h = dense.normalize(4, np.array(values))
    m = dense.normalize(4, np.array(other))
    assert abs(dense.convolve(m, h).probs.sum() - 1) < 1e-12
    for k in (1, 2):
        table = dense.kth_order_marginals(h, k)
        assert abs(table.values.sum(axis=1) - 1).max() < 1e-12
    first = dense.first_order_marginals(h)
    assert np.allclose(first.sum(axis=0), 1, atol=1e-10) and np.allclose(first.sum(axis=1), 1, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(values=probs_4, i=st.integers(0, 3), j=st.integers(0, 3))
def test_pairwise_antisymmetry(values, i, j):
    if i == j:
        return
    h = dense.normalize(4, np.array(values))
    assert abs(dense.pairwise_marginal(h, i, j) + dense.pairwise_marginal(h, j, i) - 1) < 1e-15


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 5), seed=st.integers(0, 10_000))
def test_reconstruct_from_full_marginals(n, seed):
    h = dense.random_distribution(n, np.random.default_rng(seed))
    for k in {max(n - 1, 1), n}:
        rec = dense.from_marginal_table(dense.kth_order_marginals(h, k))
        assert np.max(np.abs(rec.probs - h.probs)) < 1e-12


def test_random_split_model_helper():
    m, f, g, part = random_split_model(np.random.default_rng(0), 5, (1, 3))
    assert (m.p, m.q, f.n, g.n) == (2, 3, 2, 3) and part.b_items == (0, 2, 4)
