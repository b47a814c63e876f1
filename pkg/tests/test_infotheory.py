import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from webroutine.infotheory import (
    EmptyTrajectoryError,
    InsufficientLengthError,
    block_entropy,
    entropy_profile,
    lz_entropy_rate,
    match_lengths,
    match_lengths_naive,
    prefix_lambda_sums,
    random_entropy,
    uncorrelated_entropy,
)
from webroutine.synth import MarkovModel, markov_entropy_rate, markov_generate
from webroutine.trajectory import BinningConfig, build_stationary

# frozen from a 40-digit mpmath evaluation of -2(8/17)log2(8/17) - (1/17)log2(1/17)
TOY_STAT_UNC = 1.2639334294856335


def test_random_entropy():
    assert random_entropy([5]) == 0.0
    assert random_entropy(list(range(8))) == 3.0
    assert random_entropy("ABCABC") == pytest.approx(math.log2(3), abs=1e-15)


def test_empty_profile_is_an_error():
    for fn in (random_entropy, uncorrelated_entropy, entropy_profile):
        with pytest.raises(EmptyTrajectoryError):
            fn([])


def test_uncorrelated_entropy_examples(toy_events):
    assert uncorrelated_entropy("AAAA") == 0.0
    assert uncorrelated_entropy("ABBA") == 1.0
    stat = build_stationary(toy_events, BinningConfig(60))
    assert uncorrelated_entropy(stat) == pytest.approx(TOY_STAT_UNC, abs=1e-12)


def test_block_entropy_examples():
    alt = "AB" * 50
    assert block_entropy(alt, 1) == 1.0
    assert block_entropy(alt, 2) == pytest.approx(1.0, abs=1e-3)
    assert block_entropy("AAAAAA", 3) == 0.0
    assert block_entropy("ABABC", 2) == 1.5
    assert block_entropy("ABABC", 0) == 0.0
    with pytest.raises(ValueError):
        block_entropy("ABC", 4)


def test_block_entropy_one_equals_shannon():
    seq = markov_generate(MarkovModel.from_rows([[0.2, 0.8], [0.6, 0.4]]), 500, 1)
    assert block_entropy(seq, 1) == uncorrelated_entropy(seq)


@pytest.mark.parametrize(
    "seq, expected",
    [("AAAA", [1, 2, 3, 2]), ("ABABC", [1, 1, 3, 2, 1]), ("ABCDEFG", [1] * 7), ("A", [1])],
)
def test_match_length_examples(seq, expected):
    assert match_lengths(seq).tolist() == expected
    assert match_lengths_naive(seq).tolist() == expected


def test_lz_rate_small_example():
    # sum of match lengths 8 for ABABC
    assert lz_entropy_rate("ABABC") == pytest.approx(5 * math.log2(5) / 8, abs=1e-15)
    with pytest.raises(InsufficientLengthError):
        lz_entropy_rate("A")


def test_lz_rate_iid_uniform():
    seq = np.random.default_rng(12).integers(0, 4, 100_000)
    assert abs(lz_entropy_rate(seq) - 2.0) <= 0.1


def test_alternating_sequence_is_predictable():
    seq = [0, 1] * 5000
    assert lz_entropy_rate(seq) < 0.05
    assert uncorrelated_entropy(seq) == 1.0


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=80))
def test_match_lengths_match_naive(seq):
    fast = match_lengths(seq)
    assert fast.tolist() == match_lengths_naive(seq).tolist()
    n = len(seq)
    assert fast[0] == 1
    assert all(1 <= fast[i] <= n - i + 1 for i in range(n))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=60))
def test_prefix_sums_equal_recomputation(seq):
    sums = prefix_lambda_sums(match_lengths(seq))
    assert sums.tolist() == [int(match_lengths(seq[:m]).sum()) for m in range(1, len(seq) + 1)]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=2, max_size=100), st.permutations(range(6)))
def test_relabeling_invariance(seq, perm):
    relabeled = [perm[s] for s in seq]
    a, b = entropy_profile(seq), entropy_profile(relabeled)
    assert a == b
    for L in range(1, min(len(seq), 5) + 1):
        assert block_entropy(seq, L) == block_entropy(relabeled, L)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=100))
def test_shannon_bounded_by_random(seq):
    s_unc, s_rand = uncorrelated_entropy(seq), random_entropy(seq)
    assert 0.0 <= s_unc <= s_rand + 1e-12
    counts = np.bincount(seq)
    counts = counts[counts > 0]
    if np.all(counts == counts[0]):
        assert s_unc == pytest.approx(s_rand, abs=1e-12)
    else:
        assert s_unc < s_rand


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_block_entropy_rate_nonincreasing(seed):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(3), size=3)
    seq = markov_generate(MarkovModel.from_rows(P), 2000, seed)
    per_symbol = [block_entropy(seq, L) / L for L in range(1, 6)]
    assert all(b <= a + 1e-12 for a, b in zip(per_symbol, per_symbol[1:]))


MODELS = [
    [[0.9, 0.1], [0.1, 0.9]],
    [[0.7, 0.3], [0.4, 0.6]],
    [[0.05, 0.9, 0.05], [0.05, 0.05, 0.9], [0.9, 0.05, 0.05]],
    [[0.6, 0.3, 0.1, 0.0], [0.0, 0.6, 0.3, 0.1], [0.1, 0.0, 0.6, 0.3], [0.3, 0.1, 0.0, 0.6]],
    np.random.default_rng(5).dirichlet(np.full(6, 0.5), size=6).tolist(),
]


@pytest.mark.parametrize("rows", MODELS)
def test_estimator_consistency_on_markov_sources(rows):
    model = MarkovModel.from_rows(rows)
    seq = markov_generate(model, 100_000, 99)
    assert abs(lz_entropy_rate(seq) - markov_entropy_rate(model)) <= 0.05


def test_match_lengths_scale_linearly():
    seq = np.random.default_rng(0).integers(0, 3, 100_000)
    start = time.perf_counter()
    match_lengths(seq)
    assert time.perf_counter() - start < 10
