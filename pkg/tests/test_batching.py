import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlproj.batching import balanced_batches, read_batchset, write_batchset
from rlproj.errors import ConfigError, ExhaustionError


def canonical(batch):
    return tuple(sorted(int(i) for i in batch))


def test_single_possible_batch():
    bs = balanced_batches(1, 1, 1, seed=0)
    assert [b.tolist() for b in bs] == [[0]]


def test_first_pass_disjoint_pairs():
    # one shuffle of 4 indices sliced in strides of 2 gives two disjoint pairs
    for seed in range(10):
        bs = balanced_batches(4, 2, 2, seed=seed)
        sets = [set(b.tolist()) for b in bs]
        assert sets[0].isdisjoint(sets[1])
        assert sets[0] | sets[1] == {0, 1, 2, 3}


def test_exhaustion_when_infeasible():
    with pytest.raises(ExhaustionError):
        balanced_batches(3, 2, 4, seed=0)


def test_feasible_exact_subset_count():
    # exactly C(3, 2) = 3 distinct pairs exist and can all be found
    bs = balanced_batches(3, 2, 3, seed=1)
    assert len({canonical(b) for b in bs}) == 3


def test_invalid_args():
    with pytest.raises(ConfigError):
        balanced_batches(3, 4, 1, seed=0)
    with pytest.raises(ConfigError):
        balanced_batches(3, 0, 1, seed=0)
    with pytest.raises(ConfigError):
        balanced_batches(3, 2, 0, seed=0)


def test_determinism():
    a = balanced_batches(50, 7, 30, seed=3)
    b = balanced_batches(50, 7, 30, seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    c = balanced_batches(50, 7, 30, seed=4)
    assert any(not np.array_equal(x, y) for x, y in zip(a, c))


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_contract_random_triples(data):
    n = data.draw(st.integers(2, 30))
    M = data.draw(st.integers(1, n))
    max_k = min(30, math.comb(n, M))
    K = data.draw(st.integers(1, max_k))
    seed = data.draw(st.integers(0, 1000))
    bs = balanced_batches(n, M, K, seed=seed)
    assert len(bs) == K
    keys = {canonical(b) for b in bs}
    assert len(keys) == K  # pairwise set-distinct
    for b in bs:
        assert len(set(b.tolist())) == M
        assert all(0 <= i < n for i in b.tolist())
    if K >= math.ceil(n / M):
        assert (bs.coverage() > 0).all()


def test_batchset_dump_roundtrip(tmp_path):
    bs = balanced_batches(12, 5, 6, seed=9)
    path = tmp_path / "batches.txt"
    write_batchset(path, bs)
    rows = read_batchset(path)
    assert len(rows) == 6
    assert all(np.array_equal(a, b) for a, b in zip(rows, bs))
