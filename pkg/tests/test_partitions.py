import math
from functools import lru_cache

import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinalfrag.errors import CapacityError, ValidationError
from spinalfrag.partitions import (
    MassPartition,
    OrderedPartition,
    SetPartition,
    bell,
    canonicalize,
    enumerate_compositions,
    enumerate_hierarchies,
    enumerate_partitions,
    hierarchy_count,
    integer_partitions,
    refines,
    restrict,
    set_partition_count,
)


def brute_bell(n):
    # Bell triangle, independent of the enumeration code
    row = [1]
    for _ in range(n - 1):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[-1]


def brute_hierarchies(n):
    # trees on [n] by first split: choose the block of label 1, recurse on the rest as a forest
    @lru_cache(maxsize=None)
    def forest(m):
        # forests of >= 1 trees on m labelled points
        if m == 0:
            return 1
        return sum(math.comb(m - 1, k - 1) * tree(k) * forest(m - k) for k in range(1, m + 1))

    @lru_cache(maxsize=None)
    def tree(m):
        if m == 1:
            return 1
        # a root split is a forest with >= 2 trees: label 1's tree misses some label
        return sum(math.comb(m - 1, k - 1) * tree(k) * forest(m - k) for k in range(1, m))

    return tree(n)


def test_canonicalize_sorts_blocks():
    p = canonicalize([{3, 7, 8}, {2}, {1}])
    assert p.blocks == ((1,), (2,), (3, 7, 8))


def test_canonicalize_figure_labels():
    p = canonicalize([{2, 4, 5, 6, 9}, {3, 7, 8}, {1}])
    assert p.blocks == ((1,), (2, 4, 5, 6, 9), (3, 7, 8))


def test_canonicalize_single_block():
    p = canonicalize([range(1, 6)])
    assert canonicalize(p.blocks) == p


@pytest.mark.parametrize("bad", [[[1, 2], [2, 3]], [[1], []], []])
def test_canonicalize_rejects(bad):
    with pytest.raises(ValidationError):
        canonicalize(bad)


def test_restrict_examples():
    assert restrict(canonicalize([[1], [2, 4, 5], [3]]), {1, 2, 3}).blocks == ((1,), (2,), (3,))
    assert restrict(canonicalize([[1, 3], [2, 4]]), {1, 2}).blocks == ((1,), (2,))
    with pytest.raises(ValidationError):
        restrict(canonicalize([[1, 2]]), {3})


def test_refines_examples():
    fine = canonicalize([[1], [2], [3, 7, 8], [4], [5, 6, 9]])
    coarse = canonicalize([[1], [2, 4, 5, 6, 9], [3, 7, 8]])
    assert refines(fine, coarse)
    assert refines(fine, fine)
    assert not refines(canonicalize([[1, 2], [3]]), canonicalize([[1, 3], [2]]))


@pytest.mark.parametrize("n", range(1, 8))
def test_partition_count_is_bell(n):
    parts = enumerate_partitions(n)
    assert len(parts) == brute_bell(n) == bell(n)
    assert len(set(parts)) == len(parts)


def test_partition_cap():
    with pytest.raises(CapacityError):
        enumerate_partitions(11)


def test_compositions():
    assert enumerate_compositions(1) == [(1,)]
    assert enumerate_compositions(2) == [(2,), (1, 1)]
    assert len(enumerate_compositions(3)) == 4
    assert all(len(enumerate_compositions(n)) == 2 ** (n - 1) for n in range(1, 12))


@pytest.mark.parametrize("n,count", [(1, 1), (2, 1), (3, 4), (4, 26), (5, 236)])
def test_hierarchy_counts(n, count):
    assert brute_hierarchies(n) == count
    assert hierarchy_count(n) == count
    trees = enumerate_hierarchies(n)
    assert len(trees) == len(set(trees)) == count


def test_set_partition_count_sums_to_bell():
    for n in range(1, 9):
        assert sum(set_partition_count(k) for k in integer_partitions(n)) == brute_bell(n)


def test_ordered_partition():
    op = OrderedPartition.of([[5, 2], [3], [1]])
    assert op.blocks == ((2, 5), (3,), (1,))
    assert op.sizes() == (2, 1, 1)
    assert op.unordered().blocks == ((1,), (2, 5), (3,))
    with pytest.raises(ValidationError):
        OrderedPartition.of([[1, 2], [2]])


def test_mass_partition():
    m = MassPartition.from_values([0.1, 0.5, 0.2])
    assert m.freqs == (0.5, 0.2, 0.1)
    assert m.dust == pytest.approx(0.2)
    with pytest.raises(ValidationError):
        MassPartition((0.2, 0.5))
    with pytest.raises(ValidationError):
        MassPartition((0.7, 0.6))


labelled_blocks = st.lists(st.integers(0, 4), min_size=1, max_size=9).map(
    lambda colours: [[i + 1 for i, c in enumerate(colours) if c == k] for k in set(colours)]
)


@given(labelled_blocks)
def test_canonicalize_idempotent_and_json(blocks):
    p = canonicalize(blocks)
    assert canonicalize(p.blocks) == p
    assert SetPartition.from_json(p.to_json()) == p
    assert restrict(p, p.ground) == p


@given(labelled_blocks, st.data())
def test_restriction_preserves_refinement(blocks, data):
    p = canonicalize(blocks)
    coarse = canonicalize([[x for b in p.blocks[:2] for x in b]] + [list(b) for b in p.blocks[2:]])
    assert refines(p, coarse)
    ground = sorted(p.ground)
    sub = data.draw(st.lists(st.sampled_from(ground), min_size=1, unique=True))
    assert refines(restrict(p, sub), restrict(coarse, sub))
