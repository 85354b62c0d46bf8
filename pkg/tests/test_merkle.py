import hashlib
import itertools

import pytest
from hypothesis import given, strategies as st

from proverum.merkle import EMPTY_ROOT, LEFT, RIGHT, fold_path, list_digest, merkle_path, merkle_root


def h(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


LEAVES = [h(bytes([i])) for i in range(4)]


def test_four_leaf_root_by_hand():
    a, b, c, d = LEAVES
    assert merkle_root(LEAVES) == h(h(a + b) + h(c + d))


def test_odd_level_duplicates_last_node():
    a, b, c = LEAVES[:3]
    assert merkle_root([a, b, c]) == h(h(a + b) + h(c + c))


def test_single_and_empty():
    assert merkle_root([LEAVES[0]]) == LEAVES[0]
    assert merkle_root([]) == EMPTY_ROOT == h(b"PROVERUM-EMPTY")


def test_list_digest_is_plain_concatenation():
    assert list_digest(LEAVES) == h(b"".join(LEAVES))


def test_path_shape_for_leaf_two():
    a, b, c, d = LEAVES
    assert merkle_path(LEAVES, 2) == [(d, RIGHT), (h(a + b), LEFT)]


def test_path_index_out_of_range():
    with pytest.raises(IndexError):
        merkle_path(LEAVES, 4)


def test_every_corruption_of_every_path_fails():
    root = merkle_root(LEAVES)
    for i, leaf in enumerate(LEAVES):
        path = merkle_path(LEAVES, i)
        assert fold_path(leaf, path) == root
        for j, (sibling, side) in enumerate(path):
            flipped = list(path)
            flipped[j] = (sibling, LEFT if side == RIGHT else RIGHT)
            assert fold_path(leaf, flipped) != root
            for pos, bit in itertools.product(range(len(sibling)), range(8)):
                bad = bytearray(sibling)
                bad[pos] ^= 1 << bit
                broken = list(path)
                broken[j] = (bytes(bad), side)
                assert fold_path(leaf, broken) != root


@given(st.lists(st.binary(min_size=32, max_size=32), min_size=1, max_size=17), st.data())
def test_paths_fold_to_root(leaves, data):
    index = data.draw(st.integers(0, len(leaves) - 1))
    assert fold_path(leaves[index], merkle_path(leaves, index)) == merkle_root(leaves)
