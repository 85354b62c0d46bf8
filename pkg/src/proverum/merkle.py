"""Binary Merkle trees over 32-byte commitments.

Leaves are the commitments themselves, an interior node is
``sha256(left || right)``, and an odd level is padded by duplicating its last
node. The empty tree has a fixed constant root.
"""

from __future__ import annotations

from typing import Sequence

from .encoding import sha256

EMPTY_ROOT = sha256(b"PROVERUM-EMPTY")
LEFT = "L"
RIGHT = "R"


def list_digest(commitments: Sequence[bytes]) -> bytes:
    return sha256(b"".join(commitments))


def _parent(left: bytes, right: bytes) -> bytes:
    return sha256(left + right)


def merkle_levels(leaves: Sequence[bytes]) -> list[list[bytes]]:
    if not leaves:
        return [[EMPTY_ROOT]]
    levels = [list(leaves)]
    while len(levels[-1]) > 1:
        level = levels[-1]
        if len(level) % 2:
            level = level + [level[-1]]
        levels.append([_parent(level[i], level[i + 1]) for i in range(0, len(level), 2)])
    return levels


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    return merkle_levels(leaves)[-1][0]


def merkle_path(leaves: Sequence[bytes], index: int) -> list[tuple[bytes, str]]:
    """Audit path for ``leaves[index]`` as ``(sibling, side-of-sibling)`` pairs, leaf upwards."""
    if not 0 <= index < len(leaves):
        raise IndexError(index)
    path = []
    for level in merkle_levels(leaves)[:-1]:
        if len(level) % 2:
            level = level + [level[-1]]
        if index % 2:
            path.append((level[index - 1], LEFT))
        else:
            path.append((level[index + 1], RIGHT))
        index //= 2
    return path


def fold_path(leaf: bytes, path: Sequence[tuple[bytes, str]]) -> bytes:
    node = leaf
    for sibling, side in path:
        if side == LEFT:
            node = _parent(sibling, node)
        elif side == RIGHT:
            node = _parent(node, sibling)
        else:
            raise ValueError(f"bad side {side!r}")
    return node
