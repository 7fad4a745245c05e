"""Per-token syntactic ancestor sets and depths over dependency trees."""

from __future__ import annotations

from dataclasses import dataclass

from .conllu import DependencyTree


@dataclass(frozen=True)
class TreeStats:
    """Batch ancestor sets and depths for one tree, indexed by token position.

    ``ancestors[i - 1]`` is the set of 1-based indices on the head chain from
    token i's parent up to its root; ``depths[i - 1]`` is 1 + chain length,
    so a root has depth 1.
    """

    ancestors: tuple[frozenset[int], ...]
    depths: tuple[int, ...]


def ancestors(tree: DependencyTree, index: int) -> frozenset[int]:
    """All tokens on the head chain from token ``index``'s parent to its root."""
    tree.token(index)  # range check
    chain = set()
    head = tree.tokens[index - 1].head
    while head != 0:
        chain.add(head)
        head = tree.tokens[head - 1].head
    return frozenset(chain)


def depth(tree: DependencyTree, index: int) -> int:
    """1-based distance from token ``index`` to its root (root depth = 1)."""
    return 1 + len(ancestors(tree, index))


def tree_stats(tree: DependencyTree) -> TreeStats:
    """Ancestors and depths for every token, memoized so each head link is walked once."""
    n = len(tree)
    anc: list[frozenset[int] | None] = [None] * (n + 1)

    def resolve(i: int) -> frozenset[int]:
        # Walk up until a memoized node or a root, then fill the path back down.
        path = []
        while anc[i] is None:
            path.append(i)
            head = tree.tokens[i - 1].head
            if head == 0:
                anc[i] = frozenset()
                break
            i = head
        for j in reversed(path):
            head = tree.tokens[j - 1].head
            if head != 0:
                anc[j] = anc[head] | {head}
        return anc[path[0]] if path else anc[i]

    for i in range(1, n + 1):
        resolve(i)
    sets = tuple(anc[i] for i in range(1, n + 1))
    return TreeStats(ancestors=sets, depths=tuple(1 + len(s) for s in sets))
