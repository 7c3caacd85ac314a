"""Binary trees over item sets (the shape of a hierarchical decomposition)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence


@dataclass(frozen=True)
class TreeNode:
    """A node covering ``items``; internal nodes have exactly two children.

    The first child plays the role of set A at that split.
    """

    items: tuple[int, ...]
    children: tuple["TreeNode", ...] = ()

    def __post_init__(self) -> None:
        items = tuple(sorted(int(v) for v in self.items))
        object.__setattr__(self, "items", items)
        if self.children:
            if len(self.children) != 2:
                raise ValueError("internal nodes need exactly two children")
            left, right = self.children
            if set(left.items) & set(right.items) or set(left.items) | set(right.items) != set(items):
                raise ValueError(f"children do not partition {items}")
            if not left.items or not right.items:
                raise ValueError("children must be nonempty")
        elif not items:
            raise ValueError("leaves must be nonempty")

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> list["TreeNode"]:
        if self.is_leaf:
            return [self]
        return self.children[0].leaves() + self.children[1].leaves()

    def leaf_sets(self) -> frozenset[tuple[int, ...]]:
        return frozenset(leaf.items for leaf in self.leaves())

    def canonical(self) -> Any:
        """Nested tuples with children ordered by their smallest item.

        A leaf is a tuple of ints; an internal node is a pair of canonical forms.
        """
        if self.is_leaf:
            return self.items
        kids = sorted(self.children, key=lambda c: c.items[0])
        return (kids[0].canonical(), kids[1].canonical())

    def top_split(self) -> frozenset[tuple[int, ...]] | None:
        if self.is_leaf:
            return None
        return frozenset(c.items for c in self.children)

    def describe(self, one_based: bool = True) -> str:
        off = 1 if one_based else 0
        if self.is_leaf:
            return "{" + ",".join(str(v + off) for v in self.items) + "}"
        kids = sorted(self.children, key=lambda c: c.items[0])
        parts = [k.describe(one_based) if k.is_leaf else "(" + k.describe(one_based) + ")" for k in kids]
        return " | ".join(parts)

    def to_json(self) -> Any:
        if self.is_leaf:
            return [v + 1 for v in self.items]
        return [self.children[0].to_json(), self.children[1].to_json()]

    @classmethod
    def from_json(cls, obj: Any) -> "TreeNode":
        """Inverse of :meth:`to_json`: a list of ints is a leaf, a pair of lists a split."""
        if not isinstance(obj, list) or not obj:
            raise ValueError(f"malformed tree node: {obj!r}")
        if all(isinstance(v, int) for v in obj):
            return cls(tuple(v - 1 for v in obj))
        if len(obj) != 2:
            raise ValueError(f"internal tree nodes need two children: {obj!r}")
        left, right = cls.from_json(obj[0]), cls.from_json(obj[1])
        return cls(left.items + right.items, (left, right))


def leaf(items: Sequence[int]) -> TreeNode:
    return TreeNode(tuple(items))


def split(left: TreeNode, right: TreeNode) -> TreeNode:
    return TreeNode(left.items + right.items, (left, right))


def chain(groups: Sequence[Sequence[int]], leaf_cap: int = 1) -> TreeNode:
    """Thin chain peeling ``groups[0]``, then ``groups[1]``, ... off the remaining items.

    Once the remaining items number at most ``max(leaf_cap, len(next group))``
    they form a single leaf.
    """
    groups = [tuple(g) for g in groups]
    if not groups:
        raise ValueError("a chain needs at least one group")
    rest = tuple(v for g in groups for v in g)
    if len(groups) == 1 or len(rest) <= leaf_cap:
        return leaf(rest)
    return split(leaf(groups[0]), chain(groups[1:], leaf_cap))


def balanced(items: Sequence[int], leaf_cap: int = 1) -> TreeNode:
    """Split items in half recursively (first half is the A side)."""
    items = tuple(items)
    if len(items) <= max(leaf_cap, 1):
        return leaf(items)
    half = len(items) // 2
    return split(balanced(items[:half], leaf_cap), balanced(items[half:], leaf_cap))
