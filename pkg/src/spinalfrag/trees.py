"""Fragmentation trees: the nested-block representation of leaf-labelled
rooted trees with no single-child vertices.

A tree is stored as its root block plus child subtrees in least-element
order, so structurally equal trees are equal as values and hash alike.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ValidationError
from .partitions import HIERARCHY_CAP, _check_cap, iter_set_partitions


@dataclass(frozen=True)
class FragTree:
    block: tuple[int, ...]
    children: tuple["FragTree", ...] = ()

    @classmethod
    def leaf(cls, label: int) -> "FragTree":
        return cls((int(label),))

    @classmethod
    def node(cls, children: Iterable["FragTree"]) -> "FragTree":
        kids = sorted(children, key=lambda t: t.block[0])
        block = tuple(sorted(x for t in kids for x in t.block))
        return cls(block, tuple(kids))

    @property
    def n(self) -> int:
        return len(self.block)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def validate(self) -> "FragTree":
        if not self.block:
            raise ValidationError("empty block")
        if list(self.block) != sorted(set(self.block)):
            raise ValidationError(f"block {self.block} not sorted or has repeats")
        if len(self.block) == 1:
            if self.children:
                raise ValidationError("singleton block with children")
            return self
        if len(self.children) < 2:
            raise ValidationError(f"block {self.block} needs at least two children")
        union = [x for c in self.children for x in c.block]
        if sorted(union) != list(self.block):
            raise ValidationError(f"children of {self.block} do not partition it")
        firsts = [c.block[0] for c in self.children]
        if firsts != sorted(firsts):
            raise ValidationError("children not in least-element order")
        for c in self.children:
            c.validate()
        return self

    def internal_nodes(self) -> Iterator["FragTree"]:
        if self.children:
            yield self
            for c in self.children:
                yield from c.internal_nodes()

    def blocks(self) -> Iterator[tuple[int, ...]]:
        yield self.block
        for c in self.children:
            yield from c.blocks()

    def relabel(self, mapping) -> "FragTree":
        if self.is_leaf:
            return FragTree.leaf(mapping[self.block[0]])
        return FragTree.node(c.relabel(mapping) for c in self.children)

    def standardize(self) -> "FragTree":
        """Relabel by rank onto 1..n."""
        return self.relabel({x: i for i, x in enumerate(self.block, start=1)})

    def to_json(self) -> dict:
        return {"block": list(self.block), "children": [c.to_json() for c in self.children]}

    @classmethod
    def from_json(cls, data) -> "FragTree":
        if not isinstance(data, dict) or "block" not in data:
            raise ValidationError("tree JSON must be an object with a 'block' field")
        kids = [cls.from_json(c) for c in data.get("children", [])]
        block = tuple(int(x) for x in data["block"])
        if kids:
            t = cls.node(kids)
            if t.block != tuple(sorted(block)):
                raise ValidationError(f"children do not cover block {block}")
        else:
            t = cls(tuple(sorted(block)))
        return t.validate()

    def key(self) -> str:
        """Compact canonical serialisation, e.g. ``((1,2),3)``."""
        if self.is_leaf:
            return str(self.block[0])
        return "(" + ",".join(c.key() for c in self.children) + ")"

    def __str__(self) -> str:
        return self.key()


def parse_key(text: str) -> FragTree:
    """Inverse of :meth:`FragTree.key`."""
    data = json.loads(text.replace("(", "[").replace(")", "]"))

    def build(x):
        if isinstance(x, int):
            return FragTree.leaf(x)
        return FragTree.node(build(y) for y in x)

    return build(data).validate()


def star(labels: Sequence[int]) -> FragTree:
    return FragTree.node(FragTree.leaf(x) for x in labels)


def caterpillar(n: int) -> FragTree:
    """[n] -> ({n}, [n-1]) -> ... down to the cherry {1,2}."""
    t = FragTree.leaf(1)
    for j in range(2, n + 1):
        t = FragTree.node([t, FragTree.leaf(j)])
    return t


@lru_cache(maxsize=None)
def hierarchies_of(labels: tuple[int, ...]) -> tuple[FragTree, ...]:
    if len(labels) == 1:
        return (FragTree.leaf(labels[0]),)
    out = []
    for p in iter_set_partitions(list(labels)):
        if len(p) < 2:
            continue
        for kids in product(*(hierarchies_of(tuple(sorted(b))) for b in p)):
            out.append(FragTree.node(kids))
    return tuple(out)


def tree_probability(law, t: FragTree) -> float:
    """Product over internal vertices of the split probability of the child sizes."""
    p = 1.0
    for v in t.internal_nodes():
        p *= law.split_prob([c.n for c in v.children])
        if p == 0.0:
            break
    return p


def shape_distribution(law, n: int, cap: int = HIERARCHY_CAP) -> dict[FragTree, float]:
    """Exact law of T_[n] over all labelled hierarchies of [n]."""
    _check_cap(n, cap, "shape_distribution")
    return {t: tree_probability(law, t) for t in hierarchies_of(tuple(range(1, n + 1)))}


def sample_tree(law, n: int, rng: np.random.Generator) -> FragTree:
    return sample_tree_on(law, tuple(range(1, n + 1)), rng)


def sample_tree_on(law, labels: Sequence[int], rng: np.random.Generator) -> FragTree:
    if len(labels) < 1:
        raise ValidationError("need at least one label")
    if len(labels) == 1:
        return FragTree.leaf(labels[0])
    blocks = law.sample_split(list(labels), rng)
    return FragTree.node(sample_tree_on(law, tuple(sorted(b)), rng) for b in blocks)


def reduce(t: FragTree, labels: Iterable[int]) -> FragTree:
    """Restriction of t to a label subset, suppressing single-child vertices."""
    a = frozenset(labels)
    if not a:
        raise ValidationError("restriction set is empty")
    if not a <= set(t.block):
        raise ValidationError(f"labels {sorted(a - set(t.block))} are not leaves of the tree")
    return _reduce(t, a)


def _reduce(t: FragTree, a: frozenset) -> FragTree:
    if t.is_leaf:
        return t
    kids = [_reduce(c, a) for c in t.children if a.intersection(c.block)]
    if len(kids) == 1:
        return kids[0]
    return FragTree.node(kids)


def reroot(t: FragTree) -> FragTree:
    """Swap the planting root with leaf 1 and re-plant.

    The planted tree is read as an unrooted tree on {0} u [n] (0 = root); the
    labels 0 and 1 are exchanged and the tree is re-planted at the new 0.
    Involution by construction.
    """
    t.validate()
    if t.n < 2:
        raise ValidationError("re-rooting needs at least two leaves")
    if 1 not in t.block:
        raise ValidationError("re-rooting needs leaf 1")
    # undirected adjacency over vertex ids; leaves keep their label, internal ids are negative
    adj: dict[int, list[int]] = {0: []}
    counter = [0]

    def visit(node: FragTree, parent: int) -> None:
        if node.is_leaf:
            vid = node.block[0]
        else:
            counter[0] -= 1
            vid = counter[0]
        adj.setdefault(vid, []).append(parent)
        adj[parent].append(vid)
        for c in node.children:
            visit(c, vid)

    visit(t, 0)
    # new planting vertex is the old leaf 1; old root 0 becomes leaf 1
    start = adj[1][0]

    def build(v: int, came_from: int) -> FragTree:
        if v >= 0:
            return FragTree.leaf(1 if v == 0 else v)
        return FragTree.node(build(w, v) for w in adj[v] if w != came_from)

    return build(start, 1)


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def pushforward(dist: dict, fn) -> dict:
    out: dict = {}
    for x, p in dist.items():
        y = fn(x)
        out[y] = out.get(y, 0.0) + p
    return out
