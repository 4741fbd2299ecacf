"""Finite partitions, compositions and hierarchies of label sets.

Conventions used throughout the package:

* a composition is a plain tuple of positive ints, order significant;
* a :class:`SetPartition` keeps its blocks sorted by least element and the
  labels inside each block sorted, so equal partitions compare and hash equal;
* enumeration helpers refuse to run past a cap instead of truncating.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .errors import CapacityError, ValidationError

PARTITION_CAP = 10
COMPOSITION_CAP = 24
HIERARCHY_CAP = 6
MASS_TOL = 1e-12

Composition = tuple  # tuple[int, ...]


def composition(parts: Iterable[int]) -> tuple[int, ...]:
    """Validate and freeze a composition."""
    out = tuple(int(p) for p in parts)
    if any(p < 1 for p in out):
        raise ValidationError(f"composition parts must be >= 1, got {out}")
    return out


@dataclass(frozen=True)
class SetPartition:
    blocks: tuple[tuple[int, ...], ...]

    @property
    def ground(self) -> frozenset[int]:
        return frozenset(x for b in self.blocks for x in b)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(self.blocks)

    def to_json(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]

    @classmethod
    def from_json(cls, data: Sequence[Sequence[int]]) -> "SetPartition":
        return canonicalize(data)

    def __str__(self) -> str:
        return "{" + ", ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"


@dataclass(frozen=True)
class OrderedPartition:
    """Disjoint nonempty blocks whose order carries meaning (e.g. spinal order)."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for b in self.blocks:
            if not b:
                raise ValidationError("ordered partition has an empty block")
            if seen.intersection(b):
                raise ValidationError("ordered partition blocks overlap")
            seen.update(b)

    @classmethod
    def of(cls, blocks: Iterable[Iterable[int]]) -> "OrderedPartition":
        return cls(tuple(tuple(sorted(int(x) for x in b)) for b in blocks))

    def unordered(self) -> SetPartition:
        return canonicalize(self.blocks)

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def to_json(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]


@dataclass(frozen=True)
class MassPartition:
    """Ranked frequencies s_1 >= s_2 >= ... with the leftover mass as dust."""

    freqs: tuple[float, ...]
    dust: float = field(default=0.0)

    def __post_init__(self):
        f = self.freqs
        if any(x < 0 or x > 1 + MASS_TOL for x in f):
            raise ValidationError("frequencies must lie in [0, 1]")
        if any(a < b for a, b in zip(f, f[1:])):
            raise ValidationError("frequencies must be nonincreasing")
        if not 0 <= self.dust < 1 + MASS_TOL:
            raise ValidationError("dust must lie in [0, 1)")
        if math.fsum(f) + self.dust > 1 + MASS_TOL:
            raise ValidationError("frequencies plus dust exceed 1")

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "MassPartition":
        f = tuple(sorted((float(v) for v in values if v > 0), reverse=True))
        return cls(f, max(0.0, 1.0 - math.fsum(f)))


def canonicalize(blocks: Iterable[Iterable[int]]) -> SetPartition:
    """Return the least-element canonical form of a collection of blocks."""
    norm = []
    seen: set[int] = set()
    for b in blocks:
        blk = tuple(sorted({int(x) for x in b}))
        if not blk:
            raise ValidationError("partition has an empty block")
        if seen.intersection(blk):
            raise ValidationError("partition blocks overlap")
        seen.update(blk)
        norm.append(blk)
    if not norm:
        raise ValidationError("partition needs at least one block")
    norm.sort(key=lambda b: b[0])
    return SetPartition(tuple(norm))


def restrict(p: SetPartition, labels: Iterable[int]) -> SetPartition:
    a = frozenset(labels)
    if not a <= p.ground:
        raise ValidationError(f"restriction set {sorted(a - p.ground)} not in ground set")
    if not a:
        raise ValidationError("restriction set is empty")
    return canonicalize(tuple(x for x in b if x in a) for b in p.blocks if a.intersection(b))


def refines(fine: SetPartition, coarse: SetPartition) -> bool:
    if fine.ground != coarse.ground:
        raise ValidationError("partitions live on different ground sets")
    owner = {x: i for i, b in enumerate(coarse.blocks) for x in b}
    return all(len({owner[x] for x in b}) == 1 for b in fine.blocks)


def _check_cap(n: int, cap: int, what: str) -> None:
    if n < 1:
        raise ValidationError(f"{what}: n must be positive, got {n}")
    if n > cap:
        raise CapacityError(f"{what}: n={n} exceeds cap {cap}")


def iter_set_partitions(labels: Sequence[int]) -> Iterator[list[list[int]]]:
    """All set partitions of ``labels`` as lists of blocks (no validation)."""
    labels = list(labels)
    if not labels:
        yield []
        return
    first, rest = labels[0], labels[1:]
    for sub in iter_set_partitions(rest):
        yield [[first]] + sub
        for i in range(len(sub)):
            yield sub[:i] + [[first] + sub[i]] + sub[i + 1 :]


def enumerate_partitions(n: int, cap: int = PARTITION_CAP) -> list[SetPartition]:
    """Every set partition of [n], each in canonical form."""
    _check_cap(n, cap, "enumerate_partitions")
    return [canonicalize(p) for p in iter_set_partitions(range(1, n + 1))]


def iter_compositions(n: int) -> Iterator[tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    for first in range(n, 0, -1):
        for rest in iter_compositions(n - first):
            yield (first,) + rest


def enumerate_compositions(n: int, cap: int = COMPOSITION_CAP) -> list[tuple[int, ...]]:
    _check_cap(n, cap, "enumerate_compositions")
    return list(iter_compositions(n))


def integer_partitions(n: int, largest: int | None = None) -> Iterator[tuple[int, ...]]:
    """Nonincreasing tuples of positive ints summing to n."""
    if largest is None:
        largest = n
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in integer_partitions(n - first, first):
            yield (first,) + rest


def set_partition_count(sizes: Sequence[int]) -> int:
    """Number of set partitions of an n-set whose block sizes form ``sizes``."""
    n = sum(sizes)
    out = math.factorial(n)
    for s in sizes:
        out //= math.factorial(s)
    for mult in Counter(sizes).values():
        out //= math.factorial(mult)
    return out


def bell(n: int) -> int:
    return sum(set_partition_count(p) for p in integer_partitions(n))


def enumerate_hierarchies(n: int, cap: int = HIERARCHY_CAP):
    """Every fragmentation tree of [n] exactly once."""
    from .trees import hierarchies_of

    _check_cap(n, cap, "enumerate_hierarchies")
    return list(hierarchies_of(tuple(range(1, n + 1))))


@lru_cache(maxsize=None)
def hierarchy_count(n: int) -> int:
    """Count of fragmentation trees on n labels by the recursion over first splits."""
    if n == 1:
        return 1
    total = 0
    for sizes in integer_partitions(n):
        if len(sizes) < 2:
            continue
        term = set_partition_count(sizes)
        for s in sizes:
            term *= hierarchy_count(s)
        total += term
    return total
