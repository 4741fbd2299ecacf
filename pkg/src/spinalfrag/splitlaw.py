"""Splitting rules for Markov branching trees.

A :class:`SplitLaw` couples two views of one dislocation measure:

* ``eprf(parts)``: the partition rate p_nu(n_1, ..., n_k) of a particular
  partition of [n] with those block sizes;
* ``block_rate(n, m)``: the rate at which the tagged block of [n+1] throws
  off exactly m of its n other labels.

Both live on the same scale, so ``split_prob`` (rate divided by the total
rate) and ``block_prob`` (block rate divided by the level total) are
scale-free. Index convention: ``total_rate(n)`` is the rate seen by [n],
which equals ``level_rate(n - 1)`` in block-rate indexing.
"""
from __future__ import annotations

import math
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import special

from . import pdlaws
from .errors import CapacityError, DomainError, ValidationError
from .partitions import PARTITION_CAP, composition, integer_partitions, iter_set_partitions, set_partition_count
from .pdlaws import LevyKernel, PdParams


def shape_key(parts: Sequence[int]) -> tuple[int, ...]:
    """Symmetric key: parts sorted nonincreasing."""
    return tuple(sorted(parts, reverse=True))


class SplitLaw:
    name = "split-law"
    max_n: Optional[int] = None

    def __init__(self):
        self._block_cache: dict[tuple[int, int], float] = {}
        self._total_cache: dict[int, float] = {}
        self._eprf_cache: dict[tuple[int, ...], float] = {}

    # subclasses provide _eprf, _block_rate and optionally _total_rate
    def _eprf(self, key: tuple[int, ...]) -> float:
        raise NotImplementedError

    def _block_rate(self, n: int, m: int) -> float:
        raise NotImplementedError

    def _total_rate(self, n: int) -> float:
        return self.level_rate(n - 1)

    def eprf(self, parts: Sequence[int]) -> float:
        key = shape_key(composition(parts))
        if len(key) < 2:
            raise ValidationError("split probabilities need at least two blocks")
        self._check_n(sum(key))
        if key not in self._eprf_cache:
            self._eprf_cache[key] = self._eprf(key)
        return self._eprf_cache[key]

    def total_rate(self, n: int) -> float:
        if n < 2:
            raise ValidationError("total_rate needs n >= 2")
        self._check_n(n)
        if n not in self._total_cache:
            self._total_cache[n] = self._total_rate(n)
        return self._total_cache[n]

    def split_prob(self, parts: Sequence[int]) -> float:
        """p_n: probability that [n] first splits into a given partition with these sizes."""
        key = shape_key(composition(parts))
        if len(key) < 2:
            raise ValidationError("conditioned split needs k >= 2 parts")
        return self.eprf(key) / self.total_rate(sum(key))

    def block_rate(self, n: int, m: int) -> float:
        if not 1 <= m <= n:
            raise ValidationError(f"block_rate needs 1 <= m <= n, got n={n}, m={m}")
        self._check_n(n + 1)
        if (n, m) not in self._block_cache:
            self._block_cache[(n, m)] = self._block_rate(n, m)
        return self._block_cache[(n, m)]

    def level_rate(self, n: int) -> float:
        """Sum of block rates at level n (the Laplace exponent at n)."""
        return math.fsum(self.block_rate(n, m) for m in range(1, n + 1))

    def block_prob(self, n: int, m: int) -> float:
        """Probability that the first bush off the spine of T_[n+1] has m leaves."""
        return self.block_rate(n, m) / self.level_rate(n)

    def factor_eppf(self) -> Optional[Callable[[Sequence[int]], float]]:
        """EPPF of the known factor of this law, or None."""
        return None

    def factor_name(self) -> Optional[str]:
        return None

    def scaled(self, c: float) -> "ScaledLaw":
        return ScaledLaw(self, c)

    def sample_split(self, labels: Sequence[int], rng: np.random.Generator) -> list[list[int]]:
        """Draw the children of a block; the default enumerates all partitions."""
        n = len(labels)
        if n > PARTITION_CAP:
            raise CapacityError(f"exact split sampling is capped at n={PARTITION_CAP}")
        parts = [p for p in iter_set_partitions(list(labels)) if len(p) > 1]
        w = np.array([self.split_prob([len(b) for b in p]) for p in parts])
        i = rng.choice(len(parts), p=w / w.sum())
        return parts[i]

    def _check_n(self, n: int) -> None:
        if self.max_n is not None and n > self.max_n:
            raise CapacityError(f"{self.name} is only defined up to n={self.max_n}")

    def describe(self) -> dict:
        return {"family": self.name}


class FactorSampledLaw(SplitLaw):
    """Laws that factor: split by picking the least label's block, then the factor."""

    def sample_split(self, labels, rng):
        n = len(labels)
        # block of the least label has size n1 with weight Phi(n-1 : n-n1)
        w = np.array([self.block_rate(n - 1, n - n1) for n1 in range(1, n)])
        n1 = 1 + int(rng.choice(n - 1, p=w / w.sum()))
        rest = list(labels[1:])
        mates_idx = rng.choice(len(rest), size=n1 - 1, replace=False) if n1 > 1 else []
        mates = set(int(i) for i in mates_idx)
        first = [labels[0]] + [rest[i] for i in sorted(mates)]
        others = [x for i, x in enumerate(rest) if i not in mates]
        return [first] + self._shatter(others, rng)

    def _shatter(self, labels, rng) -> list[list[int]]:
        raise NotImplementedError


class PDStarLaw(FactorSampledLaw):
    """Markov branching rule from the PD*(alpha, theta) dislocation measure."""

    def __init__(self, params: PdParams):
        super().__init__()
        self.params = params
        self.kernel = LevyKernel.pdstar(params)
        self.name = "pdstar"

    def _eprf(self, key):
        return pdlaws.eprf_pdstar(self.params, key)

    def _total_rate(self, n):
        return pdlaws.total_rate(self.params, n)

    def _block_rate(self, n, m):
        return pdlaws.block_rate(self.kernel, n, m)

    def factor_eppf(self):
        fp = self.params.factor()
        return lambda parts: pdlaws.eppf_pd(fp, parts)

    def factor_name(self):
        fp = self.params.factor()
        return f"PD({fp.alpha:g},{fp.theta:g})"

    def _shatter(self, labels, rng):
        if not labels:
            return []
        fp = self.params.factor()
        return pdlaws.crp_blocks(fp.alpha, fp.theta, labels, rng)

    def describe(self):
        return {"family": "pdstar", "alpha": self.params.alpha, "theta": self.params.theta}

    def __repr__(self):
        return f"PDStarLaw(alpha={self.params.alpha}, theta={self.params.theta})"


BROWNIAN_C = math.sqrt(2 / math.pi)


def brownian_density(x: float) -> float:
    """Density of the largest fragment under the Brownian dislocation measure, 1/2 <= x < 1."""
    return BROWNIAN_C * x ** -1.5 * (1 - x) ** -1.5


class BrownianLaw(FactorSampledLaw):
    """Binary splits from the Brownian dislocation measure.

    p(n1, n2) = sqrt(2/pi) B(n1 - 1/2, n2 - 1/2), from symmetrising the
    density of the largest fragment over (1/2, 1).
    """

    def __init__(self):
        super().__init__()
        self.kernel = LevyKernel.brownian()
        self.name = "brownian"

    def _eprf(self, key):
        if len(key) != 2:
            return 0.0
        return BROWNIAN_C * math.exp(special.betaln(key[0] - 0.5, key[1] - 0.5))

    def _total_rate(self, n):
        # partitions of [n] into two blocks, indexed by the size of 1's block
        return math.fsum(math.comb(n - 1, n1 - 1) * self._eprf((n1, n - n1)) for n1 in range(1, n))

    def _block_rate(self, n, m):
        return pdlaws.block_rate(self.kernel, n, m)

    def factor_eppf(self):
        return lambda parts: 1.0 if len(parts) == 1 else 0.0

    def factor_name(self):
        return "trivial (single block)"

    def _shatter(self, labels, rng):
        return [list(labels)] if labels else []


class TableLaw(SplitLaw):
    """Split rule given by explicit p_n values keyed by (n, nonincreasing parts).

    Rates are normalised per level: eprf = p_n and total_rate = 1, and the
    block rates are the first-bush probabilities implied by the table.
    """

    def __init__(self, values: Mapping[tuple[int, tuple[int, ...]], float], n_max: int, name: str = "table"):
        super().__init__()
        self.values = {(int(n), shape_key(p)): float(v) for (n, p), v in values.items()}
        self.max_n = n_max
        self.name = name

    def _eprf(self, key):
        try:
            return self.values[(sum(key), key)]
        except KeyError:
            raise ValidationError(f"table has no entry for {key}") from None

    def _total_rate(self, n):
        return 1.0

    def _block_rate(self, n, m):
        # 1's block has n+1-m labels; the m thrown-off labels form any partition
        total = 0.0
        for sizes in integer_partitions(m):
            total += set_partition_count(sizes) * self._eprf(shape_key((n + 1 - m,) + sizes))
        return math.comb(n, m) * total

    def describe(self):
        return {"family": "table", "name": self.name, "n_max": self.max_n}


class ScaledLaw(SplitLaw):
    """The same law with every rate multiplied by a constant."""

    def __init__(self, base: SplitLaw, c: float):
        super().__init__()
        if not c > 0:
            raise DomainError("scale must be positive")
        self.base, self.c = base, c
        self.name = base.name
        self.max_n = base.max_n

    def _eprf(self, key):
        return self.c * self.base.eprf(key)

    def _total_rate(self, n):
        return self.c * self.base.total_rate(n)

    def _block_rate(self, n, m):
        return self.c * self.base.block_rate(n, m)

    def factor_eppf(self):
        return self.base.factor_eppf()

    def factor_name(self):
        return self.base.factor_name()

    def sample_split(self, labels, rng):
        return self.base.sample_split(labels, rng)


def make_law(family: str, alpha: float | None = None, theta: float | None = None) -> SplitLaw:
    if family == "pdstar":
        if alpha is None or theta is None:
            raise DomainError("pdstar needs alpha and theta")
        return PDStarLaw(PdParams(alpha, theta))
    if family == "brownian":
        return BrownianLaw()
    raise DomainError(f"unknown family {family!r}")


def split_table(law: SplitLaw, n_max: int) -> dict[tuple[int, tuple[int, ...]], float]:
    """All p_n values of a law for 2 <= n <= n_max, keyed like :class:`TableLaw`."""
    out = {}
    for n in range(2, n_max + 1):
        for key in integer_partitions(n):
            if len(key) >= 2:
                out[(n, key)] = law.split_prob(key)
    return out
