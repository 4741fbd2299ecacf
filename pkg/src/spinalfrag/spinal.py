"""Spinal decompositions of fragmentation trees and their exact laws.

Index convention: ``n`` is always the number of non-tagged labels. Laws are
for the tree T_[n+1], with leaf 1 tagged, and partitions are of {2, ..., n+1}.
A rate Phi(r : m) therefore refers to the tagged block holding r other labels
and throwing off m of them.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import CapacityError, NumericError, ValidationError
from .partitions import (
    COMPOSITION_CAP,
    HIERARCHY_CAP,
    OrderedPartition,
    SetPartition,
    canonicalize,
    integer_partitions,
    iter_compositions,
    iter_set_partitions,
    restrict,
)
from .splitlaw import SplitLaw
from .trees import FragTree, pushforward, shape_distribution, total_variation

TOL_FACTOR = 1e-9


@dataclass(frozen=True)
class SpinalDecomposition:
    coarse_ordered: OrderedPartition
    coarse: SetPartition
    fine: SetPartition
    subtrees: tuple[tuple[FragTree, ...], ...]

    def to_json(self) -> dict:
        return {
            "coarse_ordered": self.coarse_ordered.to_json(),
            "coarse": self.coarse.to_json(),
            "fine": self.fine.to_json(),
            "composition": list(self.composition),
        }

    @property
    def composition(self) -> tuple[int, ...]:
        return self.coarse_ordered.sizes()[:-1]


def spinal_decompose(t: FragTree) -> SpinalDecomposition:
    if 1 not in t.block:
        raise ValidationError("spinal decomposition needs leaf 1")
    bushes: list[tuple[int, ...]] = []
    groups: list[tuple[FragTree, ...]] = []
    node = t
    while not node.is_leaf:
        spine = [c for c in node.children if 1 in c.block]
        off = tuple(c for c in node.children if 1 not in c.block)
        bushes.append(tuple(sorted(x for c in off for x in c.block)))
        groups.append(off)
        node = spine[0]
    ordered = OrderedPartition(tuple(bushes) + ((1,),))
    fine = canonicalize([c.block for g in groups for c in g] + [(1,)])
    return SpinalDecomposition(ordered, ordered.unordered(), fine, tuple(groups))


def coarse_composition(t: FragTree) -> tuple[int, ...]:
    return spinal_decompose(t).composition


def _check_n(n: int, cap: int, what: str) -> None:
    if n < 1:
        raise ValidationError(f"{what}: n must be >= 1")
    if n > cap:
        raise CapacityError(f"{what}: n={n} exceeds cap {cap}")


def composition_law(law: SplitLaw, n: int) -> dict[tuple[int, ...], float]:
    """Exact law of the coarse spinal composition C_n of T_[n+1].

    The product over successive bushes follows from regenerativity; it is a
    derived formula, so the tests hold it against tree enumeration.
    """
    _check_n(n, COMPOSITION_CAP, "composition_law")
    out = {}
    for c in iter_compositions(n):
        p, r = 1.0, n
        for m in c:
            p *= law.block_prob(r, m)
            r -= m
        out[c] = p
    return out


def _ordered_block_weight(law: SplitLaw, r: int, m: int) -> float:
    # probability that the next bush is one particular m-subset of the r labels
    return law.block_prob(r, m) / math.comb(r, m)


def coarse_sizes_law(law: SplitLaw, sizes: Sequence[int]) -> float:
    """P(coarse partition equals a particular partition with these block sizes)."""

    @lru_cache(maxsize=None)
    def f(rem: tuple[int, ...]) -> float:
        if not rem:
            return 1.0
        r = sum(rem)
        total = 0.0
        for i in range(len(rem)):
            rest = rem[:i] + rem[i + 1 :]
            total += _ordered_block_weight(law, r, rem[i]) * f(rest)
        return total

    return f(tuple(sorted(sizes, reverse=True)))


def _labels(n: int) -> list[int]:
    return list(range(2, n + 2))


def coarse_partition_law(law: SplitLaw, n: int, cap: int = 8) -> dict[SetPartition, float]:
    """Exact law of the coarse spinal partition of T_[n+1] restricted to {2..n+1}."""
    _check_n(n, cap, "coarse_partition_law")
    cache: dict[tuple[int, ...], float] = {}
    out = {}
    for p in iter_set_partitions(_labels(n)):
        sp = canonicalize(p)
        key = tuple(sorted(sp.sizes, reverse=True))
        if key not in cache:
            cache[key] = coarse_sizes_law(law, key)
        out[sp] = cache[key]
    return out


def fine_sizes_law(law: SplitLaw, sizes: Sequence[int]) -> float:
    """P(fine partition equals a particular partition with these block sizes).

    Sums over the ordered groupings of fine blocks into bushes; a spinal vertex
    holding r other labels that throws off the group S splits into the tagged
    block (r - |S| + 1 labels) and the blocks of S.
    """

    @lru_cache(maxsize=None)
    def f(rem: tuple[int, ...]) -> float:
        if not rem:
            return 1.0
        r = sum(rem)
        k = len(rem)
        total = 0.0
        for size in range(1, k + 1):
            for idx in combinations(range(k), size):
                group = [rem[i] for i in idx]
                rest = tuple(rem[i] for i in range(k) if i not in idx)
                total += law.split_prob([r - sum(group) + 1] + group) * f(rest)
        return total

    return f(tuple(sorted(sizes, reverse=True)))


def fine_partition_law(law: SplitLaw, n: int, cap: int = 8) -> dict[SetPartition, float]:
    """Exact law of the fine spinal partition of T_[n+1] restricted to {2..n+1}."""
    _check_n(n, cap, "fine_partition_law")
    cache: dict[tuple[int, ...], float] = {}
    out = {}
    for p in iter_set_partitions(_labels(n)):
        sp = canonicalize(p)
        key = tuple(sorted(sp.sizes, reverse=True))
        if key not in cache:
            cache[key] = fine_sizes_law(law, key)
        out[sp] = cache[key]
    return out


def shatter_law(law: SplitLaw, n: int, factor: Callable[[Sequence[int]], float], cap: int = 8) -> dict[SetPartition, float]:
    """Fine law built as: draw the coarse partition, then shatter each block by ``factor``."""
    _check_n(n, cap, "shatter_law")

    @lru_cache(maxsize=None)
    def joint(fine_sizes: tuple[int, ...]) -> float:
        total = 0.0
        k = len(fine_sizes)
        # every grouping of the fine blocks into coarse blocks
        for grouping in iter_set_partitions(list(range(k))):
            coarse = [sum(fine_sizes[i] for i in g) for g in grouping]
            w = coarse_sizes_law(law, coarse)
            for g in grouping:
                w *= factor([fine_sizes[i] for i in g])
            total += w
        return total

    out = {}
    for p in iter_set_partitions(_labels(n)):
        sp = canonicalize(p)
        out[sp] = joint(tuple(sorted(sp.sizes, reverse=True)))
    return out


def factor_g(law: SplitLaw, n: int, n1: int) -> float:
    """Rate of forming one particular block of size n1 around label 1 in [n]."""
    if not 1 <= n1 <= n - 1:
        raise ValidationError(f"factor_g needs 1 <= n1 <= n-1, got n={n}, n1={n1}")
    return law.block_rate(n - 1, n - n1) / math.comb(n - 1, n1 - 1)


def nu_hat_eppf(law: SplitLaw, n: int, n1: int, parts: Sequence[int]) -> float:
    """Conditional EPPF of the rest of [n] given 1's block of size n1."""
    parts = tuple(parts)
    if sum(parts) != n - n1 or any(p < 1 for p in parts):
        raise ValidationError(f"parts {parts} are not a composition of n - n1 = {n - n1}")
    g = factor_g(law, n, n1)
    if g == 0:
        raise NumericError(f"g({n}, {n1}) vanishes")
    return law.eprf((n1,) + parts) / g


def factorization_report(law: SplitLaw, n_max: int, tol: float = TOL_FACTOR) -> dict:
    """Check whether the conditional laws nu_hat(n, n1) agree for all n <= n_max."""
    if n_max > 8:
        raise CapacityError("factorization_report is capped at n_max = 8")
    cand = law.factor_eppf()
    dev = 0.0
    dev_cand = 0.0 if cand else None
    worst = None
    for s in range(1, n_max):
        for c in integer_partitions(s):
            vals = [nu_hat_eppf(law, n, n - s, c) for n in range(s + 1, n_max + 1)]
            d = max(vals) - min(vals)
            if d > dev:
                dev, worst = d, {"parts": list(c), "min": min(vals), "max": max(vals)}
            if cand:
                dev_cand = max(dev_cand, max(abs(v - cand(c)) for v in vals))
    passed = dev <= tol
    named = law.factor_name() if cand and dev_cand is not None and dev_cand <= tol else None
    return {
        "check": "factor",
        "parameters": {**law.describe(), "n_max": n_max},
        "statistic": dev,
        "threshold": tol,
        "status": "pass" if passed else "fail",
        "factor": named if passed else None,
        "candidate_deviation": dev_cand,
        "worst": worst,
    }


def reversal_distance(law: SplitLaw, n: int) -> float:
    """Total variation between the law of C_n and the law of its reversal."""
    if n > 20:
        raise CapacityError("reversal_distance is capped at n = 20")
    law_c = composition_law(law, n)
    return total_variation(law_c, {c[::-1]: p for c, p in law_c.items()})


# --- tree-enumeration oracles ---------------------------------------------------


def tree_pushforwards(law: SplitLaw, n: int, cap: int = HIERARCHY_CAP) -> dict[str, dict]:
    """Composition, coarse and fine laws obtained by enumerating all trees on [n+1]."""
    if n + 1 > cap:
        raise CapacityError(f"tree enumeration is capped at {cap} leaves")
    dist = shape_distribution(law, n + 1, cap)
    decs = {t: spinal_decompose(t) for t in dist}
    rest = set(_labels(n))
    return {
        "composition": pushforward(dist, lambda t: decs[t].composition),
        "coarse": pushforward(dist, lambda t: restrict(decs[t].coarse, rest)),
        "fine": pushforward(dist, lambda t: restrict(decs[t].fine, rest)),
    }


def max_abs_diff(p: dict, q: dict) -> float:
    return max(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in set(p) | set(q))


# --- Monte Carlo check of subtree independence ----------------------------------


def subtree_independence_check(law: SplitLaw, n: int, samples: int, seed: int = 0, alpha_level: float = 1e-3, workers: int = 1) -> dict:
    """Conditioned on the fine block sizes, test that subtrees off the spine
    look like independent copies of T_[m].

    Samples T_[n+1] and keeps those whose fine-size profile is the most common
    profile containing a subtree with at least 3 leaves (smaller subtrees have
    one labelled shape). The largest such subtree is designated; its
    rank-relabelled shape is tested against the exact law of T_[m], and for
    independence against the rest of the spinal configuration (the ordered
    bush sizes and the shapes of the other subtrees).
    """
    from .sampling import sample_trees
    from .stats import chi_square_gof, chi_square_independence

    if n > 6:
        raise CapacityError("subtree_independence_check is capped at n = 6")
    trees = sample_trees(law, n + 1, samples, seed, workers=workers)
    rows = []
    for t in trees:
        dec = spinal_decompose(t)
        subs = sorted((s for g in dec.subtrees for s in g), key=lambda s: (-s.n, s.block))
        profile = tuple(s.n for s in subs)
        rows.append((profile, subs, dec.composition))
    counts = Counter(r[0] for r in rows if r[0] and r[0][0] >= 3)
    params = {**law.describe(), "n": n, "samples": samples, "seed": seed}
    if not counts:
        return {"check": "independence", "parameters": params, "statistic": None, "threshold": alpha_level, "status": "vacuous", "detail": "no subtree with 3 or more leaves"}
    profile, hits = counts.most_common(1)[0]
    chosen = [r for r in rows if r[0] == profile]
    m = profile[0]
    shapes = [r[1][0].standardize().key() for r in chosen]
    partner = [
        (tuple(s.standardize().key() for s in r[1][1:]), r[2])
        for r in chosen
    ]
    exact = {t.key(): p for t, p in shape_distribution(law, m).items()}
    gof = chi_square_gof(shapes, exact)
    ind = chi_square_independence(shapes, partner)
    tests = {"marginal": gof, "independence": ind}
    statuses = [x["status"] for x in tests.values()]
    if "fail" in statuses:
        status = "fail"
    elif all(s == "pass" for s in statuses):
        status = "pass"
    elif "pass" in statuses and all(s in ("pass", "vacuous") for s in statuses):
        status = "pass"
    else:
        status = "inconclusive"
    return {
        "check": "independence",
        "parameters": {**params, "profile": list(profile), "conditioned_samples": hits},
        "statistic": min(x["p_value"] for x in tests.values() if x["p_value"] is not None) if any(x["p_value"] is not None for x in tests.values()) else None,
        "threshold": alpha_level,
        "status": status,
        "tests": tests,
    }
