"""Recovering split probabilities p_n from the tagged-fragment Levy kernel,
and exact re-rooting invariance tests.

The recursion uses the re-rooting identity

    p_n(n1, n2..nk) p_{n1}(1, n1-1) = p_n(n2+..+nk+1, n1-1) p_{n-n1+1}(1, n2..nk)

seeded by p_n(1, n-1) = Phi(n-1 : 1) / ((n-1) Phi(n-1)): the first bush off the
spine of [n] being exactly {2}. Kernels of the form c (1-e^-x)^(-b-1) e^(-bx)
with b > 1/2 fail at n = 3 (p_3(1,1,1) < 0); no fragmentation tree has them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .errors import CapacityError, KernelInconsistencyError, ValidationError
from .partitions import HIERARCHY_CAP, integer_partitions, set_partition_count
from .pdlaws import LevyKernel, block_rate, kernel_rate
from .splitlaw import SplitLaw, TableLaw, shape_key, split_table
from .trees import pushforward, reroot, shape_distribution, total_variation

NORMALIZATION_TOL = 1e-6
RECONSTRUCT_CAP = 10


@dataclass
class PnTable:
    n_max: int
    values: dict[tuple[int, tuple[int, ...]], float]
    meta: dict = field(default_factory=dict)

    def p(self, parts) -> float:
        key = shape_key(parts)
        try:
            return self.values[(sum(key), key)]
        except KeyError:
            raise ValidationError(f"table has no entry for {key}") from None

    def normalization_error(self) -> float:
        worst = 0.0
        for n in range(2, self.n_max + 1):
            s = math.fsum(set_partition_count(k) * self.values[(n, k)] for k in integer_partitions(n) if len(k) >= 2)
            worst = max(worst, abs(s - 1.0))
        return worst

    def as_law(self, name: str = "table") -> TableLaw:
        return TableLaw(self.values, self.n_max, name)

    def to_json(self) -> dict:
        entries = [{"n": n, "parts": list(k), "p": v} for (n, k), v in sorted(self.values.items())]
        return {"n_max": self.n_max, "entries": entries}

    @classmethod
    def from_json(cls, data: Mapping) -> "PnTable":
        vals = {(int(e["n"]), shape_key(e["parts"])): float(e["p"]) for e in data["entries"]}
        return cls(int(data["n_max"]), vals)

    def max_rel_error(self, other: "PnTable") -> float:
        worst = 0.0
        for key, v in self.values.items():
            w = other.values[key]
            worst = max(worst, abs(v - w) / abs(w) if w else abs(v))
        return worst


def pn_table(law: SplitLaw, n_max: int) -> PnTable:
    return PnTable(n_max, split_table(law, n_max))


def seed_two_block(kernel: LevyKernel, n: int) -> float:
    """p_n(1, n-1) from the kernel's block rates."""
    if n < 2:
        raise ValidationError("seed_two_block needs n >= 2")
    if n == 2:
        return 1.0
    r = n - 1
    return block_rate(kernel, r, 1) / (r * kernel_rate(kernel, r))


def seed_three(kernel: LevyKernel) -> tuple[float, float]:
    p12 = seed_two_block(kernel, 3)
    p111 = 1.0 - 3.0 * p12
    if not -1e-9 <= p111 <= 1.0:
        raise KernelInconsistencyError(f"kernel gives p_3(1,1,1) = {p111:.6g}; no split law has this tagged-fragment kernel")
    return p12, max(p111, 0.0)


def _two(a: int, b: int) -> tuple[int, ...]:
    return shape_key((a, b))


def reconstruct_pn(kernel: LevyKernel, n_max: int, order: str = "max") -> PnTable:
    """Rebuild every p_n, n <= n_max, from the Levy kernel alone.

    ``order`` picks which part plays n1 for entries with three or more blocks
    (``"max"`` or ``"min"`` part >= 2); two-block entries are always filled by
    induction on the smaller part. Over-determined instances of the identity
    are evaluated too and their worst relative disagreement is kept in
    ``meta["consistency"]``.
    """
    if n_max > RECONSTRUCT_CAP:
        raise CapacityError(f"reconstruct_pn is capped at n_max = {RECONSTRUCT_CAP}")
    if n_max < 2:
        raise ValidationError("n_max must be >= 2")
    if order not in ("max", "min"):
        raise ValidationError("order must be 'max' or 'min'")
    logv: dict[tuple[int, tuple[int, ...]], float] = {(2, (1, 1)): 0.0}
    vals: dict[tuple[int, tuple[int, ...]], float] = {(2, (1, 1)): 1.0}

    def lp(n, parts):
        return logv[(n, shape_key(parts))]

    def set_(n, key, v_log):
        logv[(n, key)] = v_log
        vals[(n, key)] = math.exp(v_log)

    def identity_rhs(n, n1, rest) -> float:
        # log of p_n(n-n1+1, n1-1) p_{n-n1+1}(1, rest) / p_{n1}(1, n1-1)
        if vals[(n1, _two(1, n1 - 1))] <= 0:
            raise KernelInconsistencyError(f"p_{n1}(1,{n1 - 1}) = 0 cannot be a divisor")
        return lp(n, (n - n1 + 1, n1 - 1)) + lp(n - n1 + 1, (1,) + tuple(rest)) - lp(n1, (1, n1 - 1))

    consistency = 0.0
    for n in range(3, n_max + 1):
        if n == 3:
            seed_three(kernel)  # the n = 3 diagnosis for kernels no split law has
        seed = seed_two_block(kernel, n)
        if not 0 < seed <= 1:
            raise KernelInconsistencyError(f"p_{n}(1,{n-1}) = {seed} outside (0, 1]")
        vals[(n, (n - 1, 1))], logv[(n, (n - 1, 1))] = seed, math.log(seed)
        for a in range(2, n // 2 + 1):
            set_(n, _two(a, n - a), identity_rhs(n, a, (n - a,)))
        for key in integer_partitions(n):
            if len(key) < 3 or key[0] == 1:
                continue
            big = [x for x in key if x >= 2]
            n1 = max(big) if order == "max" else min(big)
            rest = list(key)
            rest.remove(n1)
            set_(n, key, identity_rhs(n, n1, rest))
        # all-singletons entry from normalisation
        others = math.fsum(set_partition_count(k) * vals[(n, k)] for k in integer_partitions(n) if 1 < len(k) < n)
        last = 1.0 - others
        if last < -NORMALIZATION_TOL:
            raise KernelInconsistencyError(f"normalisation at n={n} leaves p_n(1,...,1) = {last:.3g}")
        vals[(n, (1,) * n)] = max(last, 0.0)
        logv[(n, (1,) * n)] = math.log(last) if last > 0 else -math.inf
        # every other valid instance of the identity, for the record
        for key in integer_partitions(n):
            if len(key) < 2:
                continue
            for n1 in set(x for x in key if x >= 2):
                rest = list(key)
                rest.remove(n1)
                try:
                    other = math.exp(identity_rhs(n, n1, rest))
                except KernelInconsistencyError:
                    continue
                v = vals[(n, key)]
                consistency = max(consistency, abs(other - v) / v if v else abs(other))
    return PnTable(n_max, vals, {"kernel": kernel.name, "order": order, "consistency": consistency})


def lemma15_residual(table: PnTable, n_max: Optional[int] = None) -> float:
    """Worst absolute violation of the re-rooting identity over the table."""
    n_max = table.n_max if n_max is None else n_max
    if n_max > table.n_max:
        raise ValidationError(f"table only reaches n = {table.n_max}")

    def p(n, parts):
        return 1.0 if 0 in parts else table.p(parts)

    worst = 0.0
    for n in range(2, n_max + 1):
        for key in integer_partitions(n):
            if len(key) < 2:
                continue
            for n1 in set(key):
                rest = list(key)
                rest.remove(n1)
                lhs = table.p(key) * (1.0 if n1 == 1 else p(n1, (1, n1 - 1)))
                rhs = (1.0 if n1 == 1 else p(n, (n - n1 + 1, n1 - 1))) * p(n - n1 + 1, (1,) + tuple(rest))
                worst = max(worst, abs(lhs - rhs))
    return worst


def reroot_invariance_distance(law: SplitLaw, n: int, cap: int = HIERARCHY_CAP) -> float:
    """Total variation between the law of T_[n] and the law of its re-rooting."""
    dist = shape_distribution(law, n, cap)
    return total_variation(dist, pushforward(dist, reroot))
