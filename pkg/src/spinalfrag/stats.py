"""Chi-square helpers and the check-report record."""
from __future__ import annotations

import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Any, Hashable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

ALPHA_LEVEL = 1e-3
MIN_EXPECTED = 5.0
OTHER = "<other>"


@dataclass
class CheckReport:
    check: str
    parameters: dict
    statistic: Any
    threshold: Any
    status: str
    runtime: float = 0.0
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping, runtime: float = 0.0) -> "CheckReport":
        known = {"check", "parameters", "statistic", "threshold", "status"}
        return cls(
            d["check"], dict(d["parameters"]), d["statistic"], d["threshold"], d["status"],
            runtime, {k: v for k, v in d.items() if k not in known},
        )


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def status_from_p(p: Optional[float], level: float = ALPHA_LEVEL) -> str:
    if p is None:
        return "vacuous"
    return "pass" if p > level else "fail"


def chi_square_gof(observed: Sequence[Hashable], probs: Mapping[Hashable, float], level: float = ALPHA_LEVEL) -> dict:
    """Goodness of fit of observed labels to exact probabilities.

    Outcomes with expected count below 5 are pooled into one bin; observing an
    outcome of probability zero fails outright.
    """
    n = len(observed)
    counts = Counter(observed)
    impossible = [k for k in counts if probs.get(k, 0.0) <= 0.0]
    if impossible:
        return {"p_value": 0.0, "statistic": float("inf"), "bins": None, "status": "fail", "impossible": [str(k) for k in impossible[:5]]}
    if n == 0:
        return {"p_value": None, "statistic": None, "bins": 0, "status": "inconclusive"}
    obs, exp = [], []
    other_o, other_e = 0, 0.0
    for k, p in probs.items():
        if p <= 0:
            continue
        e = n * p
        if e < MIN_EXPECTED:
            other_o += counts.get(k, 0)
            other_e += e
        else:
            obs.append(counts.get(k, 0))
            exp.append(e)
    if other_e > 0:
        if other_e < MIN_EXPECTED and exp:
            # fold a thin pooled bin into the smallest regular bin
            j = int(np.argmin(exp))
            obs[j] += other_o
            exp[j] += other_e
        else:
            obs.append(other_o)
            exp.append(other_e)
    if len(obs) < 2:
        return {"p_value": None, "statistic": None, "bins": len(obs), "status": "vacuous"}
    exp_arr = np.array(exp)
    exp_arr *= n / exp_arr.sum()
    stat, p = stats.chisquare(obs, exp_arr)
    return {"p_value": float(p), "statistic": float(stat), "bins": len(obs), "status": status_from_p(float(p), level)}


def _pool(labels: Sequence[Hashable], n: int, min_count: float) -> list:
    counts = Counter(labels)
    rare = {k for k, c in counts.items() if c < min_count}
    if len(rare) == 1 and len(counts) > 1:
        # a lone rare category is merged with the next smallest one
        smallest = min((k for k in counts if k not in rare), key=lambda k: counts[k])
        rare.add(smallest)
    return [OTHER if x in rare else x for x in labels]


def chi_square_independence(xs: Sequence[Hashable], ys: Sequence[Hashable], level: float = ALPHA_LEVEL) -> dict:
    """Pearson test of independence with rare categories pooled."""
    n = len(xs)
    if n == 0:
        return {"p_value": None, "statistic": None, "shape": None, "status": "inconclusive"}
    xs2 = _pool(list(xs), n, 5 * 5)
    ys2 = _pool(list(ys), n, 5 * 5)
    rows = sorted(set(xs2), key=str)
    cols = sorted(set(ys2), key=str)
    if len(rows) < 2 or len(cols) < 2:
        return {"p_value": None, "statistic": None, "shape": [len(rows), len(cols)], "status": "vacuous"}
    ri = {r: i for i, r in enumerate(rows)}
    ci = {c: i for i, c in enumerate(cols)}
    table = np.zeros((len(rows), len(cols)))
    for x, y in zip(xs2, ys2):
        table[ri[x], ci[y]] += 1
    stat, p, dof, expected = stats.chi2_contingency(table, correction=False)
    status = status_from_p(float(p), level)
    if expected.min() < 1:
        status = "inconclusive" if status == "fail" else status
    return {"p_value": float(p), "statistic": float(stat), "shape": list(table.shape), "dof": int(dof), "status": status}
