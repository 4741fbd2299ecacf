"""Two-parameter Poisson-Dirichlet laws PD(alpha, theta) and the rescaled
measures PD*(alpha, theta): partition functions, rates, Levy kernels,
Laplace exponents and samplers.

Gamma products are evaluated as sums of ``lgamma`` terms with explicit sign
tracking, since arguments such as 1 + theta/alpha go negative in the
extended regime -2*alpha < theta <= -alpha.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericError, ValidationError
from .partitions import MassPartition, SetPartition, canonicalize, composition

SINGULAR_EPS = 1e-8
QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10


def lgamma_sign(x: float) -> tuple[float, int]:
    """(log|Gamma(x)|, sign Gamma(x)); poles give (inf, 0)."""
    if x <= 0 and float(x).is_integer():
        return math.inf, 0
    sign = 1
    if x < 0 and math.floor(x) % 2 == 1:
        sign = -1
    return math.lgamma(x), sign


def log_rising(x: float, n: int) -> tuple[float, int]:
    """Signed log of the rising factorial [x]_n = Gamma(x+n)/Gamma(x)."""
    if n == 0:
        return 0.0, 1
    if x <= 0 and float(x).is_integer():
        # finite product through zero or through negative integers
        prod = math.prod(x + i for i in range(n))
        return (math.log(abs(prod)) if prod else -math.inf), (1 if prod > 0 else -1 if prod < 0 else 0)
    a, sa = lgamma_sign(x + n)
    b, sb = lgamma_sign(x)
    return a - b, sa * sb


@dataclass(frozen=True)
class PdParams:
    alpha: float
    theta: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.theta > -2 * self.alpha:
            raise DomainError(f"theta must exceed -2*alpha={-2 * self.alpha}, got {self.theta}")

    @property
    def regime(self) -> str:
        return "probability" if self.theta > -self.alpha else "extended"

    @property
    def is_stable(self) -> bool:
        return self.theta == -1.0

    @property
    def beta(self) -> float:
        return 1.0 / self.alpha

    def factor(self) -> "PdParams":
        """Parameters of the PD factor of PD*(alpha, theta)."""
        return PdParams(self.alpha, self.theta + self.alpha)

    def require_probability(self, what: str) -> None:
        if self.regime != "probability":
            raise DomainError(
                f"{what} needs theta > -alpha (got alpha={self.alpha}, theta={self.theta}); "
                "use the extended-measure functions instead"
            )


def stable(alpha: float) -> PdParams:
    """PD*(alpha, -1), the dislocation law of the stable tree with index 1/alpha."""
    if not 0.5 < alpha < 1:
        raise DomainError(f"stable family needs alpha in (1/2, 1), got {alpha}")
    return PdParams(alpha, -1.0)


def _log_product_sum(params: PdParams, parts: Sequence[int]) -> float:
    a = params.alpha
    return sum(log_rising(1 - a, ni - 1)[0] for ni in parts)


def eppf_pd(params: PdParams, parts: Sequence[int]) -> float:
    """EPPF of PD(alpha, theta) at a composition."""
    params.require_probability("eppf_pd")
    c = composition(parts)
    if not c:
        raise ValidationError("empty composition")
    a, t = params.alpha, params.theta
    k, n = len(c), sum(c)
    lr, s1 = log_rising(1 + t / a, k - 1)
    ld, s2 = log_rising(1 + t, n - 1)
    logp = (k - 1) * math.log(a) + lr + _log_product_sum(params, c) - ld
    return s1 * s2 * math.exp(logp)


def eprf_pdstar(params: PdParams, parts: Sequence[int]) -> float:
    """Partition rate function of PD*(alpha, theta); +inf for one block when theta <= -alpha."""
    c = composition(parts)
    if not c:
        raise ValidationError("empty composition")
    a, t = params.alpha, params.theta
    k, n = len(c), sum(c)
    if k == 1 and t <= -a:
        return math.inf
    lg, s1 = lgamma_sign(k + t / a)
    ld, s2 = lgamma_sign(n + t)
    logp = (k - 1) * math.log(a) + lg + _log_product_sum(params, c) - ld
    return s1 * s2 * math.exp(logp)


def pdstar_normalizer(params: PdParams) -> float:
    """Gamma(1 + theta/alpha) / Gamma(1 + theta), the PD* total mass for theta > -alpha."""
    params.require_probability("pdstar_normalizer")
    a, t = params.alpha, params.theta
    return math.exp(math.lgamma(1 + t / a) - math.lgamma(1 + t))


def total_rate(params: PdParams, n: int) -> float:
    """Rate of PD*-partitions of [n] with at least two blocks.

    Two-term form Gamma(1+t/a) * (1/Gamma(1+t) - Gamma(n-a)/(Gamma(1-a)Gamma(n+t))).
    The reciprocal gamma removes the theta = -1 singularity; near theta = -alpha
    the digamma limit is used.
    """
    if n < 2:
        raise ValidationError(f"total_rate needs n >= 2, got {n}")
    a, t = params.alpha, params.theta
    if abs(t + a) < SINGULAR_EPS:
        return a * (special.digamma(n - a) - special.digamma(1 - a)) / math.gamma(1 - a)
    lg, sg = lgamma_sign(1 + t / a)
    second = math.exp(math.lgamma(n - a) - math.lgamma(1 - a) - math.lgamma(n + t))
    bracket = float(special.rgamma(1 + t)) - second
    return sg * math.exp(lg) * bracket


def laplace_exponent(params: PdParams, z: float) -> float:
    """Laplace exponent of the tagged-fragment subordinator of PD*(alpha, theta)."""
    if not z > 0:
        raise DomainError(f"laplace_exponent needs z > 0, got {z}")
    a, t = params.alpha, params.theta
    if abs(t + a) < SINGULAR_EPS:
        return a / math.gamma(1 - a) * (special.digamma(z + 1 - a) - special.digamma(1 - a))
    lg, sg = lgamma_sign(2 + t / a)
    pre = a * sg * math.exp(lg) / ((a + t) * math.gamma(1 - a))
    left = (1 + t) * math.gamma(1 - a) / math.gamma(2 + t)
    right = (z + 1 + t) * math.exp(math.lgamma(z + 1 - a) - math.lgamma(z + 2 + t))
    return pre * (left - right)


def levy_constant(params: PdParams) -> float:
    """alpha Gamma(2 + theta/alpha) / (Gamma(1-alpha) Gamma(1+alpha+theta))."""
    a, t = params.alpha, params.theta
    lg, sg = lgamma_sign(2 + t / a)
    return sg * a * math.exp(lg - math.lgamma(1 - a) - math.lgamma(1 + a + t))


def levy_density(params: PdParams, x: float) -> float:
    if not x > 0:
        raise DomainError(f"levy_density needs x > 0, got {x}")
    a, t = params.alpha, params.theta
    return levy_constant(params) * math.exp(-x * (1 - a)) * (-math.expm1(-x)) ** (a + t - 1)


def size_biased_density(params: PdParams, s: float) -> float:
    """Density of s * sum_j PD*(s_j in ds) on (0, 1)."""
    a, t = params.alpha, params.theta
    return levy_constant(params) * s ** (-a) * (1 - s) ** (a + t - 1)


def _pdstar_density(x, c, a, t):
    return c * np.exp(-x * (1 - a)) * (-np.expm1(-x)) ** (a + t - 1)


def _power_density(x, b, c):
    return c * (-np.expm1(-x)) ** (-b - 1) * np.exp(-b * x)


@dataclass(frozen=True)
class LevyKernel:
    """Levy measure of the tagged-fragment subordinator.

    ``closed_form`` is ``("pdstar", alpha, theta)`` or ``("power", b, c)`` for
    c (1 - e^-x)^(-b-1) e^(-bx); rates then use Beta functions instead of
    quadrature.
    """

    density: Callable[[float], float]
    closed_form: Optional[tuple] = None
    name: str = "kernel"

    @classmethod
    def pdstar(cls, params: PdParams) -> "LevyKernel":
        a, t = params.alpha, params.theta
        dens = partial(_pdstar_density, c=levy_constant(params), a=a, t=t)
        return cls(dens, ("pdstar", a, t), f"PD*({a:g},{t:g})")

    @classmethod
    def power(cls, b: float, c: float = 1.0) -> "LevyKernel":
        if not 0 < b < 1 or not c > 0:
            raise DomainError(f"power kernel needs 0 < b < 1 and c > 0, got b={b}, c={c}")
        dens = partial(_power_density, b=b, c=c)
        return cls(dens, ("power", b, c), f"power(b={b:g},c={c:g})")

    @classmethod
    def brownian(cls) -> "LevyKernel":
        return cls.power(0.5, math.sqrt(2 / math.pi))

    def without_closed_form(self) -> "LevyKernel":
        return LevyKernel(self.density, None, self.name + "[quad]")

    def integrability(self, x_max: float = 50.0) -> float:
        """Numerical value of int (1 - e^-x) Lambda(dx) on (0, x_max]."""
        return _quad_z(lambda z: (1 - z) * self._z_density(z), math.exp(-x_max), 1.0)

    def _z_density(self, z):
        # Lambda in the variable z = e^-x, including the Jacobian 1/z
        return self.density(-np.log(z)) / z


def _quad_z(f, lo: float, hi: float) -> float:
    total = 0.0
    cuts = [lo, 0.5, hi] if lo < 0.5 < hi else [lo, hi]
    for u, v in zip(cuts, cuts[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, _ = integrate.quad(f, u, v, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=500)
            except integrate.IntegrationWarning as exc:
                raise NumericError(f"quadrature did not converge on [{u}, {v}]: {exc}") from exc
        if not math.isfinite(val):
            raise NumericError(f"quadrature diverged on [{u}, {v}]")
        total += val
    return total


def block_rate(kernel: LevyKernel, n: int, m: int) -> float:
    """Rate at which the tagged block of [n+1] throws off exactly m labels."""
    if n < 1 or not 1 <= m <= n:
        raise ValidationError(f"block_rate needs 1 <= m <= n, got n={n}, m={m}")
    cf = kernel.closed_form
    if cf and cf[0] == "pdstar":
        a, t = cf[1], cf[2]
        c = levy_constant(PdParams(a, t))
        return math.comb(n, m) * c * math.exp(special.betaln(n - m + 1 - a, m + a + t))
    if cf and cf[0] == "power":
        b, c = cf[1], cf[2]
        return math.comb(n, m) * c * math.exp(special.betaln(n - m + b, m - b))
    return block_rate_quad(kernel, n, m)


def block_rate_quad(kernel: LevyKernel, n: int, m: int) -> float:
    """Block rate by adaptive quadrature in z = e^-x, ignoring any closed form."""
    if n < 1 or not 1 <= m <= n:
        raise ValidationError(f"block_rate needs 1 <= m <= n, got n={n}, m={m}")
    f = lambda z: z ** (n - m) * (1 - z) ** m * kernel._z_density(z)
    return math.comb(n, m) * _quad_z(f, 0.0, 1.0)


def kernel_rate(kernel: LevyKernel, n: int) -> float:
    """Laplace exponent at integer n, as the sum of the n block rates."""
    return math.fsum(block_rate(kernel, n, m) for m in range(1, n + 1))


# --- samplers ---------------------------------------------------------------


def stick_breaking_sample(params: PdParams, k: int, rng: np.random.Generator) -> np.ndarray:
    """First k size-biased frequencies W_1, (1-W_1)W_2, ..."""
    params.require_probability("stick_breaking_sample")
    if k < 1:
        raise ValidationError("k must be >= 1")
    a, t = params.alpha, params.theta
    w = rng.beta(1 - a, t + a * np.arange(1, k + 1))
    left = np.concatenate(([1.0], np.cumprod(1 - w)[:-1]))
    return w * left


def crp_blocks(alpha: float, theta: float, labels: Sequence[int], rng: np.random.Generator) -> list[list[int]]:
    """Sequential seating of ``labels`` with PD(alpha, theta) prediction weights."""
    blocks: list[list[int]] = []
    u = rng.random(len(labels))
    for i, lab in enumerate(labels):
        if i == 0:
            blocks.append([lab])
            continue
        k = len(blocks)
        x = u[i] * (i + theta)
        chosen = k
        for j, b in enumerate(blocks):
            x -= len(b) - alpha
            if x < 0:
                chosen = j
                break
        if chosen == k:
            blocks.append([lab])
        else:
            blocks[chosen].append(lab)
    return blocks


def crp_sample_partition(params: PdParams, n: int, rng: np.random.Generator) -> SetPartition:
    params.require_probability("crp_sample_partition")
    if n < 1:
        raise ValidationError("n must be >= 1")
    return canonicalize(crp_blocks(params.alpha, params.theta, range(1, n + 1), rng))


def paintbox_partition(freqs: np.ndarray, n: int, rng: np.random.Generator) -> SetPartition:
    """Kingman paintbox: label i picks colour j with probability freqs[j]; leftover mass is dust."""
    cdf = np.cumsum(freqs)
    u = rng.random(n)
    colours = np.searchsorted(cdf, u, side="right")
    blocks: dict[int, list[int]] = {}
    for i, c in enumerate(colours, start=1):
        key = int(c) if c < len(freqs) else -i
        blocks.setdefault(key, []).append(i)
    return canonicalize(blocks.values())


def alpha_diversity(s: MassPartition, alpha: float) -> float:
    """Truncation estimate Gamma(1-alpha) j s_j^alpha at the last positive index."""
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    f = s.freqs
    if len(f) < 10:
        raise ValidationError(f"alpha_diversity needs >= 10 frequencies, got {len(f)}")
    j = max(i for i, v in enumerate(f, start=1) if v > 0) if any(v > 0 for v in f) else 0
    if j < 10:
        raise ValidationError("fewer than 10 positive frequencies")
    return math.gamma(1 - alpha) * j * f[j - 1] ** alpha


# --- Poisson representation ---------------------------------------------------


@dataclass(frozen=True)
class OracleEstimate:
    mean: float
    stderr: float
    draws: int
    jumps: int
    compensated_mass: float

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.mean - value) <= sigmas * self.stderr


def stable_jumps(alpha: float, size: int, jumps: int, rng: np.random.Generator):
    """Ranked largest jumps of the Poisson process with intensity
    alpha/Gamma(1-alpha) x^(-alpha-1) dx, plus the compensated total.

    Returns (delta, total, small): delta has shape (size, jumps), small is the
    conditional mean alpha/(Gamma(1-alpha)(1-alpha)) * delta_K^(1-alpha) of the
    jumps below the smallest kept one, and total includes it.
    """
    g = math.gamma(1 - alpha)
    arrivals = np.cumsum(rng.standard_exponential((size, jumps)), axis=1)
    delta = (g * arrivals) ** (-1.0 / alpha)
    small = alpha / (g * (1 - alpha)) * delta[:, -1] ** (1 - alpha)
    return delta, delta.sum(axis=1) + small, small


def poisson_stable_oracle(
    alpha: float,
    theta: float,
    f: Callable[[np.ndarray], np.ndarray],
    rng: np.random.Generator,
    M: int,
    jumps: int = 200,
    chunk: int = 50_000,
) -> OracleEstimate:
    """Monte Carlo estimate of the PD*(alpha, theta) integral of f as E[T^-theta f(Delta/T)].

    ``f`` is vectorised: it maps an (m, jumps) array of ranked frequencies to m
    values. Only the ``jumps`` largest points are simulated; the mass of the
    rest enters T through its conditional mean and is otherwise dust.
    """
    if M <= 0:
        raise ValidationError("M must be positive")
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    total = 0.0
    total_sq = 0.0
    comp = 0.0
    done = 0
    while done < M:
        m = min(chunk, M - done)
        delta, T, small = stable_jumps(alpha, m, jumps, rng)
        vals = T ** (-theta) * np.asarray(f(delta / T[:, None]), dtype=float)
        total += vals.sum()
        total_sq += np.square(vals).sum()
        comp += (small / T).sum()
        done += m
    mean = total / M
    var = max(total_sq / M - mean * mean, 0.0)
    return OracleEstimate(mean, math.sqrt(var / M), M, jumps, comp / M)


def paintbox_partition_probability(freqs: np.ndarray, parts: Sequence[int]) -> np.ndarray:
    """p_s(parts) for rows of ranked frequencies, one or two blocks, via power sums.

    Missing mass is dust, and dust labels are singletons, so the first power
    sum is taken as 1 rather than sum(s).
    """
    c = composition(parts)
    p = {r: np.sum(freqs ** r, axis=1) for r in set(c) | {sum(c)} if r > 1}
    p[1] = np.ones(freqs.shape[0])
    if len(c) == 1:
        return p[c[0]]
    if len(c) == 2:
        a, b = c
        return p[a] * p[b] - p[a + b]
    raise ValidationError("only compositions with one or two parts are supported")
