"""Moments and samples of Gaussian order statistics.

``N_{i:lambda}`` is the i-th smallest of ``lambda`` i.i.d. standard normals
(rank 1 is the minimum). Its density is

    lambda! / ((i-1)! (lambda-i)!) * phi(x) * Phi(x)^(i-1) * (1 - Phi(x))^(lambda-i)

which we evaluate entirely in the log domain with ``log_ndtr`` so the
``(1 - Phi)^(lambda-1)`` factor cannot underflow for large ``lambda``.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import integrate, special

from csa_lab.errors import ConfigurationError, QuadratureAccuracyError

QUADRATURE = "quadrature"
MONTECARLO = "montecarlo"

# E(N^k) of a standard normal, k = 1..4
_STANDARD_NORMAL_MOMENTS = (0.0, 1.0, 0.0, 3.0)


@dataclass(frozen=True)
class OrderStatSpec:
    lam: int
    rank: int = 1

    def __post_init__(self):
        if int(self.lam) != self.lam or self.lam < 1:
            raise ConfigurationError(f"lambda must be a positive integer, got {self.lam}")
        if int(self.rank) != self.rank or not 1 <= self.rank <= self.lam:
            raise ConfigurationError(
                f"rank must be an integer in [1, {self.lam}], got {self.rank}"
            )


@dataclass(frozen=True)
class OrderStatMoments:
    """Raw moments ``E(N_{i:lambda}^k)`` for k = 1..k_max.

    Moments above ``k_max`` are ``None``. ``errors`` holds one absolute
    error estimate per computed moment (quadrature error bound, or the
    Monte Carlo standard error).
    """

    spec: OrderStatSpec
    m1: float
    m2: float | None
    m3: float | None
    m4: float | None
    method: str
    errors: tuple[float, ...]

    @property
    def abs_error_bound(self) -> float:
        return max(self.errors)

    @property
    def k_max(self) -> int:
        return len(self.errors)

    def moment(self, k: int) -> float:
        value = (self.m1, self.m2, self.m3, self.m4)[k - 1]
        if value is None:
            raise ConfigurationError(f"moment k={k} was not computed (k_max={self.k_max})")
        return value

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(self.moment(k) for k in range(1, self.k_max + 1))


def _from_values(spec, values, method, errors) -> OrderStatMoments:
    padded = list(values) + [None] * (4 - len(values))
    return OrderStatMoments(spec, *padded, method=method, errors=tuple(errors))


def log_density(x, spec: OrderStatSpec):
    """Log-density of ``N_{rank:lam}`` evaluated at ``x``."""
    lam, i = spec.lam, spec.rank
    log_coef = special.gammaln(lam + 1) - special.gammaln(i) - special.gammaln(lam - i + 1)
    x = np.asarray(x, dtype=float)
    out = log_coef - 0.5 * x * x - 0.5 * math.log(2.0 * math.pi)
    if i > 1:
        out = out + (i - 1) * special.log_ndtr(x)
    if lam > i:
        out = out + (lam - i) * special.log_ndtr(-x)
    return out


def _center(spec: OrderStatSpec) -> float:
    # Blom's approximation of E(N_{i:lambda}); only used as a split point
    return float(special.ndtri((spec.rank - 0.375) / (spec.lam + 0.25)))


@functools.lru_cache(maxsize=1024)
def _quadrature_cached(lam: int, rank: int, k_max: int, tol: float) -> OrderStatMoments:
    spec = OrderStatSpec(lam, rank)
    if lam == 1:
        return _from_values(spec, _STANDARD_NORMAL_MOMENTS[:k_max], QUADRATURE, [0.0] * k_max)

    split = _center(spec)
    values, errors = [], []
    for k in range(1, k_max + 1):

        def integrand(x, k=k):
            return x**k * math.exp(float(log_density(x, spec)))

        total, err = 0.0, 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for lo, hi in ((-np.inf, split), (split, np.inf)):
                val, e = integrate.quad(integrand, lo, hi, epsabs=tol / 8, epsrel=0.0, limit=200)
                total += val
                err += e
        if not err <= tol:
            raise QuadratureAccuracyError(
                f"E(N_{{{rank}:{lam}}}^{k}) did not reach tol={tol:g}; best bound {err:.3g}",
                bound=err,
            )
        values.append(total)
        errors.append(err)
    return _from_values(spec, values, QUADRATURE, errors)


def moments_quadrature(spec: OrderStatSpec, k_max: int = 4, tol: float = 1e-10) -> OrderStatMoments:
    """Moments of ``N_{rank:lam}`` by adaptive quadrature on the whole real line.

    Raises QuadratureAccuracyError when the estimated absolute error of any
    moment exceeds ``tol``. Results are deterministic and cached.
    """
    if not 1 <= k_max <= 4:
        raise ConfigurationError(f"k_max must be in [1, 4], got {k_max}")
    if not tol > 0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    return _quadrature_cached(int(spec.lam), int(spec.rank), int(k_max), float(tol))


def sample_order_stat(spec: OrderStatSpec, rng: np.random.Generator) -> float:
    """One draw of ``N_{rank:lam}``: the rank-th smallest of ``lam`` fresh normals."""
    draws = rng.standard_normal(spec.lam)
    return float(np.partition(draws, spec.rank - 1)[spec.rank - 1])


def sample_order_stats(
    spec: OrderStatSpec, size: int, rng: np.random.Generator, chunk: int = 1 << 20
) -> np.ndarray:
    """``size`` independent draws of ``N_{rank:lam}``, generated in chunks."""
    out = np.empty(size)
    per_chunk = max(1, chunk // spec.lam)
    for start in range(0, size, per_chunk):
        m = min(per_chunk, size - start)
        draws = rng.standard_normal((m, spec.lam))
        if spec.rank == 1:
            out[start : start + m] = draws.min(axis=1)
        elif spec.rank == spec.lam:
            out[start : start + m] = draws.max(axis=1)
        else:
            out[start : start + m] = np.partition(draws, spec.rank - 1, axis=1)[:, spec.rank - 1]
    return out


def moments_montecarlo(
    spec: OrderStatSpec, samples: int, rng: np.random.Generator, k_max: int = 4
) -> OrderStatMoments:
    """Sample moments with their standard errors as the error estimates."""
    x = sample_order_stats(spec, samples, rng)
    values, errors = [], []
    for k in range(1, k_max + 1):
        xk = x**k
        values.append(float(xk.mean()))
        errors.append(float(xk.std(ddof=1) / math.sqrt(samples)))
    return _from_values(spec, values, MONTECARLO, errors)


def cdf(x, spec: OrderStatSpec):
    """CDF of ``N_{rank:lam}`` via the binomial identity on Phi(x)."""
    # P(N_{i:lam} <= x) = P(Binomial(lam, Phi(x)) >= i)
    return special.betainc(spec.rank, spec.lam - spec.rank + 1, special.ndtr(np.asarray(x, float)))


def expected_chi_norm(n: int) -> float:
    """E||N(0, I_n)|| = sqrt(2) Gamma((n+1)/2) / Gamma(n/2), evaluated via log-Gamma."""
    if int(n) != n or n < 1:
        raise ConfigurationError(f"n must be a positive integer, got {n}")
    return math.sqrt(2.0) * math.exp(math.lgamma((n + 1) / 2.0) - math.lgamma(n / 2.0))


def moment_table_rows(tables: Iterable[OrderStatMoments]) -> list[dict]:
    """Flatten moment records into rows (lambda, rank, k, value, method, abs_error_bound)."""
    rows = []
    for m in tables:
        for k in range(1, m.k_max + 1):
            rows.append(
                {
                    "lambda": m.spec.lam,
                    "rank": m.spec.rank,
                    "k": k,
                    "value": m.moment(k),
                    "method": m.method,
                    "abs_error_bound": m.errors[k - 1],
                }
            )
    return rows
