"""Closed-form predictions for the (1,lambda)-CSA-ES on linear functions.

Every function takes the order-statistic moments of ``N_{1:lambda}`` as an
input instead of recomputing them, so the formulas stay deterministic for a
fixed moment table. All formulas are for the squared-length update rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from csa_lab.errors import ConfigurationError, ContractError
from csa_lab.es_core import SQUARED_LENGTH, AlgorithmParams
from csa_lab.order_stats import OrderStatMoments, OrderStatSpec, moments_quadrature


def _check_moments(moments: OrderStatMoments, lam: int | None, needed: int) -> None:
    if moments.spec.rank != 1:
        raise ContractError(f"expected moments of the minimum (rank 1), got rank {moments.spec.rank}")
    if lam is not None and moments.spec.lam != lam:
        raise ContractError(f"moments are for lambda={moments.spec.lam}, formula asked for lambda={lam}")
    if moments.k_max < needed:
        raise ContractError(f"need moments up to k={needed}, only {moments.k_max} available")


def _check_c(c: float) -> None:
    if not 0.0 < c <= 1.0:
        raise ConfigurationError(f"cumulation parameter must satisfy 0 < c <= 1, got c={c}")


def rate_no_cumulation(n: int, lam: int, d_sigma: float, moments: OrderStatMoments) -> float:
    """Divergence rate at c = 1: (E(N_{1:lam}^2) - 1) / (2 d_sigma n)."""
    _check_moments(moments, lam, 2)
    return (moments.m2 - 1.0) / (2.0 * d_sigma * n)


def rate_cumulation(n: int, lam: int, c: float, d_sigma: float, moments: OrderStatMoments) -> float:
    """Limit of (1/t) ln(sigma_t / sigma_0) for any 0 < c <= 1.

    (2 (1 - c) E(N)^2 + c (E(N^2) - 1)) / (2 d_sigma n), N = N_{1:lam}.
    """
    _check_c(c)
    _check_moments(moments, lam, 2)
    m1, m2 = moments.m1, moments.m2
    return (2.0 * (1.0 - c) * m1 * m1 + c * (m2 - 1.0)) / (2.0 * d_sigma * n)


def e_p1_sq_limit(c: float, moments: OrderStatMoments) -> float:
    """Stationary E([p]_1^2) = E(N^2) + (2 - 2c)/c E(N)^2."""
    _check_c(c)
    _check_moments(moments, None, 2)
    return moments.m2 + (2.0 - 2.0 * c) / c * moments.m1**2


@dataclass(frozen=True)
class KTerms:
    k4: float
    k31: float
    k22: float
    k211: float
    k1111: float

    def total(self) -> float:
        return self.k4 + self.k31 + self.k22 + self.k211 + self.k1111


def e_p1_quad_limit(c: float, moments: OrderStatMoments) -> tuple[float, KTerms]:
    """Stationary E([p]_1^4) and its five contributing terms, with a = 1 - c."""
    if not c > 0.0:
        raise ConfigurationError(f"E([p]_1^4) limit needs c > 0, got c={c}")
    _check_c(c)
    _check_moments(moments, None, 4)
    m1, m2, m3, m4 = moments.as_tuple()
    a = 1.0 - c
    if a == 0.0:
        return m4, KTerms(m4, 0.0, 0.0, 0.0, 0.0)
    a2, a3, a4 = a * a, a**3, a**4
    terms = KTerms(
        k4=m4,
        k31=4.0 * a * (1.0 + a + 2.0 * a2) / (1.0 - a3) * m3 * m1,
        k22=6.0 * a2 / (1.0 - a2) * m2 * m2,
        k211=12.0 * a3 * (1.0 + 2.0 * a + 3.0 * a2) / ((1.0 - a2) * (1.0 - a3)) * m2 * m1 * m1,
        k1111=24.0 * a**6 / ((1.0 - a) * (1.0 - a2) * (1.0 - a3)) * m1**4,
    )
    prefactor = (1.0 - a2) ** 2 / (1.0 - a4)
    return prefactor * terms.total(), terms


def variance_log_increment(n: int, c: float, d_sigma: float, e_p1_sq: float, e_p1_quad: float) -> float:
    """Var ln(sigma_{t+1}/sigma_t) from the first two even moments of [p_{t+1}]_1."""
    excess = e_p1_quad - e_p1_sq**2
    # allow rounding noise when the first coordinate is (nearly) degenerate
    if excess < -1e-12 * max(1.0, e_p1_quad):
        raise ContractError(
            f"E([p]_1^4)={e_p1_quad!r} < E([p]_1^2)^2={e_p1_sq**2!r}: moments are inconsistent"
        )
    return c * c / (4.0 * d_sigma**2 * n * n) * (max(excess, 0.0) + 2.0 * (n - 1))


def expected_log_sigma(params: AlgorithmParams, moments: OrderStatMoments, t_max: int) -> np.ndarray:
    """Exact E ln(sigma_t / sigma_0) for t = 1..t_max, from p_0 ~ N(0, I_n).

    Propagates the mean and second moment of [p_t]_1 through the path
    recursion instead of using their limits, so the finite-horizon transient
    of the Cesaro rate is visible: ``expected_log_sigma(...)[-1] / t_max``
    is what the empirical (1/t) ln(sigma_t/sigma_0) estimates.
    """
    _check_moments(moments, params.lam, 2)
    if params.update_rule != SQUARED_LENGTH:
        raise ConfigurationError("closed forms are available for the squared-length rule only")
    a, s = params.path_decay, params.path_gain
    m1, m2 = moments.m1, moments.m2
    mean, second = 0.0, 1.0
    out = np.empty(t_max)
    for t in range(t_max):
        second = a * a * second + 2.0 * a * s * mean * m1 + s * s * m2
        mean = a * mean + s * m1
        out[t] = second - 1.0
    return params.c / (2.0 * params.d_sigma * params.n) * np.cumsum(out)


@dataclass(frozen=True)
class TheoryPrediction:
    params: AlgorithmParams
    rate: float
    e_p1_sq_limit: float
    e_p1_quad_limit: float
    k_terms: KTerms
    variance_log_inc: float
    # None when the rate is zero (ratio undefined)
    rel_std: float | None = field(default=None)

    @property
    def std_log_inc(self) -> float:
        return math.sqrt(self.variance_log_inc)

    def as_row(self) -> dict:
        p = self.params
        return {
            "n": p.n,
            "lambda": p.lam,
            "c": p.c,
            "d_sigma": p.d_sigma,
            "rate": self.rate,
            "e_p1_sq": self.e_p1_sq_limit,
            "e_p1_quad": self.e_p1_quad_limit,
            "k4": self.k_terms.k4,
            "k31": self.k_terms.k31,
            "k22": self.k_terms.k22,
            "k211": self.k_terms.k211,
            "k1111": self.k_terms.k1111,
            "variance": self.variance_log_inc,
            "rel_std": self.rel_std,
        }


def predict(params: AlgorithmParams, moments: OrderStatMoments | None = None) -> TheoryPrediction:
    """All closed-form predictions for one parameter set."""
    if params.update_rule != SQUARED_LENGTH:
        raise ConfigurationError("closed forms are available for the squared-length rule only")
    if moments is None:
        moments = moments_quadrature(OrderStatSpec(params.lam, 1), 4)
    _check_moments(moments, params.lam, 4)
    n, c, d = params.n, params.c, params.d_sigma
    rate = rate_cumulation(n, params.lam, c, d, moments)
    sq = e_p1_sq_limit(c, moments)
    quad, terms = e_p1_quad_limit(c, moments)
    var = variance_log_increment(n, c, d, sq, quad)
    rel = math.sqrt(var) / rate if rate > 0.0 else None
    return TheoryPrediction(params, rate, sq, quad, terms, var, rel)


@dataclass(frozen=True)
class ScalingSpec:
    """c = 1 / (1 + n^alpha) over a grid of dimensions."""

    alpha: float
    n_grid: tuple[int, ...]

    def __post_init__(self):
        if not self.alpha >= 0.0:
            raise ConfigurationError(f"alpha must be non-negative, got {self.alpha}")
        grid = tuple(int(v) for v in self.n_grid)
        if not grid or any(v < 1 for v in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError("n_grid must be a non-empty, strictly increasing list of positive integers")
        object.__setattr__(self, "n_grid", grid)

    def c_for(self, n: int) -> float:
        return 1.0 / (1.0 + n**self.alpha)


@dataclass(frozen=True)
class RelStdRow:
    n: int
    c: float
    rate: float
    std: float
    rel_std: float | None


def _rel_std_rows(pairs, lam: int, d_sigma: float) -> list[RelStdRow]:
    moments = moments_quadrature(OrderStatSpec(lam, 1), 4)
    rows = []
    for n, c in pairs:
        pred = predict(AlgorithmParams(n=n, lam=lam, c=c, d_sigma=d_sigma), moments)
        rows.append(RelStdRow(n, c, pred.rate, pred.std_log_inc, pred.rel_std))
    return rows


def relative_std_curve(spec: ScalingSpec, lam: int, d_sigma: float = 1.0) -> list[RelStdRow]:
    """Std / mean of ln(sigma_{t+1}/sigma_t) at stationarity with c = 1/(1 + n^alpha)."""
    return _rel_std_rows(((n, spec.c_for(n)) for n in spec.n_grid), lam, d_sigma)


def relative_std_curve_fixed_c(c: float, n_grid, lam: int, d_sigma: float = 1.0) -> list[RelStdRow]:
    """Same as ``relative_std_curve`` but with one cumulation parameter for every n."""
    _check_c(c)
    return _rel_std_rows(((int(n), c) for n in n_grid), lam, d_sigma)
