"""(1,lambda)-ES with cumulative step-size adaptation, identity covariance.

Step-size is kept as ``log_sigma`` throughout. On linear objectives sigma
grows geometrically and would overflow a double long before ``ln sigma``
leaves a comfortable range.

Two ways of producing the selected step are provided:

* ``select_step_full`` samples lambda children and evaluates the objective.
* ``select_step_shortcut`` uses the known law of the selected step on
  ``f(x) = g(x_1)``: first coordinate is the minimum of lambda normals, the
  remaining coordinates are untouched standard normals.

The shortcut does not depend on the state, so whole trajectories can be
generated in one vectorised pass (``shortcut_trajectory``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import signal

from csa_lab.errors import ConfigurationError, NumericalDomainError
from csa_lab.order_stats import expected_chi_norm

SQUARED_LENGTH = "squared_length"
NORM_LENGTH = "norm_length"
UPDATE_RULES = (SQUARED_LENGTH, NORM_LENGTH)
MODES = ("full", "shortcut", "random")


@dataclass(frozen=True)
class AlgorithmParams:
    n: int
    lam: int
    c: float = 1.0
    d_sigma: float = 1.0
    update_rule: str = SQUARED_LENGTH

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"n must be a positive integer, got {self.n}")
        if int(self.lam) != self.lam or self.lam < 1:
            raise ConfigurationError(f"lambda must be an integer >= 1, got {self.lam}")
        if not 0.0 < self.c <= 1.0:
            raise ConfigurationError(f"cumulation parameter must satisfy 0 < c <= 1, got c={self.c}")
        if not self.d_sigma > 0.0:
            raise ConfigurationError(f"d_sigma must be positive, got {self.d_sigma}")
        if self.update_rule not in UPDATE_RULES:
            raise ConfigurationError(
                f"update_rule must be one of {UPDATE_RULES}, got {self.update_rule!r}"
            )

    @property
    def path_decay(self) -> float:
        return 1.0 - self.c

    @property
    def path_gain(self) -> float:
        return math.sqrt(self.c * (2.0 - self.c))


@dataclass
class EsState:
    t: int
    x: np.ndarray
    log_sigma: float
    p: np.ndarray

    @property
    def sigma(self) -> float:
        try:
            return math.exp(self.log_sigma)
        except OverflowError:
            return math.inf


class SelectedStep(NamedTuple):
    xi_star: np.ndarray
    # winning child index for full selection, None otherwise
    index: int | None = None


# Strictly increasing scalar transforms g for f(x) = g(x_1).
TRANSFORMS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": lambda v: v,
    "exp_shift": lambda v: np.exp(v - 2.0),
    "cubic": lambda v: v**3,
}


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str = "linear_first_coordinate"
    transform: str = "identity"

    def __post_init__(self):
        if self.kind not in ("linear_first_coordinate", "composed"):
            raise ConfigurationError(f"unknown objective kind {self.kind!r}")
        if self.transform not in TRANSFORMS:
            raise ConfigurationError(
                f"unknown transform {self.transform!r}; choose from {sorted(TRANSFORMS)}"
            )
        if self.kind == "linear_first_coordinate" and self.transform != "identity":
            raise ConfigurationError("linear_first_coordinate takes no transform; use kind='composed'")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Objective values for an array of points, one per row."""
        points = np.atleast_2d(points)
        with np.errstate(over="ignore", invalid="ignore"):
            return TRANSFORMS[self.transform](points[:, 0])


LINEAR = ObjectiveSpec()


def run_rng(master_seed: int, run_index: int = 0) -> np.random.Generator:
    """Independent stream for one run, keyed by (master_seed, run_index).

    Streams for different run indices are independent of how many runs an
    ensemble contains, so extending an ensemble leaves earlier runs intact.
    """
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(run_index),))
    return np.random.Generator(np.random.PCG64(seq))


def init_state(
    params: AlgorithmParams,
    rng: np.random.Generator,
    x0: np.ndarray | None = None,
    sigma0: float = 1.0,
) -> EsState:
    """t = 0, ``log_sigma = ln sigma0``, ``p_0 ~ N(0, I_n)``."""
    x0 = np.zeros(params.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x0.shape != (params.n,):
        raise ConfigurationError(f"x0 has shape {x0.shape}, expected ({params.n},)")
    if not sigma0 > 0.0:
        raise ConfigurationError(f"sigma0 must be positive, got {sigma0}")
    p0 = rng.standard_normal(params.n)
    return EsState(t=0, x=x0, log_sigma=math.log(sigma0), p=p0)


def select_step_full(
    state: EsState, params: AlgorithmParams, objective: ObjectiveSpec, rng: np.random.Generator
) -> SelectedStep:
    """Sample lambda children around ``state.x`` and return the best child's mutation.

    Exact ties between identical points go to the lowest child index. Equal
    f-values at distinct points mean the transform lost resolution (e.g.
    ``exp`` underflow), and raise NumericalDomainError instead.
    """
    xi = rng.standard_normal((params.lam, params.n))
    with np.errstate(over="ignore", invalid="ignore"):
        children = state.x + state.sigma * xi
    values = objective(children)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NumericalDomainError(
            f"non-finite objective value for child {int(bad[0])} at t={state.t}"
        )
    best = int(np.argmin(values))
    tied = np.flatnonzero(values == values[best])
    if tied.size > 1 and np.any(children[tied, 0] != children[best, 0]):
        # distinct points with equal f-values: the transform has saturated
        raise NumericalDomainError(
            f"objective cannot separate children {tied.tolist()} at t={state.t}"
        )
    return SelectedStep(xi[best].copy(), best)


def select_step_shortcut(params: AlgorithmParams, rng: np.random.Generator) -> SelectedStep:
    """Selected step on a linear function, drawn from its known law.

    Draws one block of ``lam + n - 1`` normals: the first ``lam`` give the
    minimum for coordinate 1, the rest are coordinates 2..n.
    """
    block = rng.standard_normal(params.lam + params.n - 1)
    xi = np.empty(params.n)
    xi[0] = block[: params.lam].min()
    xi[1:] = block[params.lam :]
    return SelectedStep(xi)


def select_step_random(params: AlgorithmParams, rng: np.random.Generator) -> SelectedStep:
    """Uniformly random child, i.e. no selection: a plain N(0, I_n) vector."""
    block = rng.standard_normal((params.lam, params.n))
    k = int(rng.integers(params.lam))
    return SelectedStep(block[k].copy(), k)


def update_path(p: np.ndarray, xi_star, c: float) -> np.ndarray:
    """``(1 - c) p + sqrt(c (2 - c)) xi_star``; returns ``xi_star`` itself (copied) at c = 1."""
    xi = xi_star.xi_star if isinstance(xi_star, SelectedStep) else np.asarray(xi_star, float)
    if not 0.0 < c <= 1.0:
        raise ConfigurationError(f"cumulation parameter must satisfy 0 < c <= 1, got c={c}")
    if c == 1.0:
        return xi.copy()
    return (1.0 - c) * p + math.sqrt(c * (2.0 - c)) * xi


def log_sigma_increment(norm_sq, params: AlgorithmParams):
    """ln(sigma_{t+1}/sigma_t) as a function of ||p_{t+1}||^2 (scalar or array)."""
    if params.update_rule == SQUARED_LENGTH:
        return params.c / (2.0 * params.d_sigma) * (norm_sq / params.n - 1.0)
    chi = expected_chi_norm(params.n)
    return params.c / params.d_sigma * (np.sqrt(norm_sq) / chi - 1.0)


def update_log_sigma(log_sigma: float, p_next: np.ndarray, params: AlgorithmParams) -> float:
    p_next = np.asarray(p_next, dtype=float)
    if p_next.shape != (params.n,):
        raise ConfigurationError(f"path has shape {p_next.shape}, expected ({params.n},)")
    return log_sigma + float(log_sigma_increment(np.sum(p_next * p_next), params))


def step(
    state: EsState,
    params: AlgorithmParams,
    rng: np.random.Generator,
    objective: ObjectiveSpec = LINEAR,
    mode: str = "shortcut",
) -> tuple[EsState, float, SelectedStep]:
    """One iteration: selection, path, step-size, then x (which uses the old sigma).

    Returns the new state, the realised log step-size increment, and the
    selected step.
    """
    if mode == "full":
        sel = select_step_full(state, params, objective, rng)
    elif mode == "shortcut":
        sel = select_step_shortcut(params, rng)
    elif mode == "random":
        sel = select_step_random(params, rng)
    else:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")

    p_next = update_path(state.p, sel, params.c)
    inc = float(log_sigma_increment(np.sum(p_next * p_next), params))
    log_sigma = state.log_sigma + inc
    if not math.isfinite(log_sigma):
        raise NumericalDomainError(f"log step-size became non-finite at t={state.t + 1}")
    with np.errstate(over="ignore", invalid="ignore"):
        x_next = state.x + state.sigma * sel.xi_star
    new = EsState(t=state.t + 1, x=x_next, log_sigma=log_sigma, p=p_next)
    return new, inc, sel


@dataclass
class Trajectory:
    """Per-iteration series for t = 1..T of a single run.

    ``log_sigma[t-1]`` is ln(sigma_t / sigma_0); ``increments[t-1]`` is
    ln(sigma_t / sigma_{t-1}); ``log_abs_x1[t-1]`` is ln|[X_t]_1| with X_0 = 0.
    """

    increments: np.ndarray
    log_sigma: np.ndarray
    norm_sq: np.ndarray
    xi1: np.ndarray
    log_abs_x1: np.ndarray | None = field(default=None)
    final_p: np.ndarray | None = field(default=None)


class _LogAbsAccumulator:
    """Running ln|S_t| for S_t = sum_{k<t} exp(log_weights[k]) * values[k].

    Summation is done blockwise against a running scale so that weights far
    beyond the double range never materialise.
    """

    def __init__(self, block: int = 256):
        self.block = block
        self.scale = 0.0
        self.acc = 0.0

    def feed(self, log_weights: np.ndarray, values: np.ndarray) -> np.ndarray:
        out = np.empty(len(values))
        for start in range(0, len(values), self.block):
            lw = log_weights[start : start + self.block]
            new_scale = max(self.scale, float(lw.max()))
            terms = np.exp(lw - new_scale) * values[start : start + self.block]
            partial = self.acc * math.exp(self.scale - new_scale) + np.cumsum(terms)
            with np.errstate(divide="ignore"):
                out[start : start + self.block] = np.log(np.abs(partial)) + new_scale
            self.scale, self.acc = new_scale, float(partial[-1])
        return out


def shortcut_trajectory(
    params: AlgorithmParams,
    t_max: int,
    rng: np.random.Generator,
    track_x: bool = False,
    chunk: int = 1 << 15,
) -> Trajectory:
    """Vectorised run of ``t_max`` shortcut-mode iterations from ``init_state``.

    Consumes ``rng`` in exactly the order that ``init_state`` followed by
    repeated ``step(..., mode="shortcut")`` would, and performs the same
    floating-point operations, so both paths give identical numbers.
    Starts from x0 = 0, sigma0 = 1. Time is processed in chunks of
    ``chunk`` iterations to bound memory.
    """
    n, lam, c = params.n, params.lam, params.c
    a, gain = params.path_decay, params.path_gain
    p = rng.standard_normal(n)
    inc = np.empty(t_max)
    log_sigma = np.empty(t_max)
    norm_sq = np.empty(t_max)
    xi1 = np.empty(t_max)
    log_abs_x1 = np.empty(t_max) if track_x else None
    x_acc = _LogAbsAccumulator() if track_x else None
    last_log_sigma = 0.0

    for start in range(0, t_max, chunk):
        stop = min(start + chunk, t_max)
        block = rng.standard_normal((stop - start, lam + n - 1))
        xi = np.empty((stop - start, n))
        xi[:, 0] = block[:, :lam].min(axis=1)
        xi[:, 1:] = block[:, lam:]
        del block
        if c == 1.0:
            path = xi
        else:
            path, _ = signal.lfilter([gain], [1.0, -a], xi, axis=0, zi=(a * p)[None, :])
        p = path[-1].copy()
        sl = slice(start, stop)
        norm_sq[sl] = np.sum(path * path, axis=1)
        inc[sl] = log_sigma_increment(norm_sq[sl], params)
        log_sigma[sl] = np.cumsum(np.concatenate(([last_log_sigma], inc[sl])))[1:]
        xi1[sl] = xi[:, 0]
        if track_x:
            # X_t = sum_{k<t} sigma_k xi_k
            log_sig_prev = np.concatenate(([last_log_sigma], log_sigma[start : stop - 1]))
            log_abs_x1[sl] = x_acc.feed(log_sig_prev, xi1[sl])
        last_log_sigma = float(log_sigma[stop - 1])

    return Trajectory(inc, log_sigma, norm_sq, xi1, log_abs_x1, final_p=p)
