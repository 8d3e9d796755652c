"""Ensembles of independent CSA-ES runs and their summary estimators."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from csa_lab.errors import ConfigurationError, ContractError, NumericalDomainError
from csa_lab.es_core import (
    LINEAR,
    MODES,
    AlgorithmParams,
    ObjectiveSpec,
    init_state,
    run_rng,
    shortcut_trajectory,
    step,
)
from csa_lab.theory import TheoryPrediction

# 10^-i and 1 - 10^-i for i = 1..4, plus the median
FIGURE1_LEVELS = (1e-4, 1e-3, 1e-2, 1e-1, 0.5, 0.9, 0.99, 0.999, 0.9999)


def default_burn_in(c: float) -> int:
    """Ten path lifetimes (1/c each); leaves a p_0 weight below e^-10."""
    return math.ceil(10.0 / c)


def record_grid(t_max: int, per_decade: int = 20) -> np.ndarray:
    """Every t up to 100, then roughly geometric spacing up to and including t_max."""
    head = np.arange(0, min(t_max, 100) + 1)
    if t_max <= 100:
        return head
    decades = math.log10(t_max / 100.0)
    tail = np.geomspace(100, t_max, num=max(2, int(math.ceil(decades * per_decade)) + 1))
    return np.unique(np.concatenate([head, np.round(tail).astype(int), [t_max]]))


@dataclass(frozen=True)
class EnsembleConfig:
    params: AlgorithmParams
    runs: int
    t_max: int
    objective: ObjectiveSpec = LINEAR
    mode: str = "shortcut"
    burn_in: int | None = None
    master_seed: int = 2012
    quantile_levels: tuple[float, ...] = FIGURE1_LEVELS
    # start of the window used for the |[X]_1| divergence rate; None -> t_max // 2
    x_burn_in: int | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigurationError(f"runs must be positive, got {self.runs}")
        if self.t_max < 1:
            raise ConfigurationError(f"t_max must be positive, got {self.t_max}")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", min(default_burn_in(self.params.c), self.t_max - 1))
        if not 0 <= self.burn_in < self.t_max:
            raise ConfigurationError(f"burn_in must satisfy 0 <= burn_in < t_max, got {self.burn_in}")
        levels = tuple(float(q) for q in self.quantile_levels)
        if not levels or any(not 0.0 < q < 1.0 for q in levels) or list(levels) != sorted(levels):
            raise ConfigurationError("quantile levels must be sorted and inside (0, 1)")
        object.__setattr__(self, "quantile_levels", levels)
        if self.x_burn_in is None:
            object.__setattr__(self, "x_burn_in", max(self.t_max // 2, 1))
        if not 0 < self.x_burn_in < self.t_max:
            raise ConfigurationError(f"x_burn_in must lie in (0, t_max), got {self.x_burn_in}")

    @property
    def batch_length(self) -> int:
        return default_burn_in(self.params.c)


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


@dataclass
class EnsembleResult:
    config: EnsembleConfig
    t_grid: np.ndarray
    # (len(t_grid), len(levels)) quantiles of ln(sigma_t / sigma_0)
    quantile_series: np.ndarray
    # (kept runs, len(t_grid)) ln(sigma_t / sigma_0) per run
    log_sigma_grid: np.ndarray
    run_index: np.ndarray
    empirical_rate: Estimate
    inc_mean: Estimate | None
    inc_var: Estimate | None
    x_rate: Estimate | None
    n_excluded: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def levels(self) -> tuple[float, ...]:
        return self.config.quantile_levels

    def quantile_rows(self) -> list[dict]:
        return [
            {"t": int(t), "level": q, "value": float(v)}
            for t, row in zip(self.t_grid, self.quantile_series)
            for q, v in zip(self.levels, row)
        ]

    def at(self, t: int) -> np.ndarray:
        """Per-run ln(sigma_t / sigma_0) at a recorded time ``t``."""
        idx = np.searchsorted(self.t_grid, t)
        if idx >= len(self.t_grid) or self.t_grid[idx] != t:
            raise ConfigurationError(f"t={t} is not on the recorded grid")
        return self.log_sigma_grid[:, idx]


@dataclass
class _RunSummary:
    log_sigma_grid: np.ndarray
    batch_s1: np.ndarray
    batch_s2: np.ndarray
    log_abs_x1: tuple[float, float] | None


def _full_trajectory(config: EnsembleConfig, rng: np.random.Generator):
    params = config.params
    state = init_state(params, rng)
    inc = np.empty(config.t_max)
    log_sigma = np.empty(config.t_max)
    log_abs_x1 = np.empty(config.t_max)
    for t in range(config.t_max):
        state, inc[t], _ = step(state, params, rng, config.objective, config.mode)
        log_sigma[t] = state.log_sigma
        with np.errstate(divide="ignore"):
            log_abs_x1[t] = math.log(abs(state.x[0])) if state.x[0] != 0.0 else -math.inf
    return inc, log_sigma, log_abs_x1


def _simulate_run(config: EnsembleConfig, run_index: int, grid: np.ndarray) -> _RunSummary:
    rng = run_rng(config.master_seed, run_index)
    track_x = config.params.c == 1.0
    if config.mode == "shortcut":
        traj = shortcut_trajectory(config.params, config.t_max, rng, track_x=track_x)
        inc, log_sigma, log_x = traj.increments, traj.log_sigma, traj.log_abs_x1
    else:
        inc, log_sigma, log_x = _full_trajectory(config, rng)
    if not np.all(np.isfinite(log_sigma)):
        raise NumericalDomainError(f"non-finite log step-size in run {run_index}")

    series = np.concatenate(([0.0], log_sigma))[grid]
    b = config.batch_length
    post = inc[config.burn_in :]
    nb = len(post) // b
    batches = post[: nb * b].reshape(nb, b)
    x_pair = None
    if track_x and log_x is not None:
        x_pair = (float(log_x[config.x_burn_in - 1]), float(log_x[-1]))
    return _RunSummary(series, batches.sum(axis=1), (batches * batches).sum(axis=1), x_pair)


def _thread_count() -> int:
    env = os.environ.get("CSA_LAB_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigurationError(f"CSA_LAB_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise ConfigurationError(f"CSA_LAB_THREADS must be >= 1, got {value}")
        return value
    return min(8, os.cpu_count() or 1)


def _mean_se(values: np.ndarray) -> Estimate:
    if len(values) < 2:
        return Estimate(float(np.mean(values)), math.nan)
    return Estimate(float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(len(values))))


def run_ensemble(config: EnsembleConfig) -> EnsembleResult:
    """Simulate ``config.runs`` independent trajectories and aggregate them.

    Run ``i`` draws only from the stream keyed ``(master_seed, i)``, and the
    reduction is ordered by run index, so results do not depend on the
    thread count and the first k runs of a larger ensemble are unchanged.
    """
    grid = record_grid(config.t_max)
    indices = list(range(config.runs))

    def work(i):
        try:
            return _simulate_run(config, i, grid)
        except NumericalDomainError as exc:
            return exc

    threads = _thread_count()
    if threads > 1 and config.runs > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, indices))
    else:
        outcomes = [work(i) for i in indices]

    kept = [(i, o) for i, o in zip(indices, outcomes) if isinstance(o, _RunSummary)]
    warnings = [str(o) for o in outcomes if not isinstance(o, _RunSummary)]
    if not kept:
        raise NumericalDomainError("every run produced a non-finite log step-size")

    if config.burn_in < default_burn_in(config.params.c):
        warnings.append(
            f"burn_in={config.burn_in} is below ceil(10/c)={default_burn_in(config.params.c)};"
            " increment statistics may not be stationary"
        )

    log_sigma_grid = np.stack([o.log_sigma_grid for _, o in kept])
    quantiles = np.quantile(log_sigma_grid, config.quantile_levels, axis=0, method="inverted_cdf").T

    final = log_sigma_grid[:, -1] / config.t_max
    rate = _mean_se(final)

    inc_mean, inc_var = _batch_means([o.batch_s1 for _, o in kept], [o.batch_s2 for _, o in kept], config.batch_length)
    if inc_mean is None:
        warnings.append("too few post-burn-in increments for a single batch")

    x_rate = None
    pairs = [o.log_abs_x1 for _, o in kept if o.log_abs_x1 is not None]
    if pairs:
        arr = np.asarray(pairs)
        per_run = (arr[:, 1] - arr[:, 0]) / (config.t_max - config.x_burn_in)
        if np.all(np.isfinite(per_run)):
            x_rate = _mean_se(per_run)
            # ln|X_t / sigma_t| relaxes like exp(-rate * t); the window must start well after that
            diverging = rate.value > 4.0 * rate.stderr
            if diverging and config.x_burn_in * rate.value < 10.0:
                warnings.append(
                    f"x_burn_in={config.x_burn_in} is short for rate {rate.value:.3g};"
                    " the |[X]_1| rate may carry start-up bias"
                )
        else:
            warnings.append("ln|[X]_1| hit -inf in the x-rate window; x-rate not reported")

    return EnsembleResult(
        config=config,
        t_grid=grid,
        quantile_series=quantiles,
        log_sigma_grid=log_sigma_grid,
        run_index=np.array([i for i, _ in kept]),
        empirical_rate=rate,
        inc_mean=inc_mean,
        inc_var=inc_var,
        x_rate=x_rate,
        n_excluded=len(outcomes) - len(kept),
        warnings=warnings,
    )


def _batch_means(s1_list, s2_list, b: int) -> tuple[Estimate | None, Estimate | None]:
    """Pooled mean and variance of increments with batch-means standard errors.

    Each batch is ``b`` consecutive post-burn-in increments of one run;
    batches never span two runs. The variance estimate is the average over
    batches of the mean squared deviation from the pooled mean.
    """
    s1 = np.concatenate(s1_list)
    s2 = np.concatenate(s2_list)
    nb = len(s1)
    if nb == 0:
        return None, None
    batch_mean = s1 / b
    mu = float(batch_mean.mean())
    batch_var = s2 / b - 2.0 * mu * batch_mean + mu * mu
    if nb < 2:
        return Estimate(mu, math.nan), Estimate(float(batch_var.mean()), math.nan)
    return _mean_se(batch_mean), _mean_se(batch_var)


def estimate_rate(result: EnsembleResult, t_max: int | None = None) -> Estimate:
    """Mean and standard error over runs of (1/t) ln(sigma_t / sigma_0)."""
    t = result.config.t_max if t_max is None else t_max
    if t < 1:
        raise ConfigurationError("t_max must be positive")
    return _mean_se(result.at(t) / t)


@dataclass(frozen=True)
class IncrementStats:
    mean: Estimate
    var: Estimate
    warnings: tuple[str, ...] = ()


def estimate_increment_stats(config: EnsembleConfig, result: EnsembleResult | None = None) -> IncrementStats:
    """Stationary mean and variance of ln(sigma_{t+1}/sigma_t) for ``config``."""
    result = run_ensemble(config) if result is None else result
    if result.inc_mean is None:
        raise ConfigurationError("t_max - burn_in is shorter than one batch")
    return IncrementStats(result.inc_mean, result.inc_var, tuple(result.warnings))


@dataclass(frozen=True)
class Verdict:
    quantity: str
    theory: float
    empirical: float
    stderr: float
    z: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "theory": self.theory,
            "empirical": self.empirical,
            "stderr": self.stderr,
            "z": self.z,
            "pass": self.passed,
        }


def _verdict(name: str, theory: float, est: Estimate, z_threshold: float) -> Verdict:
    diff = abs(est.value - theory)
    if est.stderr > 0.0 and math.isfinite(est.stderr):
        z = diff / est.stderr
    else:
        z = 0.0 if diff == 0.0 else math.inf
    return Verdict(name, theory, est.value, est.stderr, z, bool(z <= z_threshold))


def compare(theory: TheoryPrediction, empirical: EnsembleResult, z_threshold: float = 4.0) -> list[Verdict]:
    """z-scores |empirical - theory| / stderr for each available quantity.

    The comparison is absolute, so a zero predicted rate is tested as
    |empirical| <= z_threshold * stderr. The |[X]_1| rate is compared only
    when it was measured (c = 1) and the predicted rate is positive.
    """
    if theory.params != empirical.config.params:
        raise ContractError(
            f"theory is for {theory.params}, ensemble was run with {empirical.config.params}"
        )
    out = [_verdict("rate", theory.rate, empirical.empirical_rate, z_threshold)]
    if empirical.inc_mean is not None:
        out.append(_verdict("increment_mean", theory.rate, empirical.inc_mean, z_threshold))
        out.append(_verdict("increment_variance", theory.variance_log_inc, empirical.inc_var, z_threshold))
    if empirical.x_rate is not None and theory.rate > 0.0:
        out.append(_verdict("x_rate", theory.rate, empirical.x_rate, z_threshold))
    return out
