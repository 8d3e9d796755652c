import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from csa_lab.errors import ConfigurationError, NumericalDomainError
from csa_lab.es_core import (
    NORM_LENGTH,
    TRANSFORMS,
    AlgorithmParams,
    EsState,
    ObjectiveSpec,
    SelectedStep,
    init_state,
    run_rng,
    select_step_full,
    select_step_shortcut,
    shortcut_trajectory,
    step,
    update_log_sigma,
    update_path,
)
from csa_lab.order_stats import OrderStatSpec, cdf, expected_chi_norm

finite = st.floats(-1e3, 1e3, allow_nan=False)


class FixedNormals:
    """Stand-in generator that returns preset normals in order."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        self.pos = 0

    def standard_normal(self, size):
        count = int(np.prod(size))
        out = self.values[self.pos : self.pos + count]
        self.pos += count
        return out.reshape(size)


@pytest.mark.parametrize(
    "kwargs",
    [dict(n=0, lam=2), dict(n=2, lam=0), dict(n=2, lam=2, c=0.0), dict(n=2, lam=2, c=1.5),
     dict(n=2, lam=2, d_sigma=0.0), dict(n=2, lam=2, update_rule="cube")],
)
def test_params_validation(kwargs):
    with pytest.raises(ConfigurationError):
        AlgorithmParams(**kwargs)


def test_init_state():
    params = AlgorithmParams(3, 4)
    s = init_state(params, run_rng(1), x0=np.zeros(3), sigma0=1.0)
    assert s.t == 0 and s.log_sigma == 0.0
    assert s.p.shape == (3,) and s.x.shape == (3,)
    again = init_state(params, run_rng(1), x0=np.zeros(3), sigma0=1.0)
    assert np.array_equal(s.p, again.p)


def test_init_state_tiny_sigma():
    s = init_state(AlgorithmParams(2, 2), run_rng(0), sigma0=1e-300)
    # ln(1e-300) to 30 digits: -690.775527898213705205397436405
    assert s.log_sigma == pytest.approx(-690.775527898213705, rel=1e-15)


def test_init_state_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        init_state(AlgorithmParams(3, 2), run_rng(0), x0=np.zeros(2))
    with pytest.raises(ConfigurationError):
        init_state(AlgorithmParams(3, 2), run_rng(0), sigma0=0.0)


def test_objective_transforms_strictly_increasing():
    grid = np.linspace(-50, 50, 10001)
    for name, g in TRANSFORMS.items():
        assert np.all(np.diff(g(grid)) > 0), name


def test_objective_validation():
    with pytest.raises(ConfigurationError):
        ObjectiveSpec("composed", "log")
    with pytest.raises(ConfigurationError):
        ObjectiveSpec("linear_first_coordinate", "cubic")


def test_full_selection_single_child_is_unconditional():
    params = AlgorithmParams(4, 1)
    state = init_state(params, run_rng(0))
    sel = select_step_full(state, params, ObjectiveSpec(), run_rng(9))
    assert np.array_equal(sel.xi_star, run_rng(9).standard_normal((1, 4))[0])
    assert sel.index == 0


def test_full_selection_first_coordinate_law():
    params = AlgorithmParams(3, 3)
    state = init_state(params, run_rng(0))
    rng = np.random.default_rng(21)
    first = np.array([select_step_full(state, params, ObjectiveSpec(), rng).xi_star[0] for _ in range(10**5)])
    assert stats.kstest(first, lambda v: cdf(v, OrderStatSpec(3))).pvalue > 0.01


@pytest.mark.parametrize("transform", ["exp_shift", "cubic"])
def test_selection_invariant_under_increasing_transform(transform):
    params = AlgorithmParams(20, 6, c=0.3)
    base = init_state(params, run_rng(4), x0=np.full(20, 1.5), sigma0=0.7)
    composed = ObjectiveSpec("composed", transform)
    ra, rb = run_rng(12), run_rng(12)
    sa, sb = base, EsState(base.t, base.x.copy(), base.log_sigma, base.p.copy())
    for _ in range(60):
        sa, _, sel_a = step(sa, params, ra, ObjectiveSpec(), "full")
        sb, _, sel_b = step(sb, params, rb, composed, "full")
        assert sel_a.index == sel_b.index
    assert sa.log_sigma == sb.log_sigma
    # horizon chosen so exp(x_1 - 2) has not underflowed
    assert sa.x[0] > -500


def test_saturated_transform_is_reported():
    params = AlgorithmParams(2, 4)
    state = EsState(0, np.array([-1e4, 0.0]), 0.0, np.zeros(2))
    with pytest.raises(NumericalDomainError, match="cannot separate"):
        select_step_full(state, params, ObjectiveSpec("composed", "exp_shift"), run_rng(0))
    # identity keeps the ordering at the same point
    select_step_full(state, params, ObjectiveSpec(), run_rng(0))


def test_non_finite_objective_names_child():
    params = AlgorithmParams(2, 3)
    state = EsState(0, np.array([np.inf, 0.0]), 0.0, np.zeros(2))
    with pytest.raises(NumericalDomainError, match="child 0"):
        select_step_full(state, params, ObjectiveSpec(), run_rng(0))


def test_shortcut_single_child():
    params = AlgorithmParams(4, 1)
    sel = select_step_shortcut(params, run_rng(5))
    assert np.array_equal(sel.xi_star, run_rng(5).standard_normal(4))


def test_shortcut_unbiased_coordinates():
    # trajectory generation replays select_step_shortcut draws (checked below)
    traj_rng = run_rng(77)
    params = AlgorithmParams(2, 2)
    traj_rng.standard_normal(2)  # p_0
    block = traj_rng.standard_normal((10**6, 3))
    second = block[:, 2]
    n = len(second)
    assert abs(second.mean()) < 4 * second.std() / math.sqrt(n)
    # SE of the sample variance for a normal: sqrt(2/(n-1))
    assert abs(second.var(ddof=1) - 1.0) < 4 * math.sqrt(2.0 / (n - 1))
    rng = run_rng(77)
    rng.standard_normal(2)
    assert select_step_shortcut(params, rng).xi_star[1] == second[0]


def test_shortcut_matches_full_selection():
    params = AlgorithmParams(3, 5)
    state = init_state(params, run_rng(0))
    rf, rs = np.random.default_rng(1), np.random.default_rng(2)
    full = np.array([select_step_full(state, params, ObjectiveSpec(), rf).xi_star for _ in range(10**5)])
    short = np.array([select_step_shortcut(params, rs).xi_star for _ in range(10**5)])
    for j in range(3):
        assert stats.ks_2samp(full[:, j], short[:, j]).pvalue > 0.01


def test_update_path_examples():
    p = np.array([1.0, -2.0, 3.0])
    xi = np.array([0.5, 0.25, -1.0])
    assert np.array_equal(update_path(p, xi, 1.0), xi)
    assert np.array_equal(update_path(p, np.zeros(3), 0.5), p / 2)
    assert np.array_equal(update_path(p, SelectedStep(xi), 1.0), xi)
    with pytest.raises(ConfigurationError):
        update_path(p, xi, 0.0)


@given(
    p=arrays(float, 4, elements=finite),
    xi=arrays(float, 4, elements=finite),
    c=st.floats(1e-6, 1.0),
)
def test_update_path_formula(p, xi, c):
    expected = (1 - c) * p + math.sqrt(c * (2 - c)) * xi
    assert np.allclose(update_path(p, xi, c), expected, rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("c", [0.05, 0.5, 1.0])
def test_update_path_preserves_standard_normal(c):
    rng = np.random.default_rng(31)
    p = rng.standard_normal(10**6)
    xi = rng.standard_normal(10**6)
    out = update_path(p, xi, c)
    n = len(out)
    assert abs(out.mean()) < 4 / math.sqrt(n)
    assert abs(out.var(ddof=1) - 1.0) < 4 * math.sqrt(2.0 / (n - 1))


def test_update_log_sigma_examples():
    params = AlgorithmParams(4, 2, c=0.4)
    assert update_log_sigma(0.3, np.ones(4), params) == 0.3
    assert update_log_sigma(0.0, np.array([2.0]), AlgorithmParams(1, 1)) == 1.5
    norm_params = AlgorithmParams(4, 2, c=0.4, update_rule=NORM_LENGTH)
    p = np.full(4, expected_chi_norm(4) / 2.0)
    assert update_log_sigma(0.3, p, norm_params) == pytest.approx(0.3, abs=1e-15)
    with pytest.raises(ConfigurationError):
        update_log_sigma(0.0, np.ones(3), params)


@given(p=arrays(float, 3, elements=finite), c=st.floats(1e-4, 1.0), d=st.floats(0.1, 10.0))
def test_update_log_sigma_formula(p, c, d):
    params = AlgorithmParams(3, 2, c=c, d_sigma=d)
    expected = c / (2 * d) * (np.dot(p, p) / 3 - 1)
    assert update_log_sigma(0.0, p, params) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_step_x_update():
    params = AlgorithmParams(3, 1)
    state = EsState(0, np.zeros(3), math.log(2.0), np.zeros(3))
    new, _, sel = step(state, params, FixedNormals([-1.0, 0.0, 0.0]), mode="shortcut")
    assert np.array_equal(sel.xi_star, [-1.0, 0.0, 0.0])
    assert np.array_equal(new.x, [-2.0, 0.0, 0.0])
    assert new.t == 1


def test_step_c1_path_is_selected_step():
    params = AlgorithmParams(6, 4, c=1.0)
    state = init_state(params, run_rng(2))
    rng = run_rng(3)
    for _ in range(50):
        state, _, sel = step(state, params, rng)
        assert np.array_equal(state.p, sel.xi_star)


def test_step_increment_random_walk_law():
    # lambda = 1, c = 1: increment ~ (chi2_n / n - 1) / (2 d_sigma)
    n, d = 5, 1.0
    params = AlgorithmParams(n, 1, c=1.0, d_sigma=d)
    state = init_state(params, run_rng(6))
    rng = run_rng(7)
    incs = np.empty(20000)
    for t in range(len(incs)):
        state, incs[t], _ = step(state, params, rng)
    law = stats.chi2(n)
    assert stats.kstest(incs, lambda w: law.cdf(n * (2 * d * w + 1))).pvalue > 0.01


def test_selection_independent_of_sigma():
    params = AlgorithmParams(4, 7, c=0.5)
    base = init_state(params, run_rng(1), x0=np.array([3.0, 1.0, 0.0, -2.0]))
    small = EsState(0, base.x.copy(), math.log(1e-3), base.p.copy())
    large = EsState(0, base.x.copy(), math.log(1e3), base.p.copy())
    ra, rb = run_rng(8), run_rng(8)
    for _ in range(100):
        sel_a = select_step_full(small, params, ObjectiveSpec(), ra)
        sel_b = select_step_full(large, params, ObjectiveSpec(), rb)
        assert sel_a.index == sel_b.index


def test_random_selection_keeps_path_standard_normal():
    params = AlgorithmParams(3, 8, c=0.2)
    runs = 10**4  # ~15 s
    finals = np.empty((runs, 3))
    for r in range(runs):
        rng = run_rng(55, r)
        state = init_state(params, rng)
        for _ in range(100):
            state, _, _ = step(state, params, rng, mode="random")
        finals[r] = state.p
    se_mean = 1 / math.sqrt(runs)
    se_var = math.sqrt(2.0 / (runs - 1))
    assert np.all(np.abs(finals.mean(axis=0)) < 4 * se_mean)
    assert np.all(np.abs(finals.var(axis=0, ddof=1) - 1.0) < 4 * se_var)


def test_unknown_mode():
    params = AlgorithmParams(2, 2)
    with pytest.raises(ConfigurationError):
        step(init_state(params, run_rng(0)), params, run_rng(0), mode="greedy")


@pytest.mark.parametrize("c", [1.0, 0.3, 1 / math.sqrt(20)])
@pytest.mark.parametrize("rule", ["squared_length", "norm_length"])
def test_trajectory_replays_step_loop(c, rule):
    params = AlgorithmParams(5, 4, c=c, update_rule=rule)
    traj = shortcut_trajectory(params, 2500, run_rng(1, 2), track_x=True, chunk=700)
    rng = run_rng(1, 2)
    state = init_state(params, rng)
    log_sigma, incs, x1 = [], [], []
    for _ in range(2500):
        state, inc, _ = step(state, params, rng)
        log_sigma.append(state.log_sigma)
        incs.append(inc)
        x1.append(state.x[0])
    assert np.array_equal(traj.log_sigma, log_sigma)
    assert np.array_equal(traj.increments, incs)
    assert np.array_equal(traj.final_p, state.p)
    assert np.allclose(traj.log_abs_x1, np.log(np.abs(x1)), rtol=0, atol=1e-12)


def test_log_domain_safety_long_run():
    params = AlgorithmParams(20, 8, c=1.0)
    traj = shortcut_trajectory(params, 10**6, run_rng(2012), track_x=True)
    assert np.all(np.isfinite(traj.log_sigma))
    # sigma itself is far outside double range by now; its log is not
    assert traj.log_sigma[-1] > 709.0
    assert np.all(np.isfinite(traj.log_abs_x1[1000:]))
