import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sparse_select import DimensionError, DomainError, FunctionSpace, solve_extremal, u_exact
from sparse_select.risk_lab import derive_generator
from sparse_select.selectors import (
    adaptive_exact_select,
    adaptive_exact_threshold,
    almost_full_profile,
    almost_full_select,
    almost_full_target,
    almost_full_threshold,
    build_grid,
    default_config,
    default_schedules,
    exact_select,
    exact_target,
    exact_threshold,
    lepski_index,
    lepski_select,
    r_star_almost_full,
    r_star_exact,
    statistics,
    t_statistic,
)
from sparse_select.signal_model import ObservationMatrix, layout

from conftest import SIGMA_A

# reference values evaluated at 30 digits with mpmath
TARGET_AF_1024_32 = 2.6327688477341593
TARGET_EXACT_1024_32 = 6.3560662587931935


def test_targets():
    assert almost_full_target(1024, 32) == pytest.approx(TARGET_AF_1024_32, rel=1e-14)
    assert exact_target(1024, 32) == pytest.approx(TARGET_EXACT_1024_32, rel=1e-14)
    assert exact_target(1024, 1) == pytest.approx(math.sqrt(2 * math.log(1024)), rel=1e-15)


@pytest.mark.parametrize("s", [1024, 2000, 0.5])
def test_targets_reject_degenerate_sparsity(s):
    with pytest.raises(DomainError):
        almost_full_target(1024, s)
    with pytest.raises(DomainError):
        exact_target(1024, s)


@given(d=st.integers(3, 10**6), data=st.data())
def test_exact_target_dominates(d, data):
    s = data.draw(st.integers(2, d - 1))
    assert exact_target(d, s) > almost_full_target(d, s)


def test_boundaries_ordered(sobolev1, analytic1):
    for sp, eps in ((sobolev1, 1e-3), (analytic1, 1e-30)):
        assert r_star_almost_full(sp, eps, 1024, 32) < r_star_exact(sp, eps, 1024, 32)
        assert r_star_almost_full(sp, eps, 10**6, 10**6 - 1) < r_star_almost_full(sp, eps, 1024, 32)


@pytest.mark.parametrize(
    "value, expected",
    [
        (lambda: almost_full_threshold(1024, 32, 0.3), 3.0018183401530628),
        (lambda: exact_threshold(1024, 0.3), 3.9927916490694504),
        (lambda: adaptive_exact_threshold(1024, 6, 0.3), 4.4792222463395659),
    ],
    ids=["almost_full", "exact", "adaptive_exact"],
)
def test_thresholds(value, expected):
    assert value() == pytest.approx(expected, rel=1e-14)


@given(d=st.integers(3, 10**6), delta=st.floats(0.01, 2.0), data=st.data())
def test_almost_full_threshold_nonincreasing_in_s(d, delta, data):
    s1 = data.draw(st.floats(1.0, d - 1.0))
    s2 = data.draw(st.floats(s1, d - 1.0))
    assert almost_full_threshold(d, s2, delta) <= almost_full_threshold(d, s1, delta)


def test_t_statistic_examples(analytic_k10):
    eps = analytic_k10.eps
    W = analytic_k10.width
    assert t_statistic(np.full(2 * W, eps), analytic_k10, eps) == pytest.approx(0.0, abs=1e-14)
    assert t_statistic(np.zeros(2 * W), analytic_k10, eps) == pytest.approx(-math.sqrt(10), rel=1e-12)
    # padding with zero-weight columns leaves the statistic alone
    padded = np.zeros(2 * (W + 3))
    assert t_statistic(padded, analytic_k10, eps) == pytest.approx(-math.sqrt(10), rel=1e-12)
    with pytest.raises(DimensionError):
        t_statistic(np.zeros(2 * W - 2), analytic_k10, eps)


def test_t_statistic_at_extremal_signal_equals_u(sobolev1):
    p = solve_extremal(sobolev1, 0.02, 1e-3)
    row = layout(p.theta_star[: p.width])
    # E t = sum omega (theta^2 / eps^2), the noise-free part
    mean = float(layout(p.omega[: p.width]) @ (row / p.eps) ** 2)
    assert mean == pytest.approx(u_exact(p), rel=1e-12)


def test_statistics_matches_rowwise(analytic_k10):
    rng = derive_generator(4)
    eps = analytic_k10.eps
    x = eps * rng.standard_normal((7, 2 * 12))
    obs = ObservationMatrix(x, eps)
    stats = statistics(obs, [analytic_k10])[:, 0]
    expected = [t_statistic(row, analytic_k10, eps) for row in x]
    np.testing.assert_allclose(stats, expected, rtol=1e-12)


@pytest.mark.parametrize("space", [FunctionSpace.sobolev(1.0), FunctionSpace.analytic(SIGMA_A)], ids=["sob", "ana"])
def test_zero_observations_select_nothing(space):
    eps = 1e-3 if space.sigma == 1.0 else 1e-30
    cfg = default_config(1024)
    W = max(p.width for p in [almost_full_profile(space, eps, 1024, 32)]) + 200
    obs = ObservationMatrix(np.zeros((1024, 2 * W)), eps)
    assert not almost_full_select(obs, space, 32, 0.3).eta_hat.any()
    assert not exact_select(obs, space, 32, 0.3).eta_hat.any()
    assert lepski_select(obs, space, cfg)[0] == 1


def test_adaptive_exact_requires_analytic(sobolev1):
    obs = ObservationMatrix(np.zeros((1024, 2)), 1e-3)
    with pytest.raises(DomainError):
        adaptive_exact_select(obs, sobolev1, default_config(1024).grid, 0.3)


def test_adaptive_exact_max_rule(analytic1):
    eps = 1e-30
    grid = build_grid(1024, 0.25, 0.75, 0.1)
    from sparse_select.selectors import adaptive_exact_profiles

    profiles = adaptive_exact_profiles(analytic1, eps, grid)
    W = max(p.width for p in profiles)
    rng = derive_generator(9)
    x = eps * rng.standard_normal((1024, 2 * W))
    # plant a strong component on row 3 at the narrowest profile only
    x[3, : profiles[-1].width] = 10 * eps
    obs = ObservationMatrix(x, eps)
    res = adaptive_exact_select(obs, analytic1, grid, 0.3)
    stats = statistics(obs, profiles)
    fired = (stats > res.threshold).any(axis=1)
    np.testing.assert_array_equal(res.eta_hat.astype(bool), fired)
    assert res.eta_hat[3] == 1


def test_build_grid_example():
    g = build_grid(10_000, 0.25, 0.75, 0.1)
    assert g.M == 6
    assert g.points[0] == pytest.approx(10.0, rel=1e-14)
    assert g.points[1] == pytest.approx(25.118864315095802, rel=1e-14)
    assert g.points[5] == pytest.approx(1000.0, rel=1e-13)


def test_build_grid_degenerate_interval():
    g = build_grid(1024, 0.5, 0.5, 0.1)
    assert g.M == 1 and g.points[0] == pytest.approx(32.0, rel=1e-14)


@given(
    d=st.integers(16, 10**6),
    c_low=st.floats(0.05, 0.5),
    width=st.floats(0.0, 0.4),
    step=st.floats(0.01, 0.3),
)
def test_build_grid_geometric(d, c_low, width, step):
    M = math.ceil(width / step - 1e-9) + 1
    assume(c_low + (M - 1) * step < 1 - 1e-9)
    g = build_grid(d, c_low, c_low + width, step)
    ratios = np.array(g.points[1:]) / np.array(g.points[:-1])
    np.testing.assert_allclose(ratios, d**step, rtol=1e-10)
    assert g.points[-1] < d
    assert g.M == M


@pytest.mark.parametrize("args", [(1024, 0.0, 0.5, 0.1), (1024, 0.6, 0.5, 0.1), (1024, 0.2, 0.5, 0.0), (1024, 0.2, 1.0, 0.1)])
def test_build_grid_rejects(args):
    with pytest.raises(DomainError):
        build_grid(*args)


def test_default_schedules_1024():
    delta, step, tau = default_schedules(1024)
    assert delta == pytest.approx(0.37982825604330221, rel=1e-14)
    assert step == pytest.approx(0.054797634138317554, rel=1e-14)
    assert tau == pytest.approx(TARGET_AF_1024_32, rel=1e-14)
    assert delta * math.log(1024) == pytest.approx(TARGET_AF_1024_32, rel=1e-14)
    assert default_schedules(64)[0] * math.log(64) == pytest.approx(2.0393339803376179, rel=1e-14)


def test_default_schedules_monotone():
    sched = np.array([default_schedules(2**j) for j in range(3, 30)])
    assert np.all(np.diff(sched[:, 0]) < 0)
    assert np.all(np.diff(sched[:, 1]) < 0)
    assert np.all(np.diff(sched[:, 2]) > 0)


def test_lepski_identical_candidates():
    cand = np.tile(np.array([1, 0, 1, 1], dtype=np.int8), (5, 1))
    m_hat, dist, admissible, m_scan = lepski_index(cand, np.full(5, 0.1))
    assert m_hat == 1 and m_scan == 1
    assert admissible.all() and not dist.any()


def test_lepski_injected_candidates():
    cand = np.array([[1, 1, 1, 1], [0, 0, 0, 0]])
    m_hat, dist, admissible, _ = lepski_index(cand, np.array([1.0, 3.9]))
    assert m_hat == 2
    assert dist[0, 1] == 4
    assert admissible.tolist() == [False, True]


def test_lepski_global_minimum_differs_from_scan():
    # m = 1 is admissible while m = 2 is not
    cand = np.array([[0, 0, 0, 0], [1, 1, 0, 0], [0, 0, 0, 0]])
    m_hat, _, admissible, m_scan = lepski_index(cand, np.array([0.0, 2.0, 1.0]))
    assert admissible.tolist() == [True, False, True]
    assert (m_hat, m_scan) == (1, 3)


@settings(max_examples=50)
@given(data=st.data(), M=st.integers(1, 6), d=st.integers(1, 12))
def test_lepski_always_defined(data, M, d):
    cand = np.array(data.draw(st.lists(st.lists(st.integers(0, 1), min_size=d, max_size=d), min_size=M, max_size=M)))
    v = np.array(data.draw(st.lists(st.floats(0, 20), min_size=M, max_size=M)))
    m_hat, dist, admissible, m_scan = lepski_index(cand, v)
    assert admissible[-1]
    assert 1 <= m_hat <= m_scan <= M
    assert np.all(dist == dist.T)
    for i in range(m_hat - 1, M):
        assert dist[m_hat - 1, i] <= v[i]


def test_lepski_rejects_wrong_grid(sobolev1):
    obs = ObservationMatrix(np.zeros((512, 400)), 1e-3)
    with pytest.raises(DimensionError):
        lepski_select(obs, sobolev1, default_config(1024))


def test_selection_is_pure(sobolev1):
    rng = derive_generator(6)
    eps = 1e-3
    W = 80
    x = eps * rng.standard_normal((1024, 2 * W))
    obs = ObservationMatrix(x, eps)
    cfg = default_config(1024)
    a = lepski_select(obs, sobolev1, cfg)
    b = lepski_select(ObservationMatrix(x.copy(), eps), sobolev1, cfg)
    assert a[0] == b[0]
    np.testing.assert_array_equal(a[1].eta_hat, b[1].eta_hat)
    np.testing.assert_array_equal(a[1].stats, b[1].stats)
