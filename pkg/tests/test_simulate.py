import math
from dataclasses import replace

import numpy as np
import pytest

from pppcontract import hjb, model, simulate


def const_policy(grid, params, s, a):
    n = grid.n + 1
    return hjb.Policy(np.full(n, float(s)), np.full(n, float(a)), params.k)


@pytest.fixture(scope="module")
def short():
    return simulate.SimConfig(x0=2.5, dt=1e-2, horizon=5.0, n_paths=600, seed=7)


def test_config_validation():
    for kw in (dict(dt=0), dict(horizon=-1), dict(n_paths=0), dict(x0=-0.1), dict(boundary="reflect")):
        with pytest.raises(ValueError):
            simulate.SimConfig(**kw)
    assert simulate.SimConfig(dt=1e-3, horizon=120).n_steps == 120_000


def test_interpolate_policy(solved_small, params, example):
    grid, pol = solved_small.grid, solved_small.policy
    for i in (0, 7, 50):
        r, a = simulate.interpolate_policy(pol, grid, grid.nodes[i], example)
        assert r == pol.rent[i] and a == pol.effort[i]
    assert simulate.interpolate_policy(pol, grid, -1.0, example) == (pol.rent[0], pol.effort[0])
    assert simulate.interpolate_policy(pol, grid, 99.0, example) == (pol.rent[-1], pol.effort[-1])


def test_interpolate_midpoint_mean(params, example):
    grid = hjb.Grid(4, 4.0)
    s = np.linspace(0.0, 2.0, 5)
    pol = hjb.Policy(s, 0.5 * example.effort_ceiling(s), params.k)
    r, a = simulate.interpolate_policy(pol, grid, 1.5, example)
    assert r == pytest.approx(params.k + 0.5 * (s[1] + s[2]))
    assert a == pytest.approx(0.5 * (pol.effort[1] + pol.effort[2]))


def test_interpolate_projects_effort(params, example):
    grid = hjb.Grid(2, 2.0)
    # effort ceiling is concave in s, so the chord overshoots it mid-cell
    s = np.array([0.0, 4.0, 4.0])
    pol = hjb.Policy(s, np.array([0.0, example.effort_ceiling(4.0), 0.0]), params.k)
    xs = np.linspace(0, 2, 101)
    r, a = simulate.interpolate_policy(pol, grid, xs, example)
    assert np.all(example.h(a) <= example.U(r - params.k) + 1e-12)


def test_frozen_drift_zero_point(params, example):
    grid = hjb.Grid(50, 5.0)
    x0 = 2.5
    s0 = float(example.invU(params.delta * x0))
    pol = const_policy(grid, params, s0, 0.0)
    cfg = simulate.SimConfig(x0=x0, dt=1e-2, horizon=2.0, n_paths=4, seed=1)
    paths = simulate.simulate_vc(pol, grid, params, example, cfg, diffusion_scale=0.0)
    np.testing.assert_allclose(paths.value, x0, atol=1e-12)


def test_single_step_at_xbar(solved_small, params, example):
    grid, pol = solved_small.grid, solved_small.policy
    cfg = simulate.SimConfig(x0=grid.x_bar, dt=1e-3, horizon=1e-3, n_paths=3, seed=2, boundary="clamp")
    paths = simulate.simulate_vc(pol, grid, params, example, cfg, diffusion_scale=0.0)
    s, a = pol.surplus[-1], pol.effort[-1]
    drift = params.delta * grid.x_bar - example.U(s) + example.h(a)
    expected = min(max(grid.x_bar + drift * cfg.dt, 0.0), grid.x_bar)
    np.testing.assert_allclose(paths.value[:, 1], expected, atol=1e-12)


def test_determinism(solved_small, params, example, short):
    a = simulate.simulate_vc(solved_small.policy, solved_small.grid, params, example, short, record_every=10)
    b = simulate.simulate_vc(solved_small.policy, solved_small.grid, params, example, short, record_every=10)
    assert np.array_equal(a.value, b.value) and np.array_equal(a.brownian, b.brownian)
    m1 = simulate.mc_values(solved_small.policy, solved_small.grid, params, example, short)
    m2 = simulate.mc_values(solved_small.policy, solved_small.grid, params, example, short)
    assert m1 == m2


def test_block_streams_independent_of_path_count(solved_small, params, example, short):
    base = replace(short, n_paths=1024)
    more = replace(short, n_paths=1500)
    a = simulate.simulate_vc(solved_small.policy, solved_small.grid, params, example, base, record_every=50)
    b = simulate.simulate_vc(solved_small.policy, solved_small.grid, params, example, more, record_every=50)
    assert np.array_equal(a.value, b.value[:1024])


def test_recording_does_not_change_paths(solved_small, params, example, short):
    a = simulate.simulate_vc(solved_small.policy, solved_small.grid, params, example, short, record_every=1,
                             n_record=5)
    b = simulate.simulate_vc(solved_small.policy, solved_small.grid, params, example, short, record_every=25,
                             n_record=5)
    np.testing.assert_array_equal(a.value[:, ::25], b.value)
    with pytest.raises(ValueError):
        simulate.simulate_vc(solved_small.policy, solved_small.grid, params, example, short, record_every=7)


def test_zero_contract_objectives(params, example, short):
    grid = hjb.Grid(50, 5.0)
    pol = const_policy(grid, params, 0.0, 0.0)
    mc = simulate.mc_values(pol, grid, params, example, replace(short, boundary="clamp"))
    assert mc.consortium.mean == 0.0 and mc.public.mean == 0.0


def test_binding_constant_contract(params, example, short):
    grid = hjb.Grid(50, 5.0)
    s_hat, a_hat, _ = model.boundary_contract(params, example)
    pol = const_policy(grid, params, s_hat, a_hat)
    mc = simulate.mc_values(pol, grid, params, example, replace(short, boundary="clamp"))
    assert abs(mc.consortium.mean) <= 1e-9
    rate = float(example.phi(a_hat) - s_hat)
    decay = math.exp(-params.delta * short.dt)
    left_sum = rate * short.dt * (1 - decay ** short.n_steps) / (1 - decay)
    assert mc.public.mean == pytest.approx(left_sum, rel=1e-10)
    closed = (1 - math.exp(-params.delta * short.horizon)) * rate / params.delta
    assert mc.public.mean == pytest.approx(closed, rel=params.delta * short.dt)


def test_truncation_bounds(solved_small, params, example, short):
    mc = simulate.mc_values(solved_small.policy, solved_small.grid, params, example, short)
    tail = math.exp(-params.delta * short.horizon)
    assert mc.consortium.truncation_bound == pytest.approx(tail * max(2.0 / params.delta, 5.0))
    assert mc.public.truncation_bound == pytest.approx(tail * solved_small.v0)
    assert 0.0 <= mc.exit_fraction <= 1.0


def test_path_stats_within():
    s = simulate.PathStats(1.0, 0.1, 100, 0.05)
    assert s.within(1.3) and not s.within(1.4) and s.within(1.4, allowance=0.1)
    assert simulate.PathStats(1.0, float("nan"), 1, 0.0).within(1.0) is None


def test_single_path_has_undefined_se(solved_small, params, example, short):
    mc = simulate.mc_values(solved_small.policy, solved_small.grid, params, example, replace(short, n_paths=1))
    assert math.isnan(mc.consortium.std_error)


def test_admissibility_along_paths(solved_small, params, example, short):
    paths = simulate.simulate_vc(solved_small.policy, solved_small.grid, params, example, short)
    assert np.all(example.h(paths.effort) <= example.U(paths.rent - params.k) + 1e-9)
    assert paths.value.min() >= 0.0 and paths.value.max() <= solved_small.grid.x_bar


def test_cost_welfare(solved_small, params, example):
    cfg = simulate.SimConfig(x0=2.5, dt=1e-2, horizon=1.0, n_paths=10_000, seed=3)
    paths = simulate.simulate_vc(solved_small.policy, solved_small.grid, params, example, cfg, record_every=100)
    cost, welfare = simulate.simulate_cost_welfare(params, example, paths, cfg)
    c_t = cost[:, -1]
    se = c_t.std(ddof=1) / math.sqrt(c_t.size)
    assert abs(c_t.mean() - (params.c0 + params.k * cfg.horizon)) <= 3 * se
    # single noise source: welfare minus cost is the effort integral
    np.testing.assert_allclose(welfare - cost, params.x0_welfare - params.c0 + paths.phi_integral, atol=1e-9)


def test_zero_effort_welfare_tracks_cost(params, example):
    grid = hjb.Grid(50, 5.0)
    pol = const_policy(grid, params, 0.0, 0.0)
    cfg = simulate.SimConfig(x0=1.0, dt=1e-2, horizon=1.0, n_paths=20, seed=4)
    paths = simulate.simulate_vc(pol, grid, params, example, cfg, record_every=10)
    cost, welfare = simulate.simulate_cost_welfare(params, example, paths, cfg)
    np.testing.assert_allclose(welfare - params.x0_welfare, cost - params.c0, atol=1e-12)


def test_halving_dt_moves_estimates_within_allowance(solved_small, params, example):
    # the clamp at the domain ends makes the bias O(sqrt(dt)); the change
    # still sits inside the consistency allowances (1% of x0, 2% of v(x0))
    cfg = simulate.SimConfig(x0=2.5, dt=2e-2, horizon=10.0, n_paths=2000, seed=5)
    v_x0 = float(np.interp(cfg.x0, solved_small.grid.nodes, solved_small.value.values))
    a = simulate.mc_values(solved_small.policy, solved_small.grid, params, example, cfg)
    b = simulate.mc_values(solved_small.policy, solved_small.grid, params, example, replace(cfg, dt=1e-2))
    for u, w, allowance in ((a.consortium, b.consortium, 0.01 * cfg.x0), (a.public, b.public, 0.02 * v_x0)):
        noise = 3 * math.hypot(u.std_error, w.std_error)
        assert abs(u.mean - w.mean) <= noise + allowance


def test_absorb_credits_and_freezes(params, example, short):
    grid = hjb.Grid(50, 5.0)
    pol = const_policy(grid, params, 0.0, 0.0)
    cfg = replace(short, x0=4.5, n_paths=200)
    paths = simulate.simulate_vc(pol, grid, params, example, cfg, record_every=10)
    done = paths.exits[:, -1] > 0
    assert done.any()
    for p in np.flatnonzero(done)[:20]:
        first = np.argmax(paths.exits[p] > 0)
        edge = paths.value[p, first]
        assert edge in (0.0, grid.x_bar)
        assert np.all(paths.value[p, first:] == edge)
    # zero running reward: the consortium estimate is the discounted exit credit only
    mc = simulate.mc_values(pol, grid, params, example, cfg)
    assert mc.consortium.mean > 0.0 and mc.public.mean == 0.0
    assert 0.0 < mc.exit_fraction <= 1.0


def test_absorb_start_on_edge(solved_small, params, example, short):
    for x0, cons, pub in ((0.0, 0.0, solved_small.v0), (solved_small.grid.x_bar, solved_small.grid.x_bar, 0.0)):
        mc = simulate.mc_values(solved_small.policy, solved_small.grid, params, example, replace(short, x0=x0))
        assert mc.consortium.mean == cons and mc.public.mean == pytest.approx(pub, rel=1e-14)
        assert mc.exit_fraction == 1.0


def test_continuation_value_is_a_martingale(params, example):
    # any admissible policy: x0 = E[running reward up to exit + discounted exit credit]
    grid = hjb.Grid(50, 5.0)
    s = 0.5
    pol = const_policy(grid, params, s, 0.5 * example.effort_ceiling(s))
    cfg = simulate.SimConfig(x0=2.0, dt=4e-3, horizon=60.0, n_paths=4000, seed=8)
    mc = simulate.mc_values(pol, grid, params, example, cfg)
    assert mc.consortium.within(cfg.x0, allowance=0.01 * cfg.x0)
