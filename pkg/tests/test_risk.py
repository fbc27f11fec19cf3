import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate

from pppcontract import risk


def closed_form(q):
    """First-passage probability of a drifted Brownian motion below zero."""
    s = q.sigma * math.sqrt(q.horizon)
    return (risk.norm_cdf(-(q.c0 + q.k * q.horizon) / s)
            + math.exp(-2 * q.k * q.c0 / q.sigma ** 2) * risk.norm_cdf(-(q.c0 - q.k * q.horizon) / s))


def test_query_validation():
    for kw in (dict(c0=0), dict(k=0), dict(sigma=-1), dict(horizon=0), dict(confidence=1.0)):
        base = dict(c0=1, k=1, sigma=1, horizon=1)
        base.update(kw)
        with pytest.raises(ValueError):
            risk.RiskQuery(**base)


def test_ig_density():
    assert risk.ig_density(2.0, 2.0, 3.0) == pytest.approx(math.sqrt(3.0 / (2 * math.pi * 8.0)))
    assert risk.ig_density(1e-12, 1.0, 1.0) < 1e-100
    total, _ = integrate.quad(risk.ig_density, 0, np.inf, args=(1.0, 1.0), epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        risk.ig_density(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        risk.ig_density(1.0, 1.0, 0.0)


def test_norm_cdf_contract():
    assert abs(risk.norm_cdf(0.0) - 0.5) <= 1e-12
    xs = np.linspace(-8, 8, 161)
    assert np.max(np.abs(risk.norm_cdf(-xs) - (1 - risk.norm_cdf(xs)))) <= 1e-12


def test_positivity_bound():
    q = risk.RiskQuery(c0=1.96, k=1.0, sigma=1.0, horizon=1.0)
    assert risk.positivity_bound(q) == pytest.approx(0.05, abs=1e-3)
    assert risk.positivity_bound(risk.RiskQuery(1e3, 1, 1, 1)) == 0.0
    assert risk.positivity_bound(risk.RiskQuery(1e-300, 1, 1, 1)) == pytest.approx(1.0)


def test_min_initial_cost():
    assert risk.min_initial_cost(1.0, 1.0) == pytest.approx(1.96, abs=5e-3)
    assert risk.min_initial_cost(2.0, 4.0) == pytest.approx(4 * risk.min_initial_cost(1.0, 1.0), rel=1e-14)
    assert risk.min_initial_cost(1.0, 1.0, confidence=1e-12) < 1e-10
    with pytest.raises(ValueError):
        risk.min_initial_cost(1.0, 1.0, 1.0)


def test_hitting_probability_tail_and_driftless_limit():
    assert risk.hitting_probability(risk.RiskQuery(c0=100.0, k=1, sigma=1, horizon=1)) < 1e-300
    q = risk.RiskQuery(c0=1.96, k=1e-12, sigma=1.0, horizon=1.0)
    assert risk.hitting_probability(q) == pytest.approx(0.05, abs=1e-3)
    assert risk.hitting_probability(q) == pytest.approx(risk.positivity_bound(q), abs=1e-10)


@given(st.floats(0.01, 20), st.floats(0.01, 5), st.floats(0.05, 5), st.floats(0.01, 50))
@settings(max_examples=150, deadline=None)
def test_hitting_probability_matches_closed_form(c0, k, sigma, horizon):
    q = risk.RiskQuery(c0, k, sigma, horizon)
    assert risk.hitting_probability(q) == pytest.approx(closed_form(q), abs=1e-8)


@given(st.floats(0.01, 20), st.floats(0.01, 5), st.floats(0.05, 5), st.floats(0.01, 50))
@settings(max_examples=150, deadline=None)
def test_hitting_below_driftless_bound(c0, k, sigma, horizon):
    q = risk.RiskQuery(c0, k, sigma, horizon)
    assert risk.hitting_probability(q) <= risk.positivity_bound(q) + 1e-12


@given(st.floats(0.1, 5), st.floats(0.1, 2), st.floats(0.2, 2), st.floats(0.5, 10), st.floats(1.01, 2))
@settings(max_examples=60, deadline=None)
def test_hitting_monotone(c0, k, sigma, horizon, f):
    base = risk.hitting_probability(risk.RiskQuery(c0, k, sigma, horizon))
    assume(1e-12 < base < 1 - 1e-12)
    slack = 1e-8
    assert risk.hitting_probability(risk.RiskQuery(c0 * f, k, sigma, horizon)) <= base + slack
    assert risk.hitting_probability(risk.RiskQuery(c0, k * f, sigma, horizon)) <= base + slack
    assert risk.hitting_probability(risk.RiskQuery(c0, k, sigma * f, horizon)) >= base - slack
    assert risk.hitting_probability(risk.RiskQuery(c0, k, sigma, horizon * f)) >= base - slack


def test_mc_oracle_general_query():
    q = risk.RiskQuery(c0=1.0, k=0.5, sigma=0.5, horizon=4.0)
    mc = risk.mc_hitting_probability(q, n_paths=1_000_000, n_steps=100, seed=1, block=50_000)
    assert mc.within(risk.hitting_probability(q))


def test_mc_oracle_driftless_rule():
    q = risk.RiskQuery(c0=1.96, k=1e-12, sigma=1.0, horizon=1.0)
    mc = risk.mc_hitting_probability(q, n_paths=200_000, n_steps=100, seed=2)
    assert abs(mc.mean - 0.05) <= 3 * mc.std_error + 1e-3


def test_mc_oracle_far_barrier():
    mc = risk.mc_hitting_probability(risk.RiskQuery(c0=100.0, k=1, sigma=1, horizon=1), n_paths=1000,
                                     n_steps=10)
    assert mc.mean == 0.0


def test_mc_oracle_deterministic():
    q = risk.RiskQuery(c0=1.0, k=0.5, sigma=0.5, horizon=4.0)
    a = risk.mc_hitting_probability(q, 5000, 50, seed=9)
    b = risk.mc_hitting_probability(q, 5000, 50, seed=9)
    assert a == b
