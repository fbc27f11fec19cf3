"""Probability that the cost process ``C_t = C0 + k t + sigma W_t`` dips below zero.

The first time a drifted Brownian motion falls by ``C0`` is inverse-Gaussian
distributed. :func:`hitting_probability` integrates its density over
``(0, T]``; :func:`positivity_bound` drops the drift, which can only raise the
crossing probability when ``k > 0``.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, special

from .simulate import PathStats

TAIL_CUTOFF = 40.0
# accuracy promised to callers; quad is asked for far more because its own
# error estimate can be optimistic by a factor of a few on wide intervals
QUAD_ABS_TOL = 1e-8
QUAD_REQUEST_TOL = 1e-12


@dataclass(frozen=True)
class RiskQuery:
    c0: float
    k: float
    sigma: float
    horizon: float
    confidence: float = 0.95

    def __post_init__(self):
        for name in ("c0", "k", "sigma", "horizon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")

    @property
    def z(self):
        """Standardised initial cost ``c0 / (sigma sqrt(T))``."""
        return self.c0 / (self.sigma * math.sqrt(self.horizon))


def norm_cdf(x):
    """Standard normal distribution function (``erfc`` based)."""
    return special.ndtr(x)


def ig_density(t, mu, lam):
    """Inverse-Gaussian density ``sqrt(lam / (2 pi t^3)) exp(-lam (t - mu)^2 / (2 mu^2 t))``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("inverse-Gaussian density needs t > 0")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    out = np.sqrt(lam / (2.0 * np.pi * t ** 3)) * np.exp(-lam * (t - mu) ** 2 / (2.0 * mu ** 2 * t))
    return float(out) if out.ndim == 0 else out


def _crossing_integrand(x, q):
    # density after t = c0^2 / (sigma^2 x^2); t -> 0 maps to x -> infinity
    shift = q.k * q.c0 / q.sigma ** 2
    return 2.0 * math.exp(-0.5 * x * x - shift - 0.5 * (q.k * q.c0 / (q.sigma ** 2 * x)) ** 2) / math.sqrt(2.0 * math.pi)


def hitting_probability(query):
    """``P(min_{s <= T} C_s <= 0)`` by quadrature of the first-passage density.

    The substitution ``x^2 = c0^2 / (t sigma^2)`` removes the ``t -> 0``
    singularity; the transformed integrand is Gaussian-tailed and is cut at
    ``x = 40``.
    """
    lo = query.z
    if lo >= TAIL_CUTOFF:
        return 0.0
    val, err = integrate.quad(_crossing_integrand, lo, TAIL_CUTOFF, args=(query,),
                              epsabs=QUAD_REQUEST_TOL, epsrel=QUAD_REQUEST_TOL, limit=500)
    if err > QUAD_ABS_TOL:
        raise ArithmeticError(f"quadrature did not converge: achieved error estimate {err:.3g}")
    return float(min(max(val, 0.0), 1.0))


def positivity_bound(query):
    """Driftless crossing probability ``2 (1 - Phi(c0 / (sigma sqrt(T))))``."""
    return float(2.0 * special.ndtr(-query.z))


def min_initial_cost(sigma, horizon, confidence=0.95):
    """Smallest ``c0`` with ``positivity_bound <= 1 - confidence``."""
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    z = -special.ndtri((1.0 - confidence) / 2.0)
    return float(z * sigma * math.sqrt(horizon))


def mc_hitting_probability(query, n_paths=100_000, n_steps=1000, seed=0, block=10_000):
    """Monte Carlo crossing frequency with a Brownian-bridge correction.

    Between grid points a path with endpoints ``m1, m2 > 0`` above the barrier
    crossed it with probability ``exp(-2 m1 m2 / (sigma^2 dt))``; the estimator
    averages the per-path crossing probability, which removes the
    discretisation bias of checking the grid points only.
    """
    dt = query.horizon / n_steps
    sd = query.sigma * math.sqrt(dt)
    out = np.empty(n_paths)
    for b, start in enumerate(range(0, n_paths, block)):
        m = min(block, n_paths - start)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(b,))))
        c = np.full(m, query.c0)
        survive = np.ones(m)
        for _ in range(n_steps):
            nxt = c + query.k * dt + sd * rng.standard_normal(m)
            cross = np.where((c > 0) & (nxt > 0),
                             np.exp(-2.0 * c * np.maximum(nxt, 0.0) / (query.sigma ** 2 * dt)), 1.0)
            survive *= 1.0 - cross
            c = nxt
        out[start:start + m] = 1.0 - survive
    se = float(out.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else float("nan")
    return PathStats(float(out.mean()), se, n_paths, 0.0)
