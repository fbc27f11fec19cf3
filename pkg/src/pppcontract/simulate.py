"""Forward simulation of the optimal contract and Monte Carlo objective values.

The continuation value follows

    dV = (delta V - U(r - k) + h(a)) dt + sigma h'(a)/phi'(a) dW

under the solved feedback ``(r, a)(V)``. Two boundary treatments exist:

``absorb`` (default)
    a path is stopped at its first exit from ``(0, x_bar)``; the consortium
    is credited its continuation value (the boundary point itself) and the
    public the Dirichlet data ``v(0) = boundary_v0``, ``v(x_bar) = 0``. The
    objective estimates are then the exit-time representation of the
    boundary value problem the solver discretises.
``clamp``
    steps leaving ``[0, x_bar]`` are put back on the boundary and the path
    continues under the boundary contracts.

Paths are simulated in fixed blocks of :data:`BLOCK_PATHS`;
block ``b`` draws its normals from ``SeedSequence(seed, spawn_key=(b,))`` in
chunks of :data:`CHUNK_STEPS` time steps, so results depend only on the seed
and the configuration.

State-dependent quantities are tabulated on a grid :data:`TABLE_REFINE` times
finer than the solver mesh and linearly interpolated inside the kernel.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import kernels
from .model import boundary_v0

BLOCK_PATHS = 1024
CHUNK_STEPS = 2048
TABLE_REFINE = 16
BOUNDARY_MODES = ("absorb", "clamp")


@dataclass(frozen=True)
class SimConfig:
    x0: float = 2.5
    dt: float = 1e-3
    horizon: float = 120.0
    n_paths: int = 20000
    seed: int = 42
    boundary: str = "absorb"

    def __post_init__(self):
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {BOUNDARY_MODES}, got {self.boundary!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not self.x0 >= 0:
            raise ValueError("x0 must be non-negative")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))


@dataclass
class PathStats:
    mean: float
    std_error: float
    n_paths: int
    truncation_bound: float

    def within(self, target, allowance=0.0, n_se=3.0):
        """``|mean - target| <= n_se * SE + truncation_bound + allowance``;
        ``None`` when the standard error is undefined (a single path)."""
        if not np.isfinite(self.std_error):
            return None
        return abs(self.mean - target) <= n_se * self.std_error + self.truncation_bound + allowance


@dataclass
class PathSet:
    """Recorded paths at ``times``; arrays are ``(n_paths, n_times)``."""

    times: np.ndarray
    value: np.ndarray
    rent: np.ndarray
    effort: np.ndarray
    brownian: np.ndarray
    phi_integral: np.ndarray
    exits: np.ndarray


def interpolate_controls(policy, grid, x, bundle):
    """Return ``(surplus, effort)`` at ``x`` by linear interpolation in ``x``."""
    xq = np.clip(np.asarray(x, dtype=float), 0.0, grid.x_bar)
    nodes = grid.nodes
    s = np.interp(xq, nodes, policy.surplus)
    a = np.interp(xq, nodes, policy.effort)
    a = np.clip(a, 0.0, bundle.effort_ceiling(s))
    return s, a


def interpolate_policy(policy, grid, x, bundle):
    """Piecewise-linear feedback ``(r, a)`` at ``x``, clamped to ``[0, x_bar]``.

    Effort is projected onto the admissible interval ``[0, h^-1(U(r - k))]``.
    """
    s, a = interpolate_controls(policy, grid, x, bundle)
    r = policy.k + s
    if np.ndim(r) == 0:
        return float(r), float(a)
    return r, a


@dataclass
class _Tables:
    inv_dx: float
    g: np.ndarray
    vol: np.ndarray
    cons: np.ndarray
    pub: np.ndarray
    phi: np.ndarray


def _tables(policy, grid, params, bundle, sigma_scale=1.0):
    xs = np.linspace(0.0, grid.x_bar, TABLE_REFINE * grid.n + 1)
    s, a = interpolate_controls(policy, grid, xs, bundle)
    us = bundle.U(s)
    ha = bundle.h(a)
    return _Tables(
        inv_dx=(xs.size - 1) / grid.x_bar,
        g=ha - us,
        vol=sigma_scale * params.sigma * bundle.diffusion_factor(a),
        cons=us - ha,
        pub=bundle.phi(a) - s,
        phi=bundle.phi(a),
    )


def _block_rng(seed, block):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _run(policy, grid, params, bundle, config, record_every=None, n_record=0, sigma_scale=1.0):
    tab = _tables(policy, grid, params, bundle, sigma_scale)
    n_steps = config.n_steps
    dt = config.dt
    sqrt_dt = math.sqrt(dt)
    decay = math.exp(-params.delta * dt)
    x0 = min(max(config.x0, 0.0), grid.x_bar)
    n = config.n_paths
    absorb = config.boundary == "absorb"
    # terminal credits (consortium, public) at x = 0 and at x = x_bar
    credit = np.array([0.0, boundary_v0(params, bundle), grid.x_bar, 0.0])
    start_on_edge = absorb and (x0 <= 0.0 or x0 >= grid.x_bar)

    acc_c = np.empty(n)
    acc_p = np.empty(n)
    final = np.empty(n)
    exits = np.empty(n, dtype=np.int64)
    record = None
    if n_record:
        n_times = n_steps // record_every + 1
        record = {key: np.empty((n_record, n_times)) for key in ("value", "brownian", "phi_integral")}
        record["exits"] = np.empty((n_record, n_times), dtype=np.int64)

    for block, start in enumerate(range(0, n, BLOCK_PATHS)):
        stop = min(start + BLOCK_PATHS, n)
        m = stop - start
        rng = _block_rng(config.seed, block)
        state = np.full(m, x0)
        disc = np.ones(m)
        ac = np.zeros(m)
        ap = np.zeros(m)
        w = np.zeros(m)
        pi = np.zeros(m)
        ex = np.zeros(m, dtype=np.int64)
        if start_on_edge:
            side = 0 if x0 <= 0.0 else 2
            ac += credit[side]
            ap += credit[side + 1]
            ex += 1
        rec_rows = max(0, min(stop, n_record) - start)
        if rec_rows:
            for key, arr in (("value", state), ("brownian", w), ("phi_integral", pi), ("exits", ex)):
                record[key][start:start + rec_rows, 0] = arr[:rec_rows]
        done = 0
        while done < n_steps:
            width = min(CHUNK_STEPS, n_steps - done)
            normals = rng.standard_normal((m, width))
            col = 0
            while col < width:
                if rec_rows:
                    to_next = record_every - (done + col) % record_every
                    col1 = min(width, col + to_next)
                else:
                    col1 = width
                kernels.advance_paths(state, disc, ac, ap, w, pi, ex, normals, col, col1,
                                      tab.inv_dx, tab.g, tab.vol, tab.cons, tab.pub, tab.phi,
                                      params.delta, dt, sqrt_dt, decay, grid.x_bar, absorb, credit)
                if rec_rows and (done + col1) % record_every == 0:
                    t_idx = (done + col1) // record_every
                    for key, arr in (("value", state), ("brownian", w), ("phi_integral", pi), ("exits", ex)):
                        record[key][start:start + rec_rows, t_idx] = arr[:rec_rows]
                col = col1
            done += width
        acc_c[start:stop] = ac
        acc_p[start:stop] = ap
        final[start:stop] = state
        exits[start:stop] = ex
    return acc_c, acc_p, final, exits, record


def _stats(samples, bound):
    n = samples.size
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return PathStats(float(np.mean(samples)), se, n, bound)


@dataclass
class MonteCarloResult:
    consortium: PathStats
    public: PathStats
    exit_fraction: float
    boundary: str


def mc_values(policy, grid, params, bundle, config):
    """Both objective estimates from one set of paths.

    ``exit_fraction`` is the share of paths absorbed before the horizon
    (``absorb``) or the share of Euler steps that had to be clamped back into
    ``[0, x_bar]`` (``clamp``).
    """
    acc_c, acc_p, _, exits, _ = _run(policy, grid, params, bundle, config)
    tail = math.exp(-params.delta * config.horizon)
    # an unfinished path is still owed at most max(U(r_bar - k) / delta, x_bar)
    ceiling = max(float(bundle.U(np.array([params.max_surplus]))[0]) / params.delta, grid.x_bar)
    cons = _stats(acc_c, tail * ceiling)
    pub = _stats(acc_p, tail * boundary_v0(params, bundle))
    if config.boundary == "absorb":
        frac = float(np.count_nonzero(exits)) / config.n_paths
    else:
        frac = float(exits.sum()) / (config.n_paths * config.n_steps)
    return MonteCarloResult(cons, pub, frac, config.boundary)


def mc_consortium_value(policy, grid, params, bundle, config):
    """Discounted ``U(R - k) - h(A)`` over ``[0, T]``, left-point rule.

    Under ``absorb`` the running reward stops at the exit time, where the
    exit point (0 or ``x_bar``) is credited.
    """
    return mc_values(policy, grid, params, bundle, config).consortium


def mc_public_value(policy, grid, params, bundle, config):
    """Discounted ``phi(A) - R + k`` over ``[0, T]``, left-point rule.

    Under ``absorb`` the running reward stops at the exit time, where the
    Dirichlet value (``boundary_v0`` at 0, zero at ``x_bar``) is credited.
    """
    return mc_values(policy, grid, params, bundle, config).public


def simulate_vc(policy, grid, params, bundle, config, record_every=1, n_record=None,
                diffusion_scale=1.0):
    """Simulate and record continuation-value paths every ``record_every`` steps.

    Records the first ``n_record`` paths (all by default). The rent and effort
    columns are the exact interpolated feedback at the recorded states.
    ``diffusion_scale`` multiplies the volatility of the value process only
    (``0`` freezes it at its drift ODE while still drawing the same normals).
    """
    if n_record is None:
        n_record = config.n_paths
    n_record = min(n_record, config.n_paths)
    if config.n_steps % record_every:
        raise ValueError("record_every must divide the number of steps")
    _, _, _, _, rec = _run(policy, grid, params, bundle, config, record_every, n_record,
                           sigma_scale=diffusion_scale)
    times = np.arange(rec["value"].shape[1]) * record_every * config.dt
    s, a = interpolate_controls(policy, grid, rec["value"], bundle)
    return PathSet(times, rec["value"], policy.k + s, a, rec["brownian"], rec["phi_integral"], rec["exits"])


def simulate_cost_welfare(params, bundle, paths, config):
    """Cost ``C_t`` and welfare ``X_t`` along recorded paths (same Brownian motion).

    Returns ``(C, X)`` arrays shaped like ``paths.value``.
    """
    t = paths.times[None, :]
    noise = params.sigma * paths.brownian
    cost = params.c0 + params.k * t + noise
    welfare = params.x0_welfare + paths.phi_integral + params.k * t + noise
    return cost, welfare
