"""Upwind finite differences and Howard policy iteration for the public's HJB.

State: the consortium continuation value ``x`` on ``[0, x_bar]`` with Dirichlet
data ``v(0) = boundary_v0`` and ``v(x_bar) = 0``. Controls ``(r, a)`` enter the
equation only through the surplus ``s = r - k``; the solver works in ``s`` so
that shifting ``k`` and ``r_bar`` together leaves every computed number
unchanged.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import kernels
from .model import boundary_contract, compute_xbar
from .numerics import golden_section_max


@dataclass(frozen=True)
class Grid:
    """Uniform mesh ``x_i = i * step``, ``i = 0..N``."""

    n: int
    x_bar: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid needs N >= 2 (at least one interior node)")
        if not self.x_bar > 0:
            raise ValueError("x_bar must be positive")

    @property
    def step(self):
        return self.x_bar / self.n

    @property
    def n_interior(self):
        return self.n - 1

    @property
    def nodes(self):
        x = np.arange(self.n + 1) * self.step
        x[-1] = self.x_bar
        return x

    @property
    def interior(self):
        return self.nodes[1:-1]


@dataclass
class Policy:
    """Nodal controls on all ``N + 1`` nodes, stored as surplus ``r - k``.

    The two boundary entries hold the constant contracts that realise the
    Dirichlet data; the solver only optimises the interior ones.
    """

    surplus: np.ndarray
    effort: np.ndarray
    k: float

    @property
    def rent(self):
        return self.k + self.surplus

    @classmethod
    def from_rent(cls, rent, effort, k):
        return cls(np.asarray(rent, dtype=float) - k, np.asarray(effort, dtype=float), k)

    def copy(self):
        return Policy(self.surplus.copy(), self.effort.copy(), self.k)

    def admissibility_gap(self, bundle):
        """``max_i h(a_i) - U(s_i)``; non-positive for an admissible policy."""
        return float(np.max(bundle.h(self.effort) - bundle.U(self.surplus)))


@dataclass
class ValueFunction:
    values: np.ndarray


@dataclass
class TridiagonalSystem:
    """Rows of ``A w + B = 0`` over the interior nodes; ``sub[0]`` and
    ``sup[-1]`` multiply boundary values and are folded into ``rhs``."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def matvec(self, w):
        out = self.diag * w
        out[1:] += self.sub[1:] * w[:-1]
        out[:-1] += self.sup[:-1] * w[1:]
        return out

    def residual(self, w):
        return self.matvec(w) + self.rhs

    def dense(self):
        n = self.diag.shape[0]
        a = np.diag(self.diag)
        a[np.arange(1, n), np.arange(n - 1)] = self.sub[1:]
        a[np.arange(n - 1), np.arange(1, n)] = self.sup[:-1]
        return a


@dataclass(frozen=True)
class HowardConfig:
    tol: float = 1e-9
    max_iter: int = 200
    rent_grid: int = 201
    effort_grid: int = 201
    refine: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.rent_grid < 2 or self.effort_grid < 2:
            raise ValueError("control grids need at least 2 points")


@dataclass
class HowardResult:
    value: ValueFunction
    policy: Policy
    iterations: int
    history: List[float]
    converged: bool
    grid: Grid
    v0: float
    iterates: List[np.ndarray] = field(default_factory=list)


# switching controls needs a row gain above this (relative to max |v|)
SWITCH_MARGIN = 1e-12


def coefficients(x, r, a, params, bundle):
    """Drift ``b``, diffusion ``d``, discount ``c`` and reward ``f`` at ``(x, r, a)``."""
    s = np.asarray(r, dtype=float) - params.k
    return _coefficients_surplus(x, s, a, params, bundle)


def _coefficients_surplus(x, s, a, params, bundle):
    a = np.asarray(a, dtype=float)
    b = params.delta * np.asarray(x, dtype=float) + bundle.h(a) - bundle.U(s)
    d = 0.5 * (params.sigma * bundle.diffusion_factor(a)) ** 2
    c = -params.delta * np.ones_like(b)
    f = bundle.phi(a) - s
    return b, d, c, f


def assemble_system(policy, grid, params, bundle, v0_boundary, vn_boundary=0.0):
    """Upwind operator and source for a frozen policy (interior rows only)."""
    x = grid.interior
    s = policy.surplus[1:-1]
    a = policy.effort[1:-1]
    b, d, c, f = _coefficients_surplus(x, s, a, params, bundle)
    dx = grid.step
    bp = np.maximum(b, 0.0)
    bm = np.maximum(-b, 0.0)
    sub = bm / dx + d / dx ** 2
    sup = bp / dx + d / dx ** 2
    diag = c - np.abs(b) / dx - 2.0 * d / dx ** 2
    rhs = f.copy()
    rhs[0] += sub[0] * v0_boundary
    rhs[-1] += sup[-1] * vn_boundary
    for name, arr in (("sub", sub), ("diag", diag), ("sup", sup), ("rhs", rhs)):
        bad = ~np.isfinite(arr)
        if bad.any():
            raise FloatingPointError(f"non-finite {name} coefficient at interior node {int(np.argmax(bad)) + 1}")
    return TridiagonalSystem(sub, diag, sup, rhs)


def solve_tridiagonal(system):
    """Return ``w`` with ``A w + B = 0``."""
    return kernels.thomas(system.sub, system.diag, system.sup, -system.rhs)


def check_diagonal_dominance(system):
    """``(ok, margin)`` with ``margin = min_i |diag_i| - |sub_i| - |sup_i|``.

    The boundary couplings count toward the margin (they are genuine matrix
    entries of the full operator before folding into the source).
    """
    margin = np.abs(system.diag) - np.abs(system.sub) - np.abs(system.sup)
    worst = float(margin.min())
    return bool(worst >= 0.0 and np.all(system.diag < 0.0)), worst


def policy_evaluation(policy, grid, params, bundle, v0_boundary, vn_boundary=0.0):
    system = assemble_system(policy, grid, params, bundle, v0_boundary, vn_boundary)
    values = np.empty(grid.n + 1)
    values[0] = v0_boundary
    values[-1] = vn_boundary
    values[1:-1] = solve_tridiagonal(system)
    return ValueFunction(values)


def optimal_rent_closed_form(dv, params, bundle):
    """Pointwise rent maximiser of ``-dv * U(r - k) - r`` on ``[k, r_bar]``."""
    dv = np.asarray(dv, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(dv < 0.0, bundle.inv_dU(-1.0 / np.where(dv < 0.0, dv, -1.0)), 0.0)
    rent = params.k + np.minimum(inner, params.max_surplus)
    return float(rent) if rent.ndim == 0 else rent


@dataclass
class ControlTable:
    """Candidate controls: surplus row ``j`` times effort column ``l``."""

    surplus: np.ndarray
    effort: np.ndarray
    g: np.ndarray
    d: np.ndarray
    f: np.ndarray
    cap: np.ndarray

    @classmethod
    def build(cls, params, bundle, config):
        s = np.linspace(0.0, params.max_surplus, config.rent_grid)
        us = bundle.U(s)
        cap = bundle.inv_h(us)
        t = np.linspace(0.0, 1.0, config.effort_grid)
        a = cap[:, None] * t[None, :]
        g = bundle.h(a) - us[:, None]
        d = 0.5 * (params.sigma * bundle.diffusion_factor(a)) ** 2
        f = bundle.phi(a) - s[:, None]
        return cls(s, a, g, d, f, cap)


def _differences(value, grid):
    v = value.values
    dx = grid.step
    fwd = (v[2:] - v[1:-1]) / dx
    bwd = (v[1:-1] - v[:-2]) / dx
    sec = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dx ** 2
    return fwd, bwd, sec


def _row_values(x, fwd, bwd, sec, base, delta, g, d, f):
    b = delta * x + g
    return b * np.where(b >= 0.0, fwd, bwd) + d * sec + base + f


def _improve(value, grid, params, bundle, config, table, current=None):
    x = grid.interior
    fwd, bwd, sec = _differences(value, grid)
    base = -params.delta * value.values[1:-1]
    j, l, best = kernels.improve_scan(x, fwd, bwd, sec, base, params.delta,
                                      table.g, table.d, table.f, table.effort)
    s_new = table.surplus[j]
    a_new = table.effort[j, l]

    if config.refine:
        na = config.effort_grid
        lo = table.effort[j, np.maximum(l - 1, 0)]
        hi = table.effort[j, np.minimum(l + 1, na - 1)]
        us = bundle.U(s_new)

        def objective(a):
            g = bundle.h(a) - us
            d = 0.5 * (params.sigma * bundle.diffusion_factor(a)) ** 2
            return _row_values(x, fwd, bwd, sec, base, params.delta, g, d, bundle.phi(a) - s_new)

        a_ref, v_ref = golden_section_max(objective, lo, hi)
        # keep the refined effort inside the admissible interval exactly
        a_ref = np.minimum(a_ref, table.cap[j])
        v_ref = objective(a_ref)
        better = v_ref > best
        a_new = np.where(better, a_ref, a_new)
        best = np.where(better, v_ref, best)

    if current is not None:
        s_cur = current.surplus[1:-1]
        a_cur = current.effort[1:-1]
        b, d, _, f = _coefficients_surplus(x, s_cur, a_cur, params, bundle)
        g = b - params.delta * x
        v_cur = _row_values(x, fwd, bwd, sec, base, params.delta, g, d, f)
        margin = SWITCH_MARGIN * max(1.0, float(np.abs(value.values).max()))
        keep = best <= v_cur + margin
        s_new = np.where(keep, s_cur, s_new)
        a_new = np.where(keep, a_cur, a_new)
        best = np.where(keep, v_cur, best)
    return s_new, a_new, best


def _boundary_policy(params, bundle, grid, interior_s, interior_a):
    s0, a0, _ = boundary_contract(params, bundle)
    sn = min(float(bundle.invU(np.array([params.delta * grid.x_bar]))[0]), params.max_surplus)
    surplus = np.concatenate(([s0], interior_s, [sn]))
    effort = np.concatenate(([a0], interior_a, [0.0]))
    return Policy(surplus, effort, params.k)


def initial_policy(grid, params, bundle):
    """Zero-effort contract ``(k, 0)`` at every interior node."""
    zeros = np.zeros(grid.n_interior)
    return _boundary_policy(params, bundle, grid, zeros, zeros)


def improve_policy(value, grid, params, bundle, config, current=None, table=None):
    """Greedy policy for a frozen value vector.

    Maximises the discrete row expression over the control grid at every
    interior node, optionally refining the effort by golden section at the
    winning rent row. When ``current`` is given, a node keeps its current
    control unless the new one is strictly better, which makes Howard's
    iteration monotone and stops it from cycling between tied controls.
    """
    if table is None:
        table = ControlTable.build(params, bundle, config)
    s, a, _ = _improve(value, grid, params, bundle, config, table, current)
    return _boundary_policy(params, bundle, grid, s, a)


def hjb_residual(value, grid, params, bundle, config, table=None):
    """Row-wise ``max_{(r,a)} (A v + B)`` at a given value vector."""
    if table is None:
        table = ControlTable.build(params, bundle, config)
    _, _, best = _improve(value, grid, params, bundle, config, table)
    return best


def howard_solve(grid, params, bundle, config=HowardConfig(), keep_iterates=False):
    """Policy iteration from the zero-effort contract.

    The value change of the first evaluation is measured against ``v = 0``.
    Stops when the sup-norm change drops below ``config.tol`` or the policy
    stops changing; otherwise returns the last iterate with
    ``converged=False`` after ``config.max_iter`` evaluations.
    """
    if not params.max_surplus > 0:
        raise ValueError("the solver needs r_bar > k")
    _, _, v0 = boundary_contract(params, bundle)
    table = ControlTable.build(params, bundle, config)
    policy = initial_policy(grid, params, bundle)
    previous = np.zeros(grid.n + 1)
    history = []
    iterates = []
    converged = False
    value = None
    for it in range(1, config.max_iter + 1):
        value = policy_evaluation(policy, grid, params, bundle, v0)
        if keep_iterates:
            iterates.append(value.values.copy())
        change = float(np.max(np.abs(value.values - previous)))
        history.append(change)
        if change < config.tol:
            converged = True
            break
        previous = value.values
        s, a, _ = _improve(value, grid, params, bundle, config, table, current=policy)
        fixed = np.array_equal(s, policy.surplus[1:-1]) and np.array_equal(a, policy.effort[1:-1])
        if fixed:
            converged = True
            break
        policy = _boundary_policy(params, bundle, grid, s, a)
    return HowardResult(value, policy, it, history, converged, grid, v0, iterates)


def solve(params, bundle, n=500, config=HowardConfig(), keep_iterates=False):
    """Build the grid on ``[0, x_bar]`` and run :func:`howard_solve`."""
    grid = Grid(n, compute_xbar(params, bundle))
    return howard_solve(grid, params, bundle, config, keep_iterates)


def policy_curves(value, policy, grid, interior_only=True):
    """Per-node table ``(x, v, r*, a*)`` and the ``(a*, r*)`` curve sorted by effort.

    The table has one row per node. The curve is built from the optimised
    interior nodes unless ``interior_only`` is false (the boundary entries are
    the fixed Dirichlet contracts, not HJB maximisers). Duplicate efforts keep
    the smallest rent.
    """
    rows = np.column_stack([grid.nodes, value.values, policy.rent, policy.effort])
    sl = slice(1, -1) if interior_only else slice(None)
    effort = policy.effort[sl]
    rent = policy.rent[sl]
    order = np.lexsort((rent, effort))
    a_sorted = effort[order]
    r_sorted = rent[order]
    first = np.concatenate(([True], a_sorted[1:] != a_sorted[:-1]))
    curve = np.column_stack([a_sorted[first], r_sorted[first]])
    return rows, curve


def rent_cross_check(result, params, bundle, config=HowardConfig()):
    """Compare the solved rent with the pointwise closed form.

    For each interior node, the one-sided difference matching the upwind
    direction of the solved control is fed to
    :func:`optimal_rent_closed_form`. Returns ``(fraction_within_one_cell,
    abs_gap)``.
    """
    grid = result.grid
    fwd, bwd, _ = _differences(result.value, grid)
    x = grid.interior
    s = result.policy.surplus[1:-1]
    a = result.policy.effort[1:-1]
    b, _, _, _ = _coefficients_surplus(x, s, a, params, bundle)
    dv = np.where(b >= 0.0, fwd, bwd)
    closed = optimal_rent_closed_form(dv, params, bundle)
    gap = np.abs(np.atleast_1d(closed) - result.policy.rent[1:-1])
    cell = params.max_surplus / (config.rent_grid - 1)
    return float(np.mean(gap <= cell * (1.0 + 1e-9))), gap
