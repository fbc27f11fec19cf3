"""Model parameters, the function family and the analytic scalar quantities.

All maps in a :class:`FunctionBundle` must accept numpy arrays and work
elementwise; the solver evaluates them on whole control grids at once.
"""
import warnings
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np

from .numerics import monotone_inverse, scan_then_refine

Fn = Callable[[np.ndarray], np.ndarray]

SCAN_POINTS = 4096
REFINE_TOL = 1e-10
INADA_HIGH_MAX = 0.05
INADA_LOW_MIN = 100.0
INADA_LOW_AT = 1e-8
SLOPE_AT_INFINITY_TOL = 0.05
GROWTH_RATIO_MIN = 2.0
ROUND_TRIP_TOL = 1e-8
FD_STEP = 1e-5
FD_CONST = 1e4
UPPER_BOUND_CAP = 1e8


class DomainError(ValueError):
    """Raised when a closed-form quantity is evaluated outside its domain."""


@dataclass(frozen=True)
class ModelParams:
    """Scalar model parameters.

    ``r_bar`` defaults to ``k + 4``. ``r_bar == k`` is accepted (it makes the
    control set the single point ``(k, 0)``) so the degenerate limits can be
    evaluated; the solver itself requires ``r_bar > k``.
    """

    delta: float = 0.1
    k: float = 2.0
    sigma: float = 0.8
    r_bar: float = None
    c0: float = 20.0
    x0_welfare: float = 0.0

    def __post_init__(self):
        if self.r_bar is None:
            object.__setattr__(self, "r_bar", self.k + 4.0)
        for name in ("delta", "k", "sigma"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if not (np.isfinite(self.r_bar) and self.r_bar >= self.k):
            raise ValueError(f"r_bar must be >= k (k={self.k}), got {self.r_bar!r}")
        if not self.c0 >= 0:
            raise ValueError(f"c0 must be non-negative, got {self.c0!r}")

    @property
    def max_surplus(self):
        """Largest admissible rent in excess of the cost drift, ``r_bar - k``."""
        return self.r_bar - self.k


@dataclass(frozen=True)
class FunctionBundle:
    """Utility ``U``, effort impact ``phi``, effort cost ``h`` and
    ``psi = (dh/dphi)**2 / 2``, with the derivatives and inverses used by the
    solver."""

    U: Fn
    dU: Fn
    invU: Fn
    inv_dU: Fn
    phi: Fn
    dphi: Fn
    h: Fn
    dh: Fn
    inv_h: Fn
    psi: Fn
    inv_psi: Fn
    name: str = "custom"

    def diffusion_factor(self, a):
        """``dh(a) / dphi(a)``, the volatility loading per unit ``sigma``."""
        return self.dh(a) / self.dphi(a)

    def effort_ceiling(self, surplus):
        """Largest admissible effort for a rent surplus ``r - k``."""
        return self.inv_h(self.U(surplus))


def example_bundle():
    """Square-root utility with the ``x + log(1 + x)`` impact family.

    ``psi(a) = (1 + a) / 2`` so the incentive map has the closed form
    ``a = (y / sigma)**2 - 1``. ``h`` has no closed-form inverse; it is
    inverted by bisection.
    """

    def U(x):
        return np.sqrt(x)

    def dU(x):
        return 0.5 / np.sqrt(x)

    def invU(u):
        return np.square(u)

    def inv_dU(m):
        return 0.25 / np.square(m)

    def phi(x):
        return x + np.log1p(x)

    def dphi(x):
        return (2.0 + x) / (1.0 + x)

    def h(x):
        return (2.0 / 3.0) * np.sqrt(1.0 + x) * (x + 4.0) - 8.0 / 3.0

    def dh(x):
        return (2.0 + x) / np.sqrt(1.0 + x)

    def inv_h(c):
        return monotone_inverse(h, c)

    def psi(a):
        return 0.5 * (1.0 + a)

    def inv_psi(q):
        return 2.0 * q - 1.0

    return FunctionBundle(U, dU, invU, inv_dU, phi, dphi, h, dh, inv_h, psi, inv_psi, name="example")


BUNDLES = {"example": example_bundle}


def get_bundle(name):
    """Look up a named function family. Register new ones in ``BUNDLES``."""
    try:
        return BUNDLES[name]()
    except KeyError:
        raise ValueError(f"unknown function bundle {name!r}; known: {sorted(BUNDLES)}") from None


@dataclass
class Check:
    name: str
    passed: bool
    worst: float
    detail: str = ""
    enforced: bool = True


@dataclass
class ValidationReport:
    checks: List[Check] = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks if c.enforced)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self):
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else ("FAIL" if c.enforced else "WARN")
            line = f"{status}  {c.name:<28s} worst={c.worst:.6g}"
            if c.detail:
                line += f"  ({c.detail})"
            lines.append(line)
        return "\n".join(lines)


def _noise(values):
    finite = values[np.isfinite(values)]
    scale = float(np.max(np.abs(finite))) if finite.size else 1.0
    return 64.0 * np.finfo(float).eps * max(scale, 1.0)


def validate_assumptions(bundle, domain_max=50.0, n_samples=500):
    """Check the structural assumptions on a function family numerically.

    Every check is evaluated on a uniform sample of ``[0, domain_max]`` and
    reported with its worst-case violation; nothing raises. The asymptotic
    conditions can only be probed at finite points (thresholds are the module
    constants). The two Inada probes are reported but do not affect
    ``report.passed``.
    """
    if n_samples < 10:
        raise ValueError("n_samples must be >= 10")
    if not domain_max > 0:
        raise ValueError("domain_max must be positive")

    xs = np.linspace(0.0, domain_max, n_samples)
    inner = xs[1:]
    report = ValidationReport()

    def add(name, ok, worst, detail="", enforced=True):
        report.checks.append(Check(name, bool(ok), float(worst), detail, enforced))

    def evaluate(name, f, pts):
        with np.errstate(all="ignore"):
            vals = np.asarray(f(pts), dtype=float) * np.ones_like(pts)
        bad = ~np.isfinite(vals)
        if bad.any():
            add(name, False, np.inf, f"non-finite value at x={pts[np.argmax(bad)]:.6g}")
            return None
        return vals

    def increasing(name, f):
        vals = evaluate(name, f, xs)
        if vals is not None:
            d1 = np.diff(vals)
            add(name, d1.min() > 0, -d1.min())

    def curvature(name, f, pts, sign, strict):
        vals = evaluate(name, f, pts)
        if vals is None:
            return
        d2 = sign * (vals[2:] - 2.0 * vals[1:-1] + vals[:-2])
        noise = _noise(vals)
        worst = d2.max()
        ok = worst < -noise if strict else worst <= noise
        add(name, ok, worst)

    def at_zero(name, f):
        vals = evaluate(name, f, np.zeros(1))
        if vals is not None:
            add(name, abs(vals[0]) <= 1e-14, abs(vals[0]))

    def round_trip(name, fwd, inv, pts):
        with np.errstate(all="ignore"):
            back = inv(fwd(pts))
        err = np.abs(back - pts)
        if not np.all(np.isfinite(err)):
            add(name, False, np.inf, f"non-finite value at x={pts[np.argmax(~np.isfinite(err))]:.6g}")
            return
        add(name, err.max() <= ROUND_TRIP_TOL * max(1.0, np.abs(pts).max()), err.max())

    def derivative(name, f, df, pts):
        eps = FD_STEP
        with np.errstate(all="ignore"):
            fd = (f(pts + eps) - f(pts - eps)) / (2.0 * eps)
            exact = df(pts)
        err = np.abs(exact - fd)
        if not np.all(np.isfinite(err)):
            add(name, False, np.inf, f"non-finite value at x={pts[np.argmax(~np.isfinite(err))]:.6g}")
            return
        tol = FD_CONST * eps ** 2 * np.maximum(1.0, np.abs(exact))
        add(name, np.all(err <= tol), err.max())

    # utility
    at_zero("U(0)=0", bundle.U)
    increasing("U increasing", bundle.U)
    curvature("U strictly concave", bundle.U, xs, +1.0, strict=True)
    with np.errstate(all="ignore"):
        du_hi = float(bundle.dU(np.array([domain_max]))[0])
        du_lo = float(bundle.dU(np.array([INADA_LOW_AT]))[0])
    add("Inada U'(inf)=0", np.isfinite(du_hi) and du_hi < INADA_HIGH_MAX, du_hi,
        f"dU({domain_max:g}) < {INADA_HIGH_MAX}", enforced=False)
    add("Inada U'(0)=inf", du_lo > INADA_LOW_MIN, du_lo, f"dU({INADA_LOW_AT:g}) > {INADA_LOW_MIN:g}",
        enforced=False)

    # effort impact
    at_zero("phi(0)=0", bundle.phi)
    increasing("phi increasing", bundle.phi)
    curvature("phi strictly concave", bundle.phi, xs, +1.0, strict=True)
    dphi0 = evaluate("phi'(0) finite", bundle.dphi, np.zeros(1))
    if dphi0 is not None:
        add("phi'(0) finite", True, dphi0[0])
    phi_vals = evaluate("phi(x)>=x", bundle.phi, xs)
    if phi_vals is not None:
        gap = xs - phi_vals
        add("phi(x)>=x", gap.max() <= _noise(phi_vals), gap.max())
    dphi_hi = evaluate("phi'(inf)=1", bundle.dphi, np.array([domain_max]))
    if dphi_hi is not None:
        add("phi'(inf)=1", abs(dphi_hi[0] - 1.0) < SLOPE_AT_INFINITY_TOL, abs(dphi_hi[0] - 1.0))

    # effort cost
    at_zero("h(0)=0", bundle.h)
    curvature("h convex", bundle.h, xs, -1.0, strict=False)
    dh_ends = evaluate("h'(0)>0", bundle.dh, np.array([0.0, domain_max]))
    if dh_ends is not None:
        add("h'(0)>0", dh_ends[0] > 0, dh_ends[0])
        ratio = dh_ends[1] / dh_ends[0] if dh_ends[0] > 0 else 0.0
        add("h'(inf)=inf", ratio >= GROWTH_RATIO_MIN, ratio,
            f"dh({domain_max:g})/dh(0) >= {GROWTH_RATIO_MIN:g}")

    # psi
    psi_vals = evaluate("psi >= psi floor > 0", bundle.psi, xs)
    if psi_vals is not None and dh_ends is not None and dphi0 is not None:
        floor = 0.5 * (dh_ends[0] / dphi0[0]) ** 2
        worst = floor - psi_vals.min()
        add("psi >= psi floor > 0", floor > 0 and worst <= _noise(psi_vals), worst)
    psi_def = evaluate("psi = (h'/phi')^2/2", lambda a: bundle.psi(a) - 0.5 * bundle.diffusion_factor(a) ** 2, xs)
    if psi_def is not None and psi_vals is not None:
        worst = np.abs(psi_def).max()
        add("psi = (h'/phi')^2/2", worst <= 1e-10 * max(1.0, np.abs(psi_vals).max()), worst)
    if psi_vals is not None:
        qs = np.linspace(psi_vals[0], psi_vals[-1], n_samples)
        curvature("h o psi^-1 convex", lambda q: bundle.h(bundle.inv_psi(q)), qs, -1.0, strict=False)

    round_trip("invU round trip", bundle.U, bundle.invU, xs)
    round_trip("inv_dU round trip", bundle.dU, bundle.inv_dU, inner)
    round_trip("inv_h round trip", bundle.h, bundle.inv_h, xs)
    round_trip("inv_psi round trip", bundle.psi, bundle.inv_psi, xs)

    fd_pts = np.linspace(domain_max / n_samples, domain_max, n_samples)
    derivative("dU matches U", bundle.U, bundle.dU, fd_pts)
    derivative("dphi matches phi", bundle.phi, bundle.dphi, fd_pts)
    derivative("dh matches h", bundle.h, bundle.dh, fd_pts)
    return report


def _scalar(f, x):
    return float(np.asarray(f(np.array([float(x)])), dtype=float)[0])


def compute_xbar(params, bundle):
    """Right end of the state domain, ``U((U')^-1(h'(0)/phi'(0))) / delta``."""
    ratio = _scalar(bundle.dh, 0.0) / _scalar(bundle.dphi, 0.0)
    with np.errstate(all="ignore"):
        arg = _scalar(bundle.inv_dU, ratio)
    if not (np.isfinite(ratio) and ratio > 0 and np.isfinite(arg) and arg >= 0):
        raise DomainError(f"inverse marginal utility undefined at h'(0)/phi'(0) = {ratio!r}")
    return _scalar(bundle.U, arg) / params.delta


def compute_abar(params, bundle):
    """Upper bound on any admissible effort, ``h^-1(U(r_bar - k))``."""
    return _scalar(bundle.inv_h, _scalar(bundle.U, params.max_surplus))


def boundary_contract(params, bundle):
    """Best constant contract with zero consortium surplus.

    Returns ``(surplus, effort, value)`` where ``surplus`` maximises
    ``phi(h^-1(U(s))) - s`` on ``[0, r_bar - k]``, ``effort = h^-1(U(surplus))``
    and ``value`` is the maximum divided by ``delta``.
    """
    smax = params.max_surplus
    if smax <= 0:
        return 0.0, 0.0, 0.0

    def objective(s):
        return bundle.phi(bundle.inv_h(bundle.U(s))) - s

    s, best = scan_then_refine(objective, 0.0, smax, n_scan=SCAN_POINTS, tol=REFINE_TOL)
    if best < 0.0:
        s, best = 0.0, 0.0
    return s, _scalar(bundle.inv_h, _scalar(bundle.U, s)), best / params.delta


def boundary_v0(params, bundle):
    """Public value at zero consortium value (left Dirichlet condition)."""
    return boundary_contract(params, bundle)[2]


def upper_bound_v(bundle, cap=UPPER_BOUND_CAP):
    """``sup_{x >= 0} phi'(0) h^-1(U(x)) - x`` over a widening bracket.

    Not divided by ``delta``. If no interior maximum shows up before ``cap``
    a ``RuntimeWarning`` is issued and the value at the cap is returned.
    """
    slope = _scalar(bundle.dphi, 0.0)

    def objective(x):
        return slope * bundle.inv_h(bundle.U(x)) - x

    hi = 1.0
    while True:
        xs = np.linspace(0.0, hi, SCAN_POINTS)
        vals = objective(xs)
        i = int(np.argmax(vals))
        if i < SCAN_POINTS - 1:
            _, best = scan_then_refine(objective, 0.0, hi, n_scan=SCAN_POINTS, tol=REFINE_TOL)
            return max(best, float(vals[i]))
        if hi >= cap:
            warnings.warn(f"upper_bound_v: no maximum found below {cap:g}; reporting the cap value",
                          RuntimeWarning)
            return float(vals[-1])
        hi = min(2.0 * hi, cap)


def incentive_effort(y, params, bundle):
    """Effort induced by volatility loading ``y``: ``(h'/phi')^-1(y / sigma)``.

    Returns ``(effort, clamped)``. Loadings below ``sigma h'(0)/phi'(0)`` have
    no preimage and map to zero effort with ``clamped`` set.
    """
    ratio = np.asarray(y, dtype=float) / params.sigma
    floor = _scalar(bundle.dh, 0.0) / _scalar(bundle.dphi, 0.0)
    clamped = ratio < floor
    with np.errstate(invalid="ignore"):
        a = np.where(clamped, 0.0, bundle.inv_psi(0.5 * ratio ** 2))
    a = np.maximum(a, 0.0)
    if np.ndim(a) == 0:
        return float(a), bool(clamped)
    return a, clamped
