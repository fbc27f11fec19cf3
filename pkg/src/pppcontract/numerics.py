"""Small scalar/vectorised numerical helpers shared by the modules."""
import numpy as np

INV_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def monotone_inverse(f, y, tol=1e-12, max_iter=200, bracket=1.0):
    """Invert a strictly increasing ``f`` with ``f(0) <= y`` by bisection.

    Works elementwise on arrays. The upper end of the bracket starts at
    ``bracket`` and is doubled until ``f(hi) >= y``. The lower bracket end is
    returned, so ``f(x) <= y`` always holds and admissibility constraints of
    the form ``h(a) <= c`` survive the inversion exactly.
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    lo = np.zeros_like(y)
    hi = np.full_like(y, float(bracket))
    for _ in range(max_iter):
        short = f(hi) < y
        if not short.any():
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2.0 * hi, hi)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        below = f(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    x = np.where(y <= f(np.zeros_like(y)), 0.0, lo)
    return float(x[0]) if scalar else x


def golden_section_max(f, lo, hi, tol=1e-10, max_iter=200):
    """Vectorised golden-section search for the maximiser of ``f`` on [lo, hi].

    ``f`` maps an array of abscissae (same shape as ``lo``) to values.
    Returns ``(x, f(x))``. Assumes unimodality inside each bracket; callers
    bracket from a prior scan.
    """
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    c = b - INV_GOLDEN * (b - a)
    d = a + INV_GOLDEN * (b - a)
    fc = f(c)
    fd = f(d)
    for _ in range(max_iter):
        if np.all(b - a <= tol):
            break
        left = fc >= fd
        # keep [a, d] where f(c) >= f(d), otherwise [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - INV_GOLDEN * (b - a)
        new_d = a + INV_GOLDEN * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        probe = np.where(left, c_next, d_next)
        fp = f(probe)
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = c_next, d_next
    x = 0.5 * (a + b)
    return x, f(x)


def scan_then_refine(f, lo, hi, n_scan=4096, tol=1e-10):
    """Maximise a scalar function on [lo, hi]: uniform scan, then golden section.

    Returns ``(argmax, max)``. The refined point only replaces the scan winner
    when it is at least as good.
    """
    if hi <= lo:
        return float(lo), float(f(np.array([lo]))[0])
    xs = np.linspace(lo, hi, n_scan)
    vals = f(xs)
    i = int(np.nanargmax(vals))
    best_x, best_v = xs[i], vals[i]
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, n_scan - 1)]
    x, v = golden_section_max(f, np.array([a]), np.array([b]), tol=tol)
    if v[0] >= best_v:
        best_x, best_v = x[0], v[0]
    return float(best_x), float(best_v)
