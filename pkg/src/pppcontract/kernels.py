"""Hot loops: tridiagonal solve, policy-improvement scan, Euler path stepping.

Each kernel has a compiled form (``*_nb``, numba) and a numpy form
(``*_np``). The public wrappers dispatch on :func:`pppcontract._accel.use_numba`.
Both forms evaluate the same floating-point expressions in the same order so
their outputs agree to the last bit on the same inputs.
"""
import numpy as np

from ._accel import njit, use_numba

# ---------------------------------------------------------------------------
# Thomas algorithm
# ---------------------------------------------------------------------------


def _thomas(sub, diag, sup, rhs):
    n = rhs.shape[0]
    c = np.empty(n)
    d = np.empty(n)
    c[0] = sup[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - sub[i] * c[i - 1]
        if m == 0.0:
            raise ZeroDivisionError("zero pivot in tridiagonal solve")
        c[i] = sup[i] / m
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m
    x = np.empty(n)
    x[n - 1] = d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


thomas_np = _thomas
thomas_nb = njit(_thomas)


def thomas(sub, diag, sup, rhs):
    """Solve ``T x = rhs`` for tridiagonal ``T``.

    ``sub[0]`` and ``sup[-1]`` are ignored. No pivoting: the caller guarantees
    diagonal dominance.
    """
    args = [np.ascontiguousarray(a, dtype=float) for a in (sub, diag, sup, rhs)]
    if args[1][0] == 0.0:
        raise ZeroDivisionError("zero pivot in tridiagonal solve")
    if use_numba():
        return thomas_nb(*args)
    return thomas_np(*args)


# ---------------------------------------------------------------------------
# Policy improvement scan
#
# For node i the discrete row expression of a candidate control is
#     b * D + d * sec - delta * v_i + f
# with b = delta * x_i + g, D the forward difference when b >= 0 and the
# backward difference otherwise. g = h(a) - U(s), d the diffusion and
# f = phi(a) - s are tabulated per (rent row j, effort column l).
# ---------------------------------------------------------------------------


@njit
def improve_scan_nb(x, fwd, bwd, sec, base, delta, g_tab, d_tab, f_tab, a_tab):
    n = x.shape[0]
    nr, na = g_tab.shape
    best_j = np.zeros(n, dtype=np.int64)
    best_l = np.zeros(n, dtype=np.int64)
    best_v = np.empty(n)
    for i in range(n):
        drift0 = delta * x[i]
        bv = -np.inf
        bj = 0
        bl = 0
        for j in range(nr):
            for l in range(na):
                b = drift0 + g_tab[j, l]
                if b >= 0.0:
                    val = b * fwd[i] + d_tab[j, l] * sec[i] + base[i] + f_tab[j, l]
                else:
                    val = b * bwd[i] + d_tab[j, l] * sec[i] + base[i] + f_tab[j, l]
                if val > bv:
                    bv = val
                    bj = j
                    bl = l
                elif val == bv:
                    # ties: smallest effort, then smallest rent
                    if a_tab[j, l] < a_tab[bj, bl] or (a_tab[j, l] == a_tab[bj, bl] and j < bj):
                        bj = j
                        bl = l
        best_j[i] = bj
        best_l[i] = bl
        best_v[i] = bv
    return best_j, best_l, best_v


def improve_scan_np(x, fwd, bwd, sec, base, delta, g_tab, d_tab, f_tab, a_tab, chunk=16):
    n = x.shape[0]
    nr, na = g_tab.shape
    g = g_tab.ravel()
    dd = d_tab.ravel()
    ff = f_tab.ravel()
    aa = a_tab.ravel()
    jj = np.repeat(np.arange(nr), na)
    best_j = np.zeros(n, dtype=np.int64)
    best_l = np.zeros(n, dtype=np.int64)
    best_v = np.empty(n)
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        b = (delta * x[sl])[:, None] + g[None, :]
        slope = np.where(b >= 0.0, fwd[sl][:, None], bwd[sl][:, None])
        val = b * slope + dd[None, :] * sec[sl][:, None] + base[sl][:, None] + ff[None, :]
        vmax = val.max(axis=1)
        tied = val == vmax[:, None]
        amin = np.where(tied, aa[None, :], np.inf).min(axis=1)
        tied &= aa[None, :] == amin[:, None]
        flat = np.argmax(tied, axis=1)  # first hit is the smallest rent row
        best_j[sl] = flat // na
        best_l[sl] = flat % na
        best_v[sl] = vmax
    return best_j, best_l, best_v


def improve_scan(x, fwd, bwd, sec, base, delta, g_tab, d_tab, f_tab, a_tab):
    """Grid argmax of the discrete row expression at every interior node.

    Returns ``(rent_row, effort_col, value)`` arrays.
    """
    args = [np.ascontiguousarray(a, dtype=float) for a in (x, fwd, bwd, sec, base)]
    tabs = [np.ascontiguousarray(t, dtype=float) for t in (g_tab, d_tab, f_tab, a_tab)]
    if use_numba():
        return improve_scan_nb(*args, float(delta), *tabs)
    return improve_scan_np(*args, float(delta), *tabs)


# ---------------------------------------------------------------------------
# Euler-Maruyama for the continuation value with discounted running rewards
# ---------------------------------------------------------------------------


@njit
def advance_paths_nb(state, disc, acc_c, acc_p, brown, phi_int, exits, normals, col0, col1,
                     inv_dx, g_tab, vol_tab, rc_tab, rp_tab, ph_tab,
                     delta, dt, sqrt_dt, decay, xbar, absorb, credit):
    n_paths = state.shape[0]
    last = g_tab.shape[0] - 2
    for p in range(n_paths):
        x = state[p]
        dsc = disc[p]
        ac = acc_c[p]
        ap = acc_p[p]
        w = brown[p]
        pi = phi_int[p]
        ex = exits[p]
        for t in range(col0, col1):
            u = x * inv_dx
            k = int(u)
            if k > last:
                k = last
            fr = u - k
            ph = ph_tab[k] + fr * (ph_tab[k + 1] - ph_tab[k])
            dw = sqrt_dt * normals[p, t]
            w += dw
            pi += ph * dt
            if absorb and ex > 0:
                dsc *= decay
                continue
            g = g_tab[k] + fr * (g_tab[k + 1] - g_tab[k])
            vol = vol_tab[k] + fr * (vol_tab[k + 1] - vol_tab[k])
            rc = rc_tab[k] + fr * (rc_tab[k + 1] - rc_tab[k])
            rp = rp_tab[k] + fr * (rp_tab[k + 1] - rp_tab[k])
            ac += dsc * rc * dt
            ap += dsc * rp * dt
            x = x + (delta * x + g) * dt + vol * dw
            dsc *= decay
            if x < 0.0:
                x = 0.0
                ex += 1
                if absorb:
                    ac += dsc * credit[0]
                    ap += dsc * credit[1]
            elif x > xbar:
                x = xbar
                ex += 1
                if absorb:
                    ac += dsc * credit[2]
                    ap += dsc * credit[3]
        state[p] = x
        disc[p] = dsc
        acc_c[p] = ac
        acc_p[p] = ap
        brown[p] = w
        phi_int[p] = pi
        exits[p] = ex


def advance_paths_np(state, disc, acc_c, acc_p, brown, phi_int, exits, normals, col0, col1,
                     inv_dx, g_tab, vol_tab, rc_tab, rp_tab, ph_tab,
                     delta, dt, sqrt_dt, decay, xbar, absorb, credit):
    last = g_tab.shape[0] - 2
    x = state.copy()
    dsc = disc.copy()
    ac = acc_c.copy()
    ap = acc_p.copy()
    w = brown.copy()
    pi = phi_int.copy()
    ex = exits.copy()
    for t in range(col0, col1):
        u = x * inv_dx
        k = np.minimum(u.astype(np.int64), last)
        fr = u - k

        def lerp(tab):
            return tab[k] + fr * (tab[k + 1] - tab[k])

        dw = sqrt_dt * normals[:, t]
        w += dw
        pi += lerp(ph_tab) * dt
        live = ex == 0 if absorb else np.ones(x.shape, dtype=np.bool_)
        ac = np.where(live, ac + dsc * lerp(rc_tab) * dt, ac)
        ap = np.where(live, ap + dsc * lerp(rp_tab) * dt, ap)
        x = np.where(live, x + (delta * x + lerp(g_tab)) * dt + lerp(vol_tab) * dw, x)
        dsc *= decay
        low = live & (x < 0.0)
        high = live & (x > xbar)
        x = np.where(low, 0.0, np.where(high, xbar, x))
        ex += low | high
        if absorb:
            ac = np.where(low, ac + dsc * credit[0], np.where(high, ac + dsc * credit[2], ac))
            ap = np.where(low, ap + dsc * credit[1], np.where(high, ap + dsc * credit[3], ap))
    state[:] = x
    disc[:] = dsc
    acc_c[:] = ac
    acc_p[:] = ap
    brown[:] = w
    phi_int[:] = pi
    exits[:] = ex


def advance_paths(*args):
    """Advance every path over normal columns ``[col0, col1)`` in place.

    Steps that leave ``[0, xbar]`` are put back on the boundary and counted in
    ``exits``. With ``absorb`` set, such a path is frozen from then on and its
    accumulators receive the terminal values ``credit = (consortium at 0,
    public at 0, consortium at xbar, public at xbar)`` discounted to the exit
    step; ``brown`` and ``phi_int`` keep running.
    """
    if use_numba():
        advance_paths_nb(*args)
    else:
        advance_paths_np(*args)
