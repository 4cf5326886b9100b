"""Numba kernels: right-hand side and Cash-Karp 5(4) stepping on the flat state.

The kernels operate on the packed representation produced by
``ModelSpec.packed`` so a single compiled function serves every chain length
and age resolution.  Status codes: 0 ok, 1 non-finite state, 2 step underflow.
"""
import numpy as np
from numba import njit

# Cash-Karp tableau.
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0
A51, A52, A53, A54 = -11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0
A61, A62, A63, A64, A65 = (1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0,
                           44275.0 / 110592.0, 253.0 / 4096.0)
B1, B3, B4, B6 = 37.0 / 378.0, 250.0 / 621.0, 125.0 / 594.0, 512.0 / 1771.0
# Difference between the 5th- and 4th-order weights (embedded error estimate).
E1 = B1 - 2825.0 / 27648.0
E3 = B3 - 18575.0 / 48384.0
E4 = B4 - 13525.0 / 55296.0
E5 = -277.0 / 14336.0
E6 = B6 - 1.0 / 4.0

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0


@njit(cache=True)
def rhs_kernel(y, phi, base, nsub, rate, mu, rho, xic, xii, dy):
    m = base.shape[0]
    pressure = np.empty(m)
    for k in range(m):
        b = base[k]
        ne, nc, ni, nh, nu = nsub[k, 0], nsub[k, 1], nsub[k, 2], nsub[k, 3], nsub[k, 4]
        size = 3 + ne + nc + ni + nh + nu
        csum = 0.0
        off = b + 1 + ne
        for j in range(nc):
            csum += y[off + j]
        isum = 0.0
        off += nc
        for j in range(ni):
            isum += y[off + j]
        n_live = 0.0
        for j in range(size - 1):  # all but D
            n_live += y[b + j]
        pressure[k] = (xic[k] * csum + xii[k] * isum) / n_live
    for i in range(m):
        b = base[i]
        ne, nc, ni, nh, nu = nsub[i, 0], nsub[i, 1], nsub[i, 2], nsub[i, 3], nsub[i, 4]
        s = 0.0
        for k in range(m):
            s += phi[i, k] * pressure[k]
        foi = y[b] * rho[i] * s
        dy[b] = -foi
        idx = b + 1
        inflow = foi
        r = rate[i, 0]
        for j in range(ne):
            out = r * y[idx]
            dy[idx] = inflow - out
            inflow = out
            idx += 1
        r = rate[i, 1]
        for j in range(nc):
            out = r * y[idx]
            dy[idx] = inflow - out
            inflow = out
            idx += 1
        to_r = (1.0 - mu[i, 0]) * inflow
        inflow = mu[i, 0] * inflow
        r = rate[i, 2]
        for j in range(ni):
            out = r * y[idx]
            dy[idx] = inflow - out
            inflow = out
            idx += 1
        to_r += (1.0 - mu[i, 1]) * inflow
        inflow = mu[i, 1] * inflow
        r = rate[i, 3]
        for j in range(nh):
            out = r * y[idx]
            dy[idx] = inflow - out
            inflow = out
            idx += 1
        to_r += (1.0 - mu[i, 2]) * inflow
        inflow = mu[i, 2] * inflow
        r = rate[i, 4]
        for j in range(nu):
            out = r * y[idx]
            dy[idx] = inflow - out
            inflow = out
            idx += 1
        dy[idx] = to_r + (1.0 - mu[i, 3]) * inflow
        dy[idx + 1] = mu[i, 3] * inflow


@njit(cache=True)
def _ck_step(y, h, phi, base, nsub, rate, mu, rho, xic, xii, K, ytmp, ynew):
    """One Cash-Karp step of size h; fills the 5th-order result into ynew."""
    dim = y.shape[0]
    rhs_kernel(y, phi, base, nsub, rate, mu, rho, xic, xii, K[0])
    for i in range(dim):
        ytmp[i] = y[i] + h * A21 * K[0, i]
    rhs_kernel(ytmp, phi, base, nsub, rate, mu, rho, xic, xii, K[1])
    for i in range(dim):
        ytmp[i] = y[i] + h * (A31 * K[0, i] + A32 * K[1, i])
    rhs_kernel(ytmp, phi, base, nsub, rate, mu, rho, xic, xii, K[2])
    for i in range(dim):
        ytmp[i] = y[i] + h * (A41 * K[0, i] + A42 * K[1, i] + A43 * K[2, i])
    rhs_kernel(ytmp, phi, base, nsub, rate, mu, rho, xic, xii, K[3])
    for i in range(dim):
        ytmp[i] = y[i] + h * (A51 * K[0, i] + A52 * K[1, i] + A53 * K[2, i]
                              + A54 * K[3, i])
    rhs_kernel(ytmp, phi, base, nsub, rate, mu, rho, xic, xii, K[4])
    for i in range(dim):
        ytmp[i] = y[i] + h * (A61 * K[0, i] + A62 * K[1, i] + A63 * K[2, i]
                              + A64 * K[3, i] + A65 * K[4, i])
    rhs_kernel(ytmp, phi, base, nsub, rate, mu, rho, xic, xii, K[5])
    for i in range(dim):
        ynew[i] = y[i] + h * (B1 * K[0, i] + B3 * K[2, i] + B4 * K[3, i]
                              + B6 * K[5, i])


@njit(cache=True)
def solve_fixed_segment(y, t0, t1, dt, phi, base, nsub, rate, mu, rho, xic, xii,
                        out_times, out_states):
    """Advance y in place from t0 to t1 at fixed dt (final step shortened).

    Snapshots at out_times (ascending, within (t0, t1]) are linearly
    interpolated between steps.  Returns (steps, status, t_fail).
    """
    dim = y.shape[0]
    K = np.empty((6, dim))
    ytmp = np.empty(dim)
    ynew = np.empty(dim)
    eps = 1e-12 * max(1.0, abs(t1))
    t = t0
    oi = 0
    steps = 0
    while t < t1 - eps:
        h = dt
        if t + h > t1:
            h = t1 - t
        _ck_step(y, h, phi, base, nsub, rate, mu, rho, xic, xii, K, ytmp, ynew)
        tn = t + h
        ok = True
        for i in range(dim):
            if not np.isfinite(ynew[i]):
                ok = False
                break
        if not ok:
            return steps, 1, tn
        while oi < out_times.shape[0] and out_times[oi] <= tn + eps:
            w = (out_times[oi] - t) / h
            for i in range(dim):
                out_states[oi, i] = (1.0 - w) * y[i] + w * ynew[i]
            oi += 1
        for i in range(dim):
            y[i] = ynew[i]
        t = tn
        steps += 1
    return steps, 0, t


@njit(cache=True)
def solve_adaptive_segment(y, t0, t1, h_init, dt_min, dt_max, abs_tol, rel_tol,
                           phi, base, nsub, rate, mu, rho, xic, xii,
                           out_times, out_states):
    """Embedded 5(4) error control; steps never cross t1 (truncated to hit it).

    Returns (accepted, rejected, status, h_next, t_fail).
    """
    dim = y.shape[0]
    K = np.empty((6, dim))
    ytmp = np.empty(dim)
    ynew = np.empty(dim)
    eps = 1e-12 * max(1.0, abs(t1))
    t = t0
    h = min(h_init, dt_max)
    oi = 0
    accepted = 0
    rejected = 0
    while t < t1 - eps:
        h_use = h
        if t + h_use > t1:
            h_use = t1 - t
        # Land exactly on the next requested output time: snapshots are then
        # solver states, never interpolants.
        if oi < out_times.shape[0] and t + h_use > out_times[oi] + eps:
            h_use = out_times[oi] - t
        _ck_step(y, h_use, phi, base, nsub, rate, mu, rho, xic, xii, K, ytmp, ynew)
        err = 0.0
        finite = True
        for i in range(dim):
            e = h_use * (E1 * K[0, i] + E3 * K[2, i] + E4 * K[3, i]
                         + E5 * K[4, i] + E6 * K[5, i])
            scale = abs_tol + rel_tol * abs(y[i])
            q = abs(e) / scale
            if not np.isfinite(q):
                finite = False
                break
            if q > err:
                err = q
        if finite and err <= 1.0:
            tn = t + h_use
            while oi < out_times.shape[0] and out_times[oi] <= tn + eps:
                w = (out_times[oi] - t) / h_use
                for i in range(dim):
                    out_states[oi, i] = (1.0 - w) * y[i] + w * ynew[i]
                oi += 1
            for i in range(dim):
                y[i] = ynew[i]
            t = tn
            accepted += 1
        else:
            rejected += 1
        if not finite:
            factor = FAC_MIN
        elif err == 0.0:
            factor = FAC_MAX
        else:
            factor = SAFETY * err ** -0.2
            if factor < FAC_MIN:
                factor = FAC_MIN
            elif factor > FAC_MAX:
                factor = FAC_MAX
        h = h_use * factor
        if h > dt_max:
            h = dt_max
        if h < dt_min:
            return accepted, rejected, 2, h, t
    return accepted, rejected, 0, h, t
