"""Compiled inner loops.

Phase state: the lifted Pruefer phase is theta = q*pi/2 + atan2(u1, u0) with an integer q
and a unit vector u whose angle lies in [-pi/4, pi/4].  The direction of theta is u when q
is even and u rotated by pi/2 when q is odd, so the half-steps never lose the lift.
The R half-step uses K = R - 1 to keep O(eps) moves accurate.
"""
import math

import numpy as np
from numba import njit

HALF_PI = math.pi / 2

OK = 0
BAD_R_STEP = 1
BAD_ORDER = 2


@njit(cache=True, inline="always")
def _renorm(q, u0, u1):
    for _ in range(4):
        if u0 > 0.0 and abs(u1) <= u0:
            break
        if u1 > 0.0:
            q += 1
            u0, u1 = u1, -u0
        else:
            q -= 1
            u0, u1 = -u1, u0
    return q, u0, u1


@njit(cache=True, inline="always")
def _step(q, u0, u1, kap, k00, k01, k10, k11):
    """One full step D then R.  Returns (q, u0, u1, log_norm, ok)."""
    # D half-step
    if q % 2 == 0:
        v0 = kap * u0
        v1 = u1 / kap
    else:
        v0 = u0 / kap
        v1 = kap * u1
    nd2 = v0 * v0 + v1 * v1
    nd = math.sqrt(nd2)
    u0 = v0 / nd
    u1 = v1 / nd
    q, u0, u1 = _renorm(q, u0, u1)
    # R half-step
    if q % 2 == 0:
        e0 = u0
        e1 = u1
    else:
        e0 = -u1
        e1 = u0
    w0 = k00 * e0 + k01 * e1
    w1 = k10 * e0 + k11 * e1
    dot = e0 * w0 + e1 * w1
    ok = 1.0 + dot > 0.0
    x = 2.0 * dot + w0 * w0 + w1 * w1
    f0 = e0 + w0
    f1 = e1 + w1
    nr = math.sqrt(1.0 + x)
    f0 /= nr
    f1 /= nr
    if q % 2 == 0:
        u0 = f0
        u1 = f1
    else:
        u0 = f1
        u1 = -f0
    q, u0, u1 = _renorm(q, u0, u1)
    return q, u0, u1, 0.5 * math.log(nd2) + 0.5 * math.log1p(x), ok


@njit(cache=True)
def quadrant(q, u1):
    return q - 1 if u1 < 0.0 else q


@njit(cache=True)
def birkhoff_chunk(kap, k00, k01, k10, k11, q, u0, u1, start, burn, n_acc, n_batch,
                   batch_log, batch_q, batch_phi, check_order):
    """Advance the chain over one chunk of samples.

    start: global index of the first sample in the chunk.  Steps with global index below
    ``burn`` are transient.  Accumulated step j = i - burn lies in batch j*n_batch//n_acc.
    batch_q / batch_phi hold the phase at the start of each batch and one extra slot for
    the end.  Returns (q, u0, u1, status).
    """
    k_prev = quadrant(q, u1)
    for i in range(kap.shape[0]):
        j = start + i - burn
        if j >= 0:
            b = (j * n_batch) // n_acc
            if j == 0 or ((j - 1) * n_batch) // n_acc != b:
                batch_q[b] = q
                batch_phi[b] = math.atan2(u1, u0)
        q, u0, u1, ln, ok = _step(q, u0, u1, kap[i], k00[i], k01[i], k10[i], k11[i])
        if not ok:
            return q, u0, u1, BAD_R_STEP
        if j >= 0:
            batch_log[b] += ln
            if j == n_acc - 1:
                batch_q[n_batch] = q
                batch_phi[n_batch] = math.atan2(u1, u0)
        if check_order:
            k = quadrant(q, u1)
            if k < k_prev:
                return q, u0, u1, BAD_ORDER
            k_prev = k
    return q, u0, u1, OK


@njit(cache=True)
def crossing_chunk(kap, k00, k01, k10, k11, q, u0, u1, start, times, parities):
    """Record the steps at which floor(2 theta/pi) changes.

    times[c] = N (1-based step index) and parities[c] = +1 when the new quadrant index is
    odd (x enters [0, inf)), -1 otherwise.  Returns (q, u0, u1, count, status).
    """
    k_prev = quadrant(q, u1)
    c = 0
    for i in range(kap.shape[0]):
        q, u0, u1, ln, ok = _step(q, u0, u1, kap[i], k00[i], k01[i], k10[i], k11[i])
        if not ok:
            return q, u0, u1, c, BAD_R_STEP
        k = quadrant(q, u1)
        while k > k_prev:
            k_prev += 1
            times[c] = start + i + 1
            parities[c] = 1 if k_prev % 2 != 0 else -1
            c += 1
        if k < k_prev:
            return q, u0, u1, c, BAD_ORDER
    return q, u0, u1, c, OK


@njit(cache=True)
def ds_value(q, u0, u1):
    """x = -cot(theta), with full relative accuracy near 0 and near infinity."""
    if q % 2 == 0:
        if u1 == 0.0:
            return np.inf
        return -u0 / u1
    return u1 / u0


@njit(cache=True)
def passage_trace(kap, k00, k01, k10, k11, max_out):
    """True DS chain from x0 = inf up to the second passage time.

    Returns (N1, N2, xs, status) with xs[n] = x_{N1+n} for 0 <= n < N2 - N1.
    N1 is the first step entering [0, inf) and N2 the following exit.  N1 = -1 or N2 = -1
    means the samples ran out.
    """
    q = 0
    u0 = 1.0
    u1 = 0.0
    k_prev = 0
    n1 = -1
    xs = np.empty(max_out)
    c = 0
    for i in range(kap.shape[0]):
        q, u0, u1, ln, ok = _step(q, u0, u1, kap[i], k00[i], k01[i], k10[i], k11[i])
        if not ok:
            return n1, -1, xs[:c], BAD_R_STEP
        k = quadrant(q, u1)
        if k < k_prev:
            return n1, -1, xs[:c], BAD_ORDER
        if n1 < 0:
            if k > k_prev:
                if k - k_prev > 1 or k % 2 == 0:
                    # skipped over a whole half-line in one step; cannot happen for eps <= eps_max
                    return n1, -1, xs[:c], BAD_ORDER
                n1 = i + 1
                xs[c] = ds_value(q, u0, u1)
                c += 1
        else:
            if k > k_prev:
                return n1, i + 1, xs[:c], OK
            if c >= max_out:
                return n1, -1, xs[:c], OK
            xs[c] = ds_value(q, u0, u1)
            c += 1
        k_prev = k
    return n1, -1, xs[:c], OK


@njit(cache=True)
def slower_times(log_kappa, z_minus, z_c, z_plus, max_count, out):
    """Consecutive independent runs of the slower process in z = log x.

    Within a run starting at offset s, step n -> n+1 (n >= 1) uses log_kappa[s + n]; the run
    ends at T, the first n with x_n = inf, and the next run starts at s + T.
    Returns (count, s) with s the offset of the first unfinished run.
    """
    c = 0
    s = 0
    size = log_kappa.shape[0]
    while c < max_count:
        n = 1
        z = z_minus
        while True:
            if z <= z_minus:
                z = z_c
            elif z < z_plus:
                if s + n >= size:
                    return c, s
                z = z + 2.0 * log_kappa[s + n]
            else:
                break
            n += 1
        out[c] = n + 1
        c += 1
        s += n + 1
    return c, s


@njit(cache=True)
def faster_times(log_kappa, lam_shift, z_minus, z_c, z_plus, max_count, out):
    """As slower_times for the faster process (x_0 = x-tilde_minus, step n uses s + n)."""
    c = 0
    s = 0
    size = log_kappa.shape[0]
    while c < max_count:
        n = 0
        z = z_minus
        while True:
            if z <= z_minus:
                z = z_c
            elif z < z_plus:
                if s + n >= size:
                    return c, s
                z = z + 2.0 * log_kappa[s + n] + lam_shift
            else:
                break
            n += 1
        out[c] = n + 1
        c += 1
        s += n + 1
    return c, s


@njit(cache=True)
def slower_path(log_kappa, z_minus, z_c, z_plus, n_out):
    """x-hat path values z_n = log x_n for n < n_out (inf once absorbed)."""
    out = np.empty(n_out)
    z = -np.inf
    for n in range(n_out):
        if n == 0:
            z = -np.inf
        elif n == 1:
            z = z_minus
        elif z == np.inf:
            pass
        elif z <= z_minus:
            z = z_c
        elif z < z_plus:
            z = z + 2.0 * log_kappa[n - 1]
        else:
            z = np.inf
        out[n] = z
    return out


@njit(cache=True)
def faster_path(log_kappa, lam_shift, z_minus, z_c, z_plus, n_out):
    out = np.empty(n_out)
    z = z_minus
    for n in range(n_out):
        if n == 0:
            z = z_minus
        elif z == np.inf:
            pass
        elif z <= z_minus:
            z = z_c
        elif z < z_plus:
            z = z + 2.0 * log_kappa[n - 1] + lam_shift
        else:
            z = np.inf
        out[n] = z
    return out


@njit(cache=True)
def excursions(chi, y_minus, y_plus, drift, max_count, t_out, y_out):
    """Split a chi stream into excursions of y_n = sum_{j<=n} (chi_j + drift) from y_0 = 0.

    The first increment of an excursion is the stream element after y_0.  Each excursion
    ends at the first n >= 1 with y_n <= y_minus or y_n >= y_plus; its length n and exit
    value are written out.  Returns (count, used) with used = stream elements consumed.
    """
    c = 0
    y = 0.0
    n = 0
    for i in range(chi.shape[0]):
        y += chi[i] + drift
        n += 1
        if y <= y_minus or y >= y_plus:
            t_out[c] = n
            y_out[c] = y
            c += 1
            y = 0.0
            n = 0
            if c >= max_count:
                return c, i + 1
    return c, chi.shape[0] - n


@njit(cache=True)
def table_lookup2(u, cdf_a, cdf_b, table):
    """table[i, j] with i, j the inverse-CDF atoms of u[:, 0] and u[:, 1]."""
    n = u.shape[0]
    out = np.empty(n)
    na = cdf_a.shape[0]
    nb = cdf_b.shape[0]
    for k in range(n):
        i = 0
        while i < na - 1 and cdf_a[i] <= u[k, 0]:
            i += 1
        j = 0
        while j < nb - 1 and cdf_b[j] <= u[k, 1]:
            j += 1
        out[k] = table[i, j]
    return out
