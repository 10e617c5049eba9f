"""Shared numba primitives used by the simulators.

Everything here works on the flat arrays prepared by
:class:`ddjump.network.DensityFamily`; nothing allocates per call except the
row buffers, which grow by doubling.
"""
import math

import numpy as np
from numba import njit

# row kinds
START = 0
END = 1
JUMP = 2
GRID = 3
ODE = 4
EULER = 5
FAILURE = 6
PROJECT = 7
RES_START = 8
RES_END = 9
CLAMP = 10
EXIT_DIAG = 11

KIND_NAMES = {
    START: "start", END: "end", JUMP: "jump", GRID: "grid", ODE: "ode", EULER: "euler",
    FAILURE: "failure", PROJECT: "project", RES_START: "residence-start",
    RES_END: "residence-end", CLAMP: "clamp", EXIT_DIAG: "exit",
}

# record modes
FULL = 0
ENDPOINTS = 1
GRIDDED = 2

TIME_EPS = 1e-12


@njit(cache=True, inline="always")
def _ipow(x, e):
    r = 1.0
    for _ in range(e):
        r *= x
    return r


@njit(cache=True)
def snap_inplace(x, lower, upper, tol):
    for i in range(x.size):
        if math.isfinite(lower[i]) and abs(x[i] - lower[i]) <= tol:
            x[i] = lower[i]
        elif math.isfinite(upper[i]) and abs(x[i] - upper[i]) <= tol:
            x[i] = upper[i]


@njit(cache=True)
def outside_box(x, lower, upper, tol):
    for i in range(x.size):
        if x[i] < lower[i] - tol or x[i] > upper[i] + tol:
            return True
    return False


@njit(cache=True)
def poly_eval(x, ptr, coef, fac, c):
    s = 0.0
    for t in range(ptr[c], ptr[c + 1]):
        m = coef[t]
        for q in range(fac[t, 0]):
            m *= _ipow(x[fac[t, 1 + 2 * q]], fac[t, 2 + 2 * q])
        s += m
    return s


@njit(cache=True)
def channel_rates(x, lower, upper, ptr, coef, fac, out):
    """f_l at x clamped into the box, clipped at zero."""
    channel_rates_scratch(x, lower, upper, ptr, coef, fac, out, np.empty(x.size))


@njit(cache=True)
def channel_rates_scratch(x, lower, upper, ptr, coef, fac, out, xc):
    d = x.size
    for i in range(d):
        xc[i] = min(max(x[i], lower[i]), upper[i])
    for c in range(out.size):
        v = poly_eval(xc, ptr, coef, fac, c)
        out[c] = v if v > 0.0 else 0.0


@njit(cache=True)
def raw_channel_rates(x, ptr, coef, fac, out):
    for c in range(out.size):
        out[c] = poly_eval(x, ptr, coef, fac, c)


@njit(cache=True)
def reaction_propensities(k, n, lower, upper, explicit, c, pref, ptr, coef, fac, out):
    """Exact chain rates per reaction at integer state k."""
    d = k.size
    xc = np.empty(d)
    for i in range(d):
        xc[i] = min(max(k[i] / n, lower[i]), upper[i])
    for j in range(out.size):
        if explicit[j]:
            v = n * pref[j] * poly_eval(xc, ptr, coef, fac, j)
            out[j] = v if v > 0.0 else 0.0
        else:
            v = pref[j]
            for i in range(d):
                ci = c[j, i]
                if ci:
                    ki = k[i]
                    if ki < ci:
                        v = 0.0
                        break
                    b = 1.0
                    for q in range(ci):
                        b = b * (ki - q) / (q + 1)
                    v *= b
            out[j] = v


@njit(cache=True)
def ab_one(l, x, lower, upper, n, tol):
    """1 iff l moves some boundary-resident coordinate off its endpoint and into the box."""
    for i in range(x.size):
        y = x[i] + l[i] / n
        if y < lower[i] - tol or y > upper[i] + tol:
            continue
        if math.isfinite(lower[i]) and abs(x[i] - lower[i]) <= tol:
            if abs(y - lower[i]) > tol:
                return 1
        if math.isfinite(upper[i]) and abs(x[i] - upper[i]) <= tol:
            if abs(y - upper[i]) > tol:
                return 1
    return 0


@njit(cache=True)
def ab_all(L, x, lower, upper, n, tol, out):
    out[:] = 0
    for i in range(x.size):
        at_lo = abs(x[i] - lower[i]) <= tol
        at_hi = abs(x[i] - upper[i]) <= tol
        if not (at_lo or at_hi):
            continue
        for c in range(L.shape[0]):
            li = L[c, i]
            if li == 0 or out[c]:
                continue
            y = x[i] + li / n
            if y < lower[i] - tol or y > upper[i] + tol:
                continue
            if (at_lo and abs(y - lower[i]) > tol) or (at_hi and abs(y - upper[i]) > tol):
                out[c] = 1


@njit(cache=True)
def select_step(x, lower, upper, policy):
    """policy = (base, mid, near, mid_hi, mid_lo, near_lo)."""
    step = policy[0]
    for i in range(x.size):
        for e in (lower[i], upper[i]):
            if not math.isfinite(e):
                continue
            dist = abs(x[i] - e)
            if dist <= policy[5]:
                continue
            if dist < policy[4]:
                step = min(step, policy[2])
            elif dist < policy[3]:
                step = min(step, policy[1])
    return step


@njit(cache=True)
def project_inplace(x, lower, upper):
    """Clip into the box; returns the number of clipped coordinates."""
    hits = 0
    for i in range(x.size):
        if x[i] < lower[i]:
            x[i] = lower[i]
            hits += 1
        elif x[i] > upper[i]:
            x[i] = upper[i]
            hits += 1
    return hits


@njit(cache=True)
def next_time(t, step, t_end):
    """Advance the clock, landing exactly on t_end at the end."""
    tn = t + step
    if tn > t_end or t_end - tn <= TIME_EPS * max(1.0, t_end):
        return t_end
    return tn


@njit(cache=True)
def push_row(buf, nrow, t, x, kind, chan, value):
    """Append (t, x..., kind, chan, value); returns the (possibly regrown) buffer."""
    if nrow >= buf.shape[0]:
        nb = np.empty((buf.shape[0] * 2, buf.shape[1]))
        nb[: buf.shape[0]] = buf
        buf = nb
    d = x.size
    buf[nrow, 0] = t
    for i in range(d):
        buf[nrow, 1 + i] = x[i]
    buf[nrow, 1 + d] = kind
    buf[nrow, 2 + d] = chan
    buf[nrow, 3 + d] = value
    return buf


@njit(cache=True)
def push_log(buf, nlog, t, kind, chan, value):
    if nlog >= buf.shape[0]:
        nb = np.empty((buf.shape[0] * 2, 4))
        nb[: buf.shape[0]] = buf
        buf = nb
    buf[nlog, 0] = t
    buf[nlog, 1] = kind
    buf[nlog, 2] = chan
    buf[nlog, 3] = value
    return buf
