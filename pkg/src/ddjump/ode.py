"""Fluid limit: fixed-step RK4 on x' = F(x)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _kernels as K
from .network import DensityFamily
from .trajectory import Trajectory


@njit(cache=True)
def _drift(x, lower, upper, ptr, coef, fac, L, f, out):
    K.channel_rates(x, lower, upper, ptr, coef, fac, f)
    out[:] = 0.0
    for c in range(L.shape[0]):
        for i in range(x.size):
            out[i] += L[c, i] * f[c]


@njit(cache=True)
def _rk4_kernel(x0, t_end, h, lower, upper, ptr, coef, fac, L, clamp):
    d = x0.size
    nsteps = int(np.ceil(t_end / h - 1e-9))
    times = np.empty(nsteps + 1)
    states = np.empty((nsteps + 1, d))
    f = np.empty(L.shape[0])
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    tmp = np.empty(d)
    x = x0.copy()
    times[0] = 0.0
    states[0] = x
    clamps = np.empty((0, 3))
    nclamp = 0
    clamp_buf = np.empty((16, 3))
    status = 0
    for s in range(nsteps):
        t = s * h
        hs = min(h, t_end - t)
        _drift(x, lower, upper, ptr, coef, fac, L, f, k1)
        tmp[:] = x + 0.5 * hs * k1
        _drift(tmp, lower, upper, ptr, coef, fac, L, f, k2)
        tmp[:] = x + 0.5 * hs * k2
        _drift(tmp, lower, upper, ptr, coef, fac, L, f, k3)
        tmp[:] = x + hs * k3
        _drift(tmp, lower, upper, ptr, coef, fac, L, f, k4)
        x = x + hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for i in range(d):
            if not np.isfinite(x[i]):
                status = 1
        if status:
            times = times[: s + 1]
            states = states[: s + 1]
            break
        if clamp:
            for i in range(d):
                v = x[i]
                if v < lower[i] or v > upper[i]:
                    x[i] = min(max(v, lower[i]), upper[i])
                    if nclamp >= clamp_buf.shape[0]:
                        nb = np.empty((clamp_buf.shape[0] * 2, 3))
                        nb[:nclamp] = clamp_buf[:nclamp]
                        clamp_buf = nb
                    clamp_buf[nclamp, 0] = t + hs
                    clamp_buf[nclamp, 1] = i
                    clamp_buf[nclamp, 2] = v
                    nclamp += 1
        times[s + 1] = min((s + 1) * h, t_end)
        states[s + 1] = x
    clamps = clamp_buf[:nclamp].copy()
    return times, states, clamps, status


@dataclass
class OdeSolution:
    """RK4 path on a uniform grid; ``clamp_events`` rows are ``(t, coordinate, value)``."""

    times: np.ndarray
    states: np.ndarray
    h: float
    clamp_events: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))

    def trajectory(self, species=()) -> Trajectory:
        m = len(self.times)
        kinds = np.full(m, K.ODE)
        kinds[0], kinds[-1] = K.START, K.END
        log = np.column_stack([self.clamp_events[:, 0], np.full(len(self.clamp_events), K.CLAMP),
                               self.clamp_events[:, 1], self.clamp_events[:, 2]])
        return Trajectory(self.times, self.states, kinds, np.full(m, -1), np.full(m, np.nan),
                          log=log, species=tuple(species))

    def at(self, t):
        """Linear interpolation of the RK4 nodes."""
        t = np.atleast_1d(np.asarray(t, float))
        return np.column_stack([np.interp(t, self.times, self.states[:, i])
                                for i in range(self.states.shape[1])])


def integrate_ode(family: DensityFamily, x0, t_end: float, h: float = 1e-3,
                  clamp: bool = True) -> OdeSolution:
    """Integrate the fluid ODE with classical RK4.

    States are clamped to the bounds box after each step (``clamp=False``
    disables it, e.g. to check conservation laws); every clamp is logged.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    x = family.check_in_box(x0)
    times, states, clamps, status = _rk4_kernel(
        x, float(t_end), float(h), family.lower, family.upper, family.term_ptr,
        family.coef, family.factors, family.L, clamp)
    if status:
        raise FloatingPointError(f"non-finite drift at t={times[-1]:.6g}")
    return OdeSolution(times, states, float(h), clamps)
