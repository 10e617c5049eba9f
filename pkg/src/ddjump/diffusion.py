"""Euler-Maruyama for the diffusion approximation, one noise per channel.

Per step ``x += sum_l l [f_l dt + sqrt(f_l / n) dW_l]``.  The diffusion is only
defined while the state stays in the box; in ``fail`` mode the first exit is
reported as a :class:`BoundaryFailure` carrying the square-root argument
that went negative.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as K
from .network import DensityFamily
from .trajectory import Trajectory, as_generator, parse_record


@dataclass(frozen=True)
class BoundaryFailure:
    t: float
    channel: int
    increment: tuple
    value: float


@dataclass
class DiffusionOutcome:
    trajectory: Trajectory
    failure: BoundaryFailure | None = None

    @property
    def status(self) -> str:
        return "completed" if self.failure is None else "boundary_failure"

    @property
    def completed(self) -> bool:
        return self.failure is None


@njit(cache=True)
def _euler_kernel(x0, t_end, h, n, lower, upper, tol, ptr, coef, fac, L, rng,
                  fail_mode, mode, dt_grid):
    d = x0.size
    C = L.shape[0]
    f = np.empty(C)
    raw = np.empty(C)
    dx = np.empty(d)
    x = x0.copy()
    cap = 1024 if mode == K.FULL else (int(t_end / dt_grid) + 8 if mode == K.GRIDDED else 4)
    buf = np.empty((cap, d + 4))
    buf = K.push_row(buf, 0, 0.0, x, K.START, -1, np.nan)
    nrow = 1
    logb = np.empty((16, 4))
    nlog = 0
    t = 0.0
    gi = 1
    status = 0
    fchan = -1
    fval = np.nan
    steps = 0
    sqn = np.sqrt(n)
    while t < t_end:
        tn = K.next_time(t, h, t_end)
        tau = tn - t
        sq = np.sqrt(tau)
        K.channel_rates(x, lower, upper, ptr, coef, fac, f)
        dx[:] = 0.0
        for c in range(C):
            g = rng.standard_normal()
            amt = f[c] * tau + np.sqrt(f[c]) / sqn * sq * g
            for i in range(d):
                dx[i] += L[c, i] * amt
        xn = x + dx
        steps += 1
        for i in range(d):
            if not np.isfinite(xn[i]):
                status = 2
        if status:
            break
        if mode == K.GRIDDED:
            while gi * dt_grid < t_end - K.TIME_EPS * max(1.0, t_end) and gi * dt_grid < tn - 1e-12:
                buf = K.push_row(buf, nrow, gi * dt_grid, x, K.GRID, -1, np.nan)
                nrow += 1
                gi += 1
        if K.outside_box(xn, lower, upper, tol):
            K.raw_channel_rates(xn, ptr, coef, fac, raw)
            worst = 0
            for c in range(C):
                if raw[c] < raw[worst]:
                    worst = c
            if fail_mode:
                status = 1
                fchan = worst
                fval = raw[worst]
                t = tn
                buf = K.push_row(buf, nrow, t, xn, K.FAILURE, worst, raw[worst])
                nrow += 1
                break
            logb = K.push_log(logb, nlog, tn, K.CLAMP, worst, raw[worst])
            nlog += 1
            K.project_inplace(xn, lower, upper)
        K.snap_inplace(xn, lower, upper, tol)
        x = xn
        t = tn
        if mode == K.FULL:
            buf = K.push_row(buf, nrow, t, x, K.EULER, -1, np.nan)
            nrow += 1
        if mode == K.GRIDDED and gi * dt_grid < t_end - K.TIME_EPS * max(1.0, t_end) \
                and abs(gi * dt_grid - t) <= 1e-12:
            buf = K.push_row(buf, nrow, gi * dt_grid, x, K.GRID, -1, np.nan)
            nrow += 1
            gi += 1
    if status == 0:
        buf = K.push_row(buf, nrow, t, x, K.END, -1, np.nan)
        nrow += 1
    return buf[:nrow], logb[:nlog], status, fchan, fval, steps


def simulate_diffusion(family: DensityFamily, x0, t_end: float, h: float, rng,
                       on_negative: str = "fail", record="full") -> DiffusionOutcome:
    """Simulate the diffusion approximation ``G*^[n]``.

    Args:
        on_negative: ``"fail"`` stops at the first exit from the box and
            returns a boundary failure; ``"clamp"`` projects back onto the
            box (the offending rates then vanish) and logs a clamp event.
        record: as in :func:`ddjump.ssa.simulate_ssa`.
    """
    if on_negative not in ("fail", "clamp"):
        raise ValueError("on_negative must be 'fail' or 'clamp'")
    if not h > 0:
        raise ValueError("step h must be positive")
    x = family.check_in_box(x0)
    mode, dt = parse_record(record)
    rows, log, status, fchan, fval, steps = _euler_kernel(
        x, float(t_end), float(h), family.n, family.lower, family.upper, family.snap_tol,
        family.term_ptr, family.coef, family.factors, family.L, as_generator(rng),
        on_negative == "fail", mode, dt)
    if status == 2:
        raise FloatingPointError("non-finite state in Euler-Maruyama step")
    traj = Trajectory.from_rows(rows, family.d, log=log, stats={"steps": steps, "clamps": len(log)},
                                species=family.network.species)
    failure = None
    if status == 1:
        failure = BoundaryFailure(float(rows[-1, 0]), int(fchan), family.increments[fchan], float(fval))
    return DiffusionOutcome(traj, failure)
