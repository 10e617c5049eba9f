"""Boundary-robust jump-diffusion ``Z^[n]``.

Channels whose increment would move a boundary-resident coordinate off its
boundary (``ab(l, z) = 1``) act by Poisson jumps of size ``l/n``; all other
channels are integrated by Euler-Maruyama.  Each Poisson channel owns a
unit-rate exponential clock in operational time ``n * int ab f_l ds``; the rate
is frozen over each step and the step size shrinks near finite boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as K
from .network import DensityFamily
from .trajectory import Trajectory, as_generator, parse_record


@dataclass(frozen=True)
class StepPolicy:
    """Boundary-adaptive Euler step.

    Distances are measured from the nearest finite endpoint, coordinate-wise;
    the smallest applicable step wins.  Coordinates sitting on the boundary
    (distance ``<= near_lo``) use the base step.
    """

    base: float = 0.005
    mid: float = 0.0007
    near: float = 0.0002
    mid_hi: float = 0.06
    mid_lo: float = 0.03
    near_lo: float = 1e-14

    def __post_init__(self):
        if not self.base > self.mid > self.near > 0:
            raise ValueError("step sizes must satisfy base > mid > near > 0")
        if not self.mid_hi > self.mid_lo > self.near_lo >= 0:
            raise ValueError("zones must satisfy mid_hi > mid_lo > near_lo >= 0")

    @classmethod
    def for_volume(cls, n: float, base=0.005, mid=0.0007, near=0.0002,
                   zone_mid=6.0, zone_near=3.0, near_lo=1e-14) -> "StepPolicy":
        """Zones given in molecule counts: ``mid_hi = zone_mid/n``, ``mid_lo = zone_near/n``."""
        return cls(base, mid, near, zone_mid / n, zone_near / n, near_lo)

    @classmethod
    def uniform(cls, h: float) -> "StepPolicy":
        """Essentially fixed step ``h`` (inner zones collapsed to nothing)."""
        return cls(h, h * (1 - 1e-12), h * (1 - 2e-12), 2e-300, 1e-300, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.base, self.mid, self.near, self.mid_hi, self.mid_lo, self.near_lo])


def classify_channels(family: DensityFamily, x) -> tuple[list, list]:
    """Split increments into (continuous, jumping) according to ``ab``."""
    x = family.snap(np.asarray(x, float))
    gate = np.empty(family.n_channels, dtype=np.int64)
    K.ab_all(family.L, x, family.lower, family.upper, family.n, family.snap_tol, gate)
    cont = [l for l, g in zip(family.increments, gate) if not g]
    jump = [l for l, g in zip(family.increments, gate) if g]
    return cont, jump


def select_step(policy: StepPolicy, family: DensityFamily, x) -> float:
    x = family.snap(np.asarray(x, float))
    return float(K.select_step(x, family.lower, family.upper, policy.as_array()))


@njit(cache=True)
def _jd_kernel(x0, t_end, n, lower, upper, tol, ptr, coef, fac, L, policy, rng,
               mode, dt_grid, max_steps):
    d = x0.size
    C = L.shape[0]
    f = np.empty(C)
    gate = np.zeros(C, dtype=np.int64)
    clock = np.full(C, np.nan)        # residual unit-exponential per Poisson channel
    op_cont = np.zeros(C)             # n * int (1 - ab) f ds
    op_jump = np.zeros(C)             # n * int ab f ds
    dx = np.empty(d)
    xc = np.empty(d)
    x = x0.copy()
    xn = np.empty(d)
    K.snap_inplace(x, lower, upper, tol)
    on_bd = np.zeros(d, dtype=np.bool_)
    for i in range(d):
        on_bd[i] = x[i] == lower[i] or x[i] == upper[i]
    cap = 1024 if mode == K.FULL else (int(t_end / dt_grid) + 8 if mode == K.GRIDDED else 4)
    buf = np.empty((cap, d + 4))
    buf = K.push_row(buf, 0, 0.0, x, K.START, -1, np.nan)
    nrow = 1
    logb = np.empty((64, 4))
    nlog = 0
    t = 0.0
    gi = 1
    steps = 0
    jumps = 0
    projections = 0
    flagged = 0
    exits = 0
    residence = 0.0
    status = 0
    sqn = np.sqrt(n)
    pattern = np.full(d, -1, dtype=np.int64)
    while t < t_end:
        # gates depend only on which endpoint each coordinate sits on
        changed = False
        for i in range(d):
            p = 1 if x[i] == lower[i] else (2 if x[i] == upper[i] else 0)
            if p != pattern[i]:
                pattern[i] = p
                changed = True
        if changed:
            K.ab_all(L, x, lower, upper, n, tol, gate)
        K.channel_rates_scratch(x, lower, upper, ptr, coef, fac, f, xc)
        step = K.select_step(x, lower, upper, policy)
        tn = K.next_time(t, step, t_end)
        tau = tn - t
        fire = -1
        for c in range(C):
            if gate[c] and f[c] > 0.0:
                if np.isnan(clock[c]):
                    clock[c] = rng.standard_exponential()
                tc = clock[c] / (n * f[c])
                if t + tc < tn:
                    tn = t + tc
                    tau = tc
                    fire = c
        sq = np.sqrt(tau)
        dx[:] = 0.0
        for c in range(C):
            if gate[c]:
                if f[c] > 0.0:
                    op_jump[c] += n * f[c] * tau
                    if c == fire:
                        clock[c] = np.nan
                    else:
                        clock[c] -= n * f[c] * tau
                continue
            g = rng.standard_normal()
            amt = f[c] * tau + np.sqrt(f[c]) / sqn * sq * g
            op_cont[c] += n * f[c] * tau
            for i in range(d):
                dx[i] += L[c, i] * amt
        any_bd = False
        for i in range(d):
            if on_bd[i]:
                any_bd = True
        if any_bd:
            residence += tau
        for i in range(d):
            xn[i] = x[i] + dx[i]
        if fire >= 0:
            for i in range(d):
                xn[i] += L[fire, i] / n
            jumps += 1
        for i in range(d):
            if not np.isfinite(xn[i]):
                status = 1
        if status:
            break
        if mode == K.GRIDDED:
            while gi * dt_grid < t_end - K.TIME_EPS * max(1.0, t_end) and gi * dt_grid < tn - 1e-12:
                buf = K.push_row(buf, nrow, gi * dt_grid, x, K.GRID, -1, np.nan)
                nrow += 1
                gi += 1
        projected = False
        for i in range(d):
            over = 0.0
            if xn[i] < lower[i] - tol:
                over = xn[i] - lower[i]
            elif xn[i] > upper[i] + tol:
                over = xn[i] - upper[i]
            if over != 0.0:
                projected = True
                projections += 1
                if fire >= 0 and L[fire, i] != 0:
                    exits += 1
                    if mode == K.FULL:
                        logb = K.push_log(logb, nlog, tn, K.EXIT_DIAG, i, over)
                        nlog += 1
                # the boundary coordinate should not be pushed out by a channel
                # whose rate is still positive there; flag those
                if on_bd[i]:
                    flagged += 1
                if mode == K.FULL:
                    logb = K.push_log(logb, nlog, tn, K.PROJECT, i, over)
                    nlog += 1
        K.project_inplace(xn, lower, upper)
        K.snap_inplace(xn, lower, upper, tol)
        for i in range(d):
            now = xn[i] == lower[i] or xn[i] == upper[i]
            if now != on_bd[i]:
                if mode == K.FULL:
                    logb = K.push_log(logb, nlog, tn, K.RES_START if now else K.RES_END, i, np.nan)
                    nlog += 1
                on_bd[i] = now
        x, xn = xn, x
        t = tn
        steps += 1
        if mode == K.FULL:
            if fire >= 0:
                buf = K.push_row(buf, nrow, t, x, K.JUMP, fire, np.nan)
            elif projected:
                buf = K.push_row(buf, nrow, t, x, K.PROJECT, -1, np.nan)
            else:
                buf = K.push_row(buf, nrow, t, x, K.EULER, -1, np.nan)
            nrow += 1
        if mode == K.GRIDDED and gi * dt_grid < t_end - K.TIME_EPS * max(1.0, t_end) \
                and abs(gi * dt_grid - t) <= 1e-12:
            buf = K.push_row(buf, nrow, gi * dt_grid, x, K.GRID, -1, np.nan)
            nrow += 1
            gi += 1
        if steps >= max_steps:
            status = 2
            break
    buf = K.push_row(buf, nrow, t, x, K.END, -1, np.nan)
    nrow += 1
    stats = np.array([steps, jumps, projections, flagged, exits, residence])
    return buf[:nrow], logb[:nlog], status, stats, op_cont, op_jump


def simulate_jump_diffusion(family: DensityFamily, x0, t_end: float,
                            policy: StepPolicy | None = None, rng=0, record="full",
                            neighborhood: float | None = None,
                            max_steps: int = 10**9) -> Trajectory:
    """Simulate ``Z^[n]`` on ``[0, t_end]``.

    Args:
        policy: step policy; defaults to ``StepPolicy.for_volume(family.n)``.
        record: ``"full"`` (one row per step, annotations in ``log``),
            ``"endpoints"`` or ``("grid", dt)``.
        neighborhood: optional radius ``K``; when given, the first time the
            path leaves the ``K``-neighbourhood of the fluid orbit is stored
            in ``stats["exit_time"]`` (``inf`` if it never does).

    The returned trajectory's ``stats`` include step/jump/projection counts,
    the time spent with some coordinate on the boundary, and the final
    operational times per channel.
    """
    if policy is None:
        policy = StepPolicy.for_volume(family.n)
    x = family.check_in_box(x0)
    mode, dt = parse_record(record)
    rows, log, status, st, op_cont, op_jump = _jd_kernel(
        x, float(t_end), family.n, family.lower, family.upper, family.snap_tol,
        family.term_ptr, family.coef, family.factors, family.L, policy.as_array(),
        as_generator(rng), mode, dt, int(max_steps))
    if status == 1:
        raise FloatingPointError("non-finite state in jump-diffusion step")
    if status == 2:
        raise RuntimeError(f"step budget of {max_steps} exhausted before t_end")
    stats = {
        "steps": int(st[0]), "jumps": int(st[1]), "projections": int(st[2]),
        "flagged_projections": int(st[3]), "jump_exits": int(st[4]),
        "boundary_time": float(st[5]),
        "operational_time_continuous": op_cont, "operational_time_jump": op_jump,
    }
    traj = Trajectory.from_rows(rows, family.d, log=log, stats=stats, species=family.network.species)
    if neighborhood is not None:
        traj.stats["exit_time"] = neighborhood_exit_time(family, traj, x, float(t_end), neighborhood)
    return traj


def neighborhood_exit_time(family: DensityFamily, traj: Trajectory, x0, t_end: float,
                           radius: float, h: float = 1e-3) -> float:
    """First recorded time the path is farther than ``radius`` (max-norm) from the fluid orbit."""
    from .ode import integrate_ode

    orbit = integrate_ode(family, x0, t_end, h=min(h, t_end / 10)).states[::10]
    for t, z in zip(traj.times, traj.states):
        if np.min(np.max(np.abs(orbit - z), axis=1)) > radius:
            return float(t)
    return float("inf")
