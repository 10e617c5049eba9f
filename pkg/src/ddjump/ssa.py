"""Exact simulation of the chain by the direct (Gillespie) method."""
from __future__ import annotations

import numpy as np
from numba import njit

from . import _kernels as K
from .network import DensityFamily
from .trajectory import Trajectory, as_generator, parse_record


@njit(cache=True)
def _ssa_kernel(k0, t_end, n, lower, upper, explicit, rc, pref, ptr, coef, fac, rx_L,
                rng, mode, dt_grid, max_events):
    d = k0.size
    R = rx_L.shape[0]
    k = k0.copy()
    props = np.empty(R)
    x = np.empty(d)
    cap = 1024 if mode == K.FULL else (int(t_end / dt_grid) + 8 if mode == K.GRIDDED else 4)
    buf = np.empty((cap, d + 4))
    for i in range(d):
        x[i] = k[i] / n
    buf = K.push_row(buf, 0, 0.0, x, K.START, -1, np.nan)
    nrow = 1
    t = 0.0
    gi = 1
    n_events = 0
    n_exits = 0
    status = 0
    while True:
        K.reaction_propensities(k, n, lower, upper, explicit, rc, pref, ptr, coef, fac, props)
        a0 = 0.0
        for j in range(R):
            a0 += props[j]
        if not np.isfinite(a0):
            status = 1
            break
        if a0 > 0.0:
            t_next = t + rng.standard_exponential() / a0
        else:
            t_next = np.inf
        if mode == K.GRIDDED:
            while gi * dt_grid < t_end - K.TIME_EPS * max(1.0, t_end) and gi * dt_grid <= t_next:
                for i in range(d):
                    x[i] = k[i] / n
                buf = K.push_row(buf, nrow, gi * dt_grid, x, K.GRID, -1, np.nan)
                nrow += 1
                gi += 1
        if t_next >= t_end:
            break
        u = rng.random() * a0
        j = 0
        acc = props[0]
        while acc <= u and j < R - 1:
            j += 1
            acc += props[j]
        while props[j] == 0.0 and j > 0:
            j -= 1
        for i in range(d):
            k[i] += rx_L[j, i]
            x[i] = k[i] / n
        t = t_next
        n_events += 1
        if K.outside_box(x, lower, upper, 1e-9 / n):
            n_exits += 1
        if mode == K.FULL:
            buf = K.push_row(buf, nrow, t, x, K.JUMP, j, np.nan)
            nrow += 1
        if n_events >= max_events:
            status = 2
            break
    for i in range(d):
        x[i] = k[i] / n
    buf = K.push_row(buf, nrow, t_end if status == 0 else t, x, K.END, -1, np.nan)
    nrow += 1
    return buf[:nrow], status, n_events, n_exits


def simulate_ssa(family: DensityFamily, x0, t_end: float, rng, record="full",
                 max_events: int = 10**9) -> Trajectory:
    """Sample a path of the density process ``X^[n]`` on ``[0, t_end]``.

    Args:
        family: network at volume ``n``.
        x0: initial concentrations; must lie on the lattice ``(1/n) Z^d``.
        t_end: horizon.
        rng: an :class:`RngStream`, a numpy Generator, or an integer seed.
        record: ``"full"`` (every jump), ``"endpoints"`` or ``("grid", dt)``;
            grid rows hold the left-limit state at each grid time.

    Returns:
        A :class:`Trajectory` whose jump rows carry the reaction index.  If the
        total intensity vanishes the path is held constant up to ``t_end``.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    k0 = family.to_lattice(x0)
    mode, dt = parse_record(record)
    rows, status, n_events, n_exits = _ssa_kernel(
        k0, float(t_end), family.n, family.lower, family.upper, family.rx_explicit,
        family.rx_c, family.rx_pref, family.rx_term_ptr, family.rx_coef, family.rx_factors,
        family.rx_L, as_generator(rng), mode, dt, int(max_events))
    if status == 1:
        raise FloatingPointError("non-finite total intensity")
    if status == 2:
        raise RuntimeError(f"event budget of {max_events} exhausted before t_end")
    return Trajectory.from_rows(rows, family.d, stats={"events": n_events, "box_exits": n_exits},
                                species=family.network.species)
