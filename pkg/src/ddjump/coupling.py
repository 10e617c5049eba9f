"""Poisson/Brownian coupling on a dyadic grid and the coupled pair (X-hat, Z).

:func:`build_coupled_drivers` realises a unit-rate Poisson process ``N`` and a
Brownian motion ``W`` on one probability space, KMT style: the totals over
``[0, H]`` are quantile-coupled, then every dyadic cell is split by drawing the
Brownian bridge midpoint and taking the Binomial(N_cell, 1/2) left count at the
same quantile.  At the finest level events are placed uniformly.  Both
marginals are exact; the growth of ``sup |N(t) - t - W(t)|`` is checked
empirically rather than proved for this scheme.

:func:`simulate_coupled_pair` runs the exact chain ``X-hat`` and the
jump-diffusion ``Z`` from the same drivers: continuous channels of ``Z`` read
``W_l`` at their operational clock while ``X-hat`` reads the coupled ``N^W_l``;
boundary channels of both read a shared Poisson ``N_l``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as K
from .jump_diffusion import StepPolicy
from .network import DensityFamily
from .trajectory import RngStream, Trajectory, as_generator

MAX_CELL_COUNT = 10**7


class DriverError(RuntimeError):
    """Driver construction failed or a driver horizon was exhausted."""


# --------------------------------------------------------------------------
# quantile functions
# --------------------------------------------------------------------------

@njit(cache=True)
def _phi(z):
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@njit(cache=True)
def _logaddexp(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit(cache=True)
def poisson_quantile_normal(mu, z):
    """Poisson(mu) quantile at probability Phi(z), i.e. min{k : F(k) >= Phi(z)}."""
    if mu <= 0.0:
        return 0
    logmu = math.log(mu)
    if z <= -3.0:
        # lower tail: sum the pmf upward from 0 in log space
        log_u = math.log(_phi(z))
        k = 0
        logp = -mu
        logF = logp
        while logF < log_u:
            k += 1
            logp += logmu - math.log(k)
            logF = _logaddexp(logF, logp)
        return k
    # otherwise: min{k : S(k) <= q}, S(k) = P(X > k), summing down from far in the tail
    log_q = math.log(_phi(-z))
    k = int(math.ceil(mu + 20.0 * math.sqrt(mu) + 40.0))
    logp = k * logmu - mu - math.lgamma(k + 1.0)
    logS = -np.inf
    while k > 0:
        logS_prev = _logaddexp(logS, logp)  # S(k-1)
        if logS_prev > log_q:
            return k
        logS = logS_prev
        logp += math.log(k) - logmu
        k -= 1
    return 0


@njit(cache=True)
def _binom_half_lower(m, v):
    """min{k : F(k) >= v} for Binomial(m, 1/2) and v <= 1/2, walking down from the median."""
    mid = m // 2
    logp = math.lgamma(m + 1.0) - math.lgamma(mid + 1.0) - math.lgamma(m - mid + 1.0) - m * math.log(2.0)
    p = math.exp(logp)
    F = 0.5 if m % 2 == 1 else 0.5 + 0.5 * p
    k = mid
    while k > 0:
        Fprev = F - p  # F(k-1)
        if Fprev < v:
            break
        F = Fprev
        p = p * k / (m - k + 1.0)
        k -= 1
    return k


@njit(cache=True)
def binom_half_quantile_normal(m, z):
    """Binomial(m, 1/2) quantile at Phi(z); nondecreasing in z."""
    if m <= 0:
        return 0
    if z <= 0.0:
        return _binom_half_lower(m, _phi(z))
    return m - _binom_half_lower(m, _phi(-z))


# --------------------------------------------------------------------------
# drivers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CoupledDrivers:
    """Coupled ``(W, N)`` on ``[0, H]``; grid spacing ``H / 2**depth``.

    ``W`` and ``N`` are grid values (``N`` cumulative counts), ``events`` the
    sorted event times of ``N``.
    """

    H: float
    depth: int
    W: np.ndarray
    N: np.ndarray
    events: np.ndarray

    @property
    def dt(self) -> float:
        return self.H / (len(self.W) - 1)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(len(self.W)) * self.dt

    def counts(self, t) -> np.ndarray:
        """``N(t)`` (right-continuous)."""
        return np.searchsorted(self.events, np.asarray(t, float), side="right")

    def compensated_sup_distance(self) -> float:
        """``sup_{t <= H} |N(t) - t - W(t)|`` with ``W`` linear between grid points.

        Evaluated at grid points and at both one-sided limits at every event.
        """
        g = self.grid
        best = float(np.max(np.abs(self.N - g - self.W))) if len(g) else 0.0
        if len(self.events):
            e = self.events
            we = np.interp(e, g, self.W)
            after = np.arange(1, len(e) + 1)
            best = max(best, float(np.max(np.abs(after - e - we))),
                       float(np.max(np.abs(after - 1 - e - we))))
        return best

    def dump(self) -> str:
        """Debug dump ``grid_index,t,W,N``."""
        lines = ["grid_index,t,W,N"]
        for i, (t, w, c) in enumerate(zip(self.grid, self.W, self.N)):
            lines.append(f"{i},{float(t)!r},{float(w)!r},{int(c)}")
        return "\n".join(lines) + "\n"


@njit(cache=True)
def _build_kernel(H, m, rng, max_count, check):
    M = 1 << m
    W = np.zeros(M + 1)
    N = np.zeros(M + 1, dtype=np.int64)
    z = rng.standard_normal()
    W[M] = math.sqrt(H) * z
    if H > 10.0 * max_count:
        return W, N, np.empty(0), -1, 0
    N[M] = poisson_quantile_normal(H, z)
    if N[M] > max_count:
        return W, N, np.empty(0), -1, N[M]
    dt = H / M
    for level in range(1, m + 1):
        half = M >> level
        sd = 0.5 * math.sqrt(2.0 * half * dt)
        for j in range(half, M, 2 * half):
            a = j - half
            b = j + half
            z = rng.standard_normal()
            W[j] = 0.5 * (W[a] + W[b]) + sd * z
            cnt = N[b] - N[a]
            left = binom_half_quantile_normal(cnt, z)
            if check and cnt > 0:
                # left count must be nondecreasing in the bridge midpoint
                if left < 0 or left > cnt or binom_half_quantile_normal(cnt, z - 1e-6) > left \
                        or binom_half_quantile_normal(cnt, z + 1e-6) < left:
                    return W, N, np.empty(0), -2, j
            N[j] = N[a] + left
    ev = np.empty(N[M])
    for cell in range(M):
        lo = N[cell]
        hi = N[cell + 1]
        for e in range(lo, hi):
            ev[e] = (cell + rng.random()) * dt
        for e in range(lo + 1, hi):  # insertion sort, cells hold few events
            v = ev[e]
            q = e - 1
            while q >= lo and ev[q] > v:
                ev[q + 1] = ev[q]
                q -= 1
            ev[q + 1] = v
    return W, N, ev, 0, 0


def build_coupled_drivers(H: float, depth: int, rng, check: bool = True) -> CoupledDrivers:
    """Construct coupled Brownian motion and Poisson process on ``[0, H]``.

    Args:
        H: horizon in operational time.
        depth: number of dyadic refinements; grid spacing is ``H / 2**depth``.
        rng: :class:`RngStream`, Generator or seed.

    Raises:
        DriverError: if a cell would hold more than ``10**7`` events.
    """
    if not H > 0:
        raise ValueError("horizon H must be positive")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if depth > 28:
        raise ValueError("depth > 28 would need more than 2**28 grid points")
    W, N, ev, status, info = _build_kernel(float(H), int(depth), as_generator(rng), MAX_CELL_COUNT, check)
    if status == -1:
        raise DriverError(f"Poisson total for horizon H={H:g} exceeds {MAX_CELL_COUNT} "
                          f"(cell [0, {H:g}], count {info}); horizon misconfigured")
    if status == -2:
        raise DriverError(f"non-monotone binomial quantile in cell centred at grid index {info}")
    W.setflags(write=False)
    N.setflags(write=False)
    ev.setflags(write=False)
    return CoupledDrivers(float(H), int(depth), W, N, ev)


def depth_for(H: float, cell: float) -> int:
    """Smallest depth with grid spacing ``<= cell``."""
    return max(1, int(math.ceil(math.log2(max(H / cell, 2.0)))))


# --------------------------------------------------------------------------
# coupled pair
# --------------------------------------------------------------------------

@njit(cache=True)
def _bridge_value(theta, c, W, w_off, w_dt, state, rng):
    """W_c(theta) for nondecreasing theta, sampled exactly from the Brownian bridge.

    ``state[c] = (t_a, W_a)``: the last point revealed on channel c.
    Returns nan if theta is beyond the grid.
    """
    ta = state[c, 0]
    wa = state[c, 1]
    if theta <= ta:
        return wa
    ncell = w_off[c + 1] - w_off[c] - 1
    dt = w_dt[c]
    g = int(ta / dt)
    if g >= ncell:
        g = ncell - 1
    tr = (g + 1) * dt
    if theta > tr:
        g = int(theta / dt)
        if g >= ncell:
            if theta > ncell * dt * (1 + 1e-12):
                return np.nan
            g = ncell - 1
        ta = g * dt
        wa = W[w_off[c] + g]
        tr = (g + 1) * dt
        if theta == ta:
            state[c, 0] = ta
            state[c, 1] = wa
            return wa
    wr = W[w_off[c] + g + 1]
    span = tr - ta
    if span <= 0.0:
        val = wr
    else:
        s = min(theta, tr) - ta
        mean = wa + s / span * (wr - wa)
        var = s * (span - s) / span
        val = mean + math.sqrt(max(var, 0.0)) * rng.standard_normal()
    state[c, 0] = theta
    state[c, 1] = val
    return val


@njit(cache=True)
def _next_event(events, off, c, ptr):
    idx = off[c] + ptr[c]
    if idx >= off[c + 1]:
        return np.inf
    return events[idx]


@njit(cache=True)
def _coupled_kernel(x0, t_end, n, lower, upper, tol, ptr, coef, fac, L, policy,
                    W, w_off, w_dt, H, NW, nw_off, NJ, nj_off, rng, dt_grid):
    d = x0.size
    C = L.shape[0]
    fz = np.empty(C)
    fx = np.empty(C)
    gate = np.zeros(C, dtype=np.int64)
    z = x0.copy()
    xh = x0.copy()
    K.snap_inplace(z, lower, upper, tol)
    K.snap_inplace(xh, lower, upper, tol)
    thZc = np.zeros(C)
    thZj = np.zeros(C)
    pZj = np.zeros(C, dtype=np.int64)
    thXc = np.zeros(C)
    pXc = np.zeros(C, dtype=np.int64)
    thXj = np.zeros(C)
    pXj = np.zeros(C, dtype=np.int64)
    bstate = np.zeros((C, 2))
    ngrid = int(math.ceil(t_end / dt_grid - 1e-9))  # grid times strictly below t_end
    rows = np.empty((ngrid + 1, 1 + 2 * d))
    nrow = 0
    gi = 0
    sup = 0.0
    t = 0.0
    status = 0
    bad = -1
    jumps_x = 0
    jumps_z = 0
    zold = np.empty(d)
    zpre = np.empty(d)
    while t < t_end and status == 0:
        K.ab_all(L, z, lower, upper, n, tol, gate)
        K.channel_rates(z, lower, upper, ptr, coef, fac, fz)
        step = K.select_step(z, lower, upper, policy)
        tn = K.next_time(t, step, t_end)
        tau = tn - t
        fire = -1
        for c in range(C):
            if gate[c] and fz[c] > 0.0:
                nxt = _next_event(NJ, nj_off, c, pZj)
                tc = (nxt - thZj[c]) / (n * fz[c])
                if t + tc < tn:
                    tn = t + tc
                    tau = tc
                    fire = c
        # --- Z over [t, tn]
        for i in range(d):
            zold[i] = z[i]
            zpre[i] = z[i]
        for c in range(C):
            dth = n * fz[c] * tau
            if gate[c]:
                if fz[c] > 0.0:
                    if c == fire:
                        thZj[c] = NJ[nj_off[c] + pZj[c]]
                        pZj[c] += 1
                    else:
                        thZj[c] += dth
                    if thZj[c] > H[c]:
                        status = 1
                        bad = c
                continue
            if dth > 0.0:
                w0 = bstate[c, 1]
                w1 = _bridge_value(thZc[c] + dth, c, W, w_off, w_dt, bstate, rng)
                if np.isnan(w1):
                    status = 1
                    bad = c
                    break
                thZc[c] += dth
                amt = fz[c] * tau + (w1 - w0) / n
                for i in range(d):
                    zpre[i] += L[c, i] * amt
        if status:
            break
        for i in range(d):
            z[i] = zpre[i]
        if fire >= 0:
            for i in range(d):
                z[i] += L[fire, i] / n
            jumps_z += 1
        K.project_inplace(z, lower, upper)
        K.snap_inplace(z, lower, upper, tol)
        # --- X-hat over [t, tn], gates frozen
        s = t
        while True:
            K.channel_rates(xh, lower, upper, ptr, coef, fac, fx)
            best = np.inf
            bc = -1
            for c in range(C):
                if fx[c] > 0.0:
                    if gate[c]:
                        nxt = _next_event(NJ, nj_off, c, pXj)
                        dtc = (nxt - thXj[c]) / (n * fx[c])
                    else:
                        nxt = _next_event(NW, nw_off, c, pXc)
                        dtc = (nxt - thXc[c]) / (n * fx[c])
                    if dtc < best:
                        best = dtc
                        bc = c
            s_next = s + best
            last = s_next >= tn
            if last:
                s_next = tn
            # grid times in [s, s_next) see X-hat before its next jump
            while gi < ngrid and gi * dt_grid < s_next - 1e-12:
                tg = gi * dt_grid
                w = (tg - t) / tau if tau > 0 else 1.0
                rows[nrow, 0] = tg
                for i in range(d):
                    rows[nrow, 1 + i] = xh[i]
                    rows[nrow, 1 + d + i] = zold[i] + w * (zpre[i] - zold[i])
                nrow += 1
                gi += 1
            dtau = s_next - s
            for c in range(C):
                if fx[c] > 0.0:
                    if gate[c]:
                        thXj[c] += n * fx[c] * dtau
                        if thXj[c] > H[c]:
                            status = 1
                            bad = c
                    else:
                        thXc[c] += n * fx[c] * dtau
                        if thXc[c] > H[c]:
                            status = 1
                            bad = c
            if last:
                break
            w = (s_next - t) / tau if tau > 0 else 1.0
            dist = 0.0
            for i in range(d):
                dist = max(dist, abs(xh[i] - (zold[i] + w * (zpre[i] - zold[i]))))
            if gate[bc]:
                thXj[bc] = NJ[nj_off[bc] + pXj[bc]]
                pXj[bc] += 1
            else:
                thXc[bc] = NW[nw_off[bc] + pXc[bc]]
                pXc[bc] += 1
            for i in range(d):
                xh[i] += L[bc, i] / n
            jumps_x += 1
            for i in range(d):
                dist = max(dist, abs(xh[i] - (zold[i] + w * (zpre[i] - zold[i]))))
            sup = max(sup, dist)
            s = s_next
        for i in range(d):
            sup = max(sup, abs(xh[i] - zpre[i]), abs(xh[i] - z[i]))
        t = tn
        # grid point landing exactly on the step end takes post-step values
        if gi < ngrid and abs(gi * dt_grid - t) <= 1e-12:
            rows[nrow, 0] = gi * dt_grid
            for i in range(d):
                rows[nrow, 1 + i] = xh[i]
                rows[nrow, 1 + d + i] = z[i]
            nrow += 1
            gi += 1
    if status == 0:
        rows[nrow, 0] = t
        for i in range(d):
            rows[nrow, 1 + i] = xh[i]
            rows[nrow, 1 + d + i] = z[i]
        nrow += 1
    clocks = np.empty((C, 4))
    for c in range(C):
        clocks[c, 0] = thXc[c]
        clocks[c, 1] = thXj[c]
        clocks[c, 2] = thZc[c]
        clocks[c, 3] = thZj[c]
    return rows[:nrow], sup, status, bad, t, jumps_x, jumps_z, clocks


@dataclass
class ChannelDrivers:
    """Drivers for one channel: coupled ``(W, N^W)`` plus the shared boundary Poisson."""

    coupled: CoupledDrivers
    boundary_events: np.ndarray

    @property
    def H(self) -> float:
        return self.coupled.H


def build_channel_drivers(family: DensityFamily, t_end: float, rng: RngStream, cell: float = 0.25,
                          caps=None, margin: float = 1.05) -> list[ChannelDrivers]:
    """Drivers for every channel with horizon ``n * sup f_l * t_end`` (times ``margin``)."""
    fbar = family.rate_bounds(caps)
    out = []
    for c in range(family.n_channels):
        H = max(family.n * fbar[c] * t_end * margin, 1.0)
        drv = build_coupled_drivers(H, depth_for(H, cell), rng.substream(2 * c))
        g = rng.substream(2 * c + 1).generator()
        k = g.poisson(H)
        jumps = np.sort(g.random(k) * H)
        out.append(ChannelDrivers(drv, jumps))
    return out


@dataclass
class CoupledPair:
    x_hat: Trajectory
    z: Trajectory
    sup_distance: float
    stats: dict


def simulate_coupled_pair(family: DensityFamily, x0, t_end: float, policy: StepPolicy | None,
                          drivers: list[ChannelDrivers], rng=None, grid_dt: float | None = None) -> CoupledPair:
    """Run ``X-hat`` and ``Z`` on shared drivers.

    Both paths are returned on a common grid (``X-hat`` exact, ``Z`` linearly
    interpolated between Euler nodes); ``sup_distance`` is the max-norm
    distance over all jump and step times.

    Raises:
        DriverError: when a channel's operational clock passes its horizon;
            the message gives the horizon needed.
    """
    if policy is None:
        policy = StepPolicy.for_volume(family.n)
    if len(drivers) != family.n_channels:
        raise ValueError(f"need one driver per channel ({family.n_channels}), got {len(drivers)}")
    x = family.check_in_box(x0)
    grid_dt = t_end / 1000 if grid_dt is None else grid_dt
    W = np.concatenate([dr.coupled.W for dr in drivers])
    w_off = np.cumsum([0] + [len(dr.coupled.W) for dr in drivers]).astype(np.int64)
    w_dt = np.array([dr.coupled.dt for dr in drivers])
    H = np.array([dr.H for dr in drivers])
    NW = np.concatenate([dr.coupled.events for dr in drivers])
    nw_off = np.cumsum([0] + [len(dr.coupled.events) for dr in drivers]).astype(np.int64)
    NJ = np.concatenate([dr.boundary_events for dr in drivers])
    nj_off = np.cumsum([0] + [len(dr.boundary_events) for dr in drivers]).astype(np.int64)
    gen = as_generator(rng if rng is not None else RngStream(0, 2**63))
    rows, sup, status, bad, t_stop, jx, jz, clocks = _coupled_kernel(
        x, float(t_end), family.n, family.lower, family.upper, family.snap_tol, family.term_ptr,
        family.coef, family.factors, family.L, policy.as_array(), W, w_off, w_dt, H, NW, nw_off,
        NJ, nj_off, gen, float(grid_dt))
    if status:
        used = float(np.max(clocks[bad]))
        need = used / max(t_stop, 1e-300) * t_end
        raise DriverError(f"driver horizon exhausted on channel {bad} (increment "
                          f"{family.increments[bad]}) at t={t_stop:.6g}: horizon {H[bad]:.6g}, "
                          f"need about {need:.6g}")
    d = family.d
    m = len(rows)
    kinds = np.full(m, K.GRID)
    kinds[0], kinds[-1] = K.START, K.END
    none = np.full(m, -1)
    nan = np.full(m, np.nan)
    stats = {"jumps_x_hat": int(jx), "jumps_z": int(jz), "clocks": clocks}
    xh = Trajectory(rows[:, 0].copy(), rows[:, 1:1 + d].copy(), kinds, none, nan,
                    species=family.network.species)
    zt = Trajectory(rows[:, 0].copy(), rows[:, 1 + d:].copy(), kinds.copy(), none.copy(), nan.copy(),
                    species=family.network.species)
    return CoupledPair(xh, zt, float(sup), stats)


@dataclass
class RateStudyTable:
    rows: list  # (n, rep, sup_distance, scaled)

    def medians(self) -> dict:
        out = {}
        for n in sorted({r[0] for r in self.rows}):
            out[n] = float(np.median([r[3] for r in self.rows if r[0] == n]))
        return out

    def to_csv(self, path=None) -> str:
        text = "n,rep,sup_distance,scaled\n" + "".join(
            f"{n},{rep},{float(s)!r},{float(sc)!r}\n" for n, rep, s, sc in self.rows)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def coupled_step_policy(n: float) -> StepPolicy:
    """Step policy for strong-rate studies: base step below ``0.1 log(n)/n``."""
    base = min(0.005, 0.1 * math.log(n) / n)
    return StepPolicy.for_volume(n, base=base, mid=base * 0.5, near=base * 0.2)


def rate_study(network, x0, t_end: float, n_list, reps: int, seed: int, cell: float = 0.25,
               policy_fn=coupled_step_policy, progress=None) -> RateStudyTable:
    """Empirical ``sup_{t<=T} |X-hat - Z|`` and its ``n / log n`` scaling over ``n_list``.

    Replicate ``r`` at volume ``n`` uses ``RngStream(seed, n * 100003 + r)``.
    """
    rows = []
    for n in n_list:
        if n < 2:
            raise ValueError("n must be >= 2")
        fam = DensityFamily(network, n)
        x = np.round(np.asarray(x0, float) * n) / n
        for r in range(reps):
            stream = RngStream(seed, int(n) * 100003 + r)
            drivers = build_channel_drivers(fam, t_end, stream, cell=cell)
            pair = simulate_coupled_pair(fam, x, t_end, policy_fn(n), drivers,
                                         rng=stream.substream(10**6), grid_dt=t_end)
            rows.append((int(n), r, pair.sup_distance, pair.sup_distance * n / math.log(n)))
            if progress:
                progress(n, r)
    return RateStudyTable(rows)
