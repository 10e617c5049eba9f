"""Post-processing: U-statistic, Gaussian KDE, KS distance, path distances, 2D histograms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trajectory import Trajectory

KDE_POINTS = 512


def u_statistic(x) -> np.ndarray | float:
    """``x1 + x3 - x2 - x4`` for 4-species states (vectorised over leading axes)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 4:
        raise ValueError(f"dimension mismatch: U needs 4 coordinates, got {x.shape[-1]}")
    u = x[..., 0] + x[..., 2] - x[..., 1] - x[..., 3]
    return float(u) if u.ndim == 0 else u


@dataclass(frozen=True)
class DensityEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def local_maxima(self) -> np.ndarray:
        """Indices of strict interior local maxima."""
        f = self.density
        return np.flatnonzero((f[1:-1] > f[:-2]) & (f[1:-1] > f[2:])) + 1

    def to_csv(self, path=None) -> str:
        text = "u,density\n" + "".join(f"{float(g)!r},{float(v)!r}\n" for g, v in zip(self.grid, self.density))
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    return 1.06 * float(np.std(x, ddof=1)) * len(x) ** (-0.2)


def kde(samples, bandwidth="silverman", points: int = KDE_POINTS) -> DensityEstimate:
    """Gaussian kernel density estimate on ``points`` nodes over ``[min - 3h, max + 3h]``.

    ``bandwidth`` is ``"silverman"`` or a positive float.  The estimate is
    renormalised to unit trapezoidal mass on the window (the kernel tails
    beyond ``3h`` are otherwise lost).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("kde needs at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("kde samples must be finite")
    if bandwidth == "silverman":
        if np.ptp(x) == 0:
            raise ValueError("degenerate sample: all values equal, Silverman bandwidth is zero")
        h = silverman_bandwidth(x)
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ValueError("bandwidth must be positive")
        if np.ptp(x) == 0:
            raise ValueError("degenerate sample: all values equal")
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, points)
    dens = np.zeros(points)
    # chunk the sample to bound memory at (chunk x points)
    for lo in range(0, x.size, 4096):
        z = (grid[None, :] - x[lo:lo + 4096, None]) / h
        dens += np.exp(-0.5 * z * z).sum(axis=0)
    dens /= x.size * h * np.sqrt(2 * np.pi)
    dens /= np.trapezoid(dens, grid)
    return DensityEstimate(grid, dens, h)


def is_bimodal(est: DensityEstimate, dip_factor: float = 0.7, require_opposite_signs: bool = True) -> bool:
    """Two strict local maxima whose separating minimum is below ``dip_factor`` times the lower peak.

    With ``require_opposite_signs`` the two peaks must sit on opposite sides of 0.
    """
    return bimodality_report(est, dip_factor, require_opposite_signs)["bimodal"]


def bimodality_report(est: DensityEstimate, dip_factor: float = 0.7,
                      require_opposite_signs: bool = True) -> dict:
    f, g = est.density, est.grid
    peaks = est.local_maxima()
    best = {"bimodal": False, "peaks": [float(g[p]) for p in peaks], "dip_ratio": float("nan")}
    for a in range(len(peaks)):
        for b in range(a + 1, len(peaks)):
            i, j = peaks[a], peaks[b]
            if require_opposite_signs and not (g[i] < 0 < g[j]):
                continue
            ratio = float(f[i:j + 1].min() / min(f[i], f[j]))
            if np.isnan(best["dip_ratio"]) or ratio < best["dip_ratio"]:
                best.update(dip_ratio=ratio, modes=(float(g[i]), float(g[j])))
    best["bimodal"] = bool(best["dip_ratio"] < dip_factor)
    return best


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_distance needs nonempty samples")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def sup_trajectory_distance(a: Trajectory, b: Trajectory, grid) -> float:
    """``max_t |a(t-) - b(t-)|_inf`` over ``grid`` (left limits at jump times)."""
    grid = np.asarray(grid, dtype=float)
    for tr in (a, b):
        if grid.min() < tr.times[0] - 1e-12 or grid.max() > tr.times[-1] + 1e-12:
            raise ValueError("grid outside trajectory time range")
    return float(np.max(np.abs(a.at(grid) - b.at(grid))))


@dataclass(frozen=True)
class Histogram2D:
    counts: np.ndarray
    x_edges: np.ndarray
    y_edges: np.ndarray
    dims: tuple

    def to_csv(self, path=None) -> str:
        rows = ["bin_i,bin_j,count"]
        for i in range(self.counts.shape[0]):
            for j in range(self.counts.shape[1]):
                rows.append(f"{i},{j},{int(self.counts[i, j])}")
        text = "\n".join(rows) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def heat_histogram(points, dims=(0, 1), bins=50, range_=None) -> Histogram2D:
    """Occupation counts of the ``dims`` projection of ``points``."""
    p = np.asarray(points, dtype=float)
    if p.ndim != 2:
        raise ValueError("points must be an (m, d) array")
    i, j = dims
    if range_ is None:
        range_ = [[p[:, i].min(), p[:, i].max()], [p[:, j].min(), p[:, j].max()]]
        # widen degenerate ranges so a single point still gets a bin
        range_ = [[lo - 0.5, hi + 0.5] if hi == lo else [lo, hi] for lo, hi in range_]
    counts, xe, ye = np.histogram2d(p[:, i], p[:, j], bins=bins, range=range_)
    return Histogram2D(counts.astype(np.int64), xe, ye, (i, j))
