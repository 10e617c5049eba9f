"""Seeded path ensembles, optionally fanned out over worker processes.

Path ``p`` (1-based) always draws from ``RngStream(seed, p)``, so results do
not depend on the number of workers or on scheduling order.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .network import DensityFamily
from .trajectory import RngStream

METHODS = ("ssa", "jd", "diffusion", "ode")


class EnsembleError(RuntimeError):
    """A single path failed; ``path`` is its 1-based index."""

    def __init__(self, path: int, cause: BaseException):
        super().__init__(f"path {path} failed: {type(cause).__name__}: {cause}")
        self.path = path
        self.cause = cause


@dataclass
class EnsembleResult:
    """Per-path summaries keyed by stream id (``stream_ids[k]`` produced ``summaries[k]``)."""

    seed: int
    method: str
    stream_ids: np.ndarray
    endpoints: np.ndarray
    summaries: list
    failures: list = field(default_factory=list)  # BoundaryFailure or None per path (diffusion only)

    def __len__(self):
        return len(self.stream_ids)

    def values(self) -> np.ndarray:
        return np.asarray(self.summaries, dtype=float)

    @property
    def failure_fraction(self) -> float:
        return sum(f is not None for f in self.failures) / len(self) if self.failures else 0.0


def endpoint_summary(traj):
    return traj.endpoint.copy()


def _run_one(family, x0, t_end, method, stream, options):
    if method == "ssa":
        from .ssa import simulate_ssa
        return simulate_ssa(family, x0, t_end, stream, record=options.get("record", "endpoints")), None
    if method == "jd":
        from .jump_diffusion import simulate_jump_diffusion
        return simulate_jump_diffusion(family, x0, t_end, policy=options.get("policy"), rng=stream,
                                       record=options.get("record", "endpoints"),
                                       neighborhood=options.get("neighborhood")), None
    if method == "diffusion":
        from .diffusion import simulate_diffusion
        out = simulate_diffusion(family, x0, t_end, options.get("h", 1e-3), stream,
                                 on_negative=options.get("on_negative", "fail"),
                                 record=options.get("record", "endpoints"))
        return out.trajectory, out.failure
    if method == "ode":
        from .ode import integrate_ode
        return integrate_ode(family, x0, t_end, h=options.get("h", 1e-3)).trajectory(), None
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _run_chunk(args):
    network, n, x0, t_end, method, seed, paths, summary_fn, options = args
    family = DensityFamily(network, n)
    out = []
    for p in paths:
        try:
            traj, failure = _run_one(family, x0, t_end, method, RngStream(seed, p), options)
            out.append((p, traj.endpoint.copy(), summary_fn(traj), failure))
        except Exception as exc:  # re-raised in the parent with the path index
            return out, (p, exc)
    return out, None


def simulate_ensemble(family: DensityFamily, x0, t_end: float, n_paths: int, seed: int,
                      summary_fn=endpoint_summary, method: str = "ssa", workers: int | None = 1,
                      **options) -> EnsembleResult:
    """Simulate ``n_paths`` independent paths and collect ``summary_fn(trajectory)`` per path.

    Args:
        method: ``"ssa"``, ``"jd"``, ``"diffusion"`` or ``"ode"``.
        workers: process count (``None`` = all CPUs).  ``summary_fn`` must be
            picklable (module-level) when ``workers > 1``.
        options: forwarded to the simulator (``record``, ``policy``, ``h``,
            ``on_negative``, ``neighborhood``).

    Raises:
        EnsembleError: wrapping the first failing path's exception.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    workers = os.cpu_count() or 1 if workers is None else max(1, int(workers))
    paths = list(range(1, n_paths + 1))
    chunks = [paths[i::workers] for i in range(workers)] if workers > 1 else [paths]
    jobs = [(family.network, family.n, x0, t_end, method, seed, ch, summary_fn, options)
            for ch in chunks if ch]
    if len(jobs) == 1:
        results = [_run_chunk(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            results = list(pool.map(_run_chunk, jobs))
    rows = []
    errors = []
    for part, err in results:
        rows.extend(part)
        if err is not None:
            errors.append(err)
    if errors:
        p, exc = min(errors, key=lambda e: e[0])
        raise EnsembleError(p, exc) from exc
    rows.sort(key=lambda r: r[0])
    return EnsembleResult(
        seed=seed, method=method,
        stream_ids=np.array([r[0] for r in rows], dtype=np.int64),
        endpoints=np.array([r[1] for r in rows]),
        summaries=[r[2] for r in rows],
        failures=[r[3] for r in rows] if method == "diffusion" else [],
    )
