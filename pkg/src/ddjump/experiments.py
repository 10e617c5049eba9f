"""Bundled reproduction pipelines used by ``ddjump reproduce`` and the scripts.

Each pipeline writes CSV (authoritative), SVG (convenience) and a JSON
summary into ``out`` and returns the summary dict.  ``summary["checks"]``
maps check names to booleans; ``summary["passed"]`` is their conjunction.
Desk and paper scale differ only in path counts and volume lists.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import svg
from .coupling import rate_study
from .ensemble import simulate_ensemble
from .jump_diffusion import StepPolicy, simulate_jump_diffusion
from .network import DensityFamily, load_network
from .ode import integrate_ode
from .ssa import simulate_ssa
from .stats import bimodality_report, heat_histogram, kde, ks_distance, u_statistic
from .trajectory import RngStream

NAMES = ("tk-fig1", "tk-fig2", "bistable-fig3", "bistable-fig4", "example1-failure", "rate-study")

SCALES = {
    "tk-fig1": {"desk": {"paths": 20}, "paper": {"paths": 100}},
    "tk-fig2": {"desk": {"paths": 2000}, "paper": {"paths": 40000}},
    "bistable-fig3": {"desk": {}, "paper": {}},
    "bistable-fig4": {"desk": {"paths": 400}, "paper": {"paths": 400}},
    "example1-failure": {"desk": {"paths": 500}, "paper": {"paths": 500}},
    "rate-study": {"desk": {"n_list": [2**k for k in range(6, 11)], "reps": 20},
                   "paper": {"n_list": [2**k for k in range(6, 13)], "reps": 100}},
}

FIG4_WINDOW = (8.0, 8.0, 16.0)


def policy_from_defaults(network, n: float) -> StepPolicy:
    p = dict(network.defaults.get("policy") or {})
    return StepPolicy.for_volume(n, **p) if p else StepPolicy.for_volume(n)


def grid_states(traj):
    return traj.states.copy()


def u_summary(traj):
    return u_statistic(traj.endpoint)


def no_summary(traj):
    return 0.0


def _write(out: Path, name: str, text: str):
    (out / name).write_text(text)


def _finish(out: Path, name: str, summary: dict) -> dict:
    summary["passed"] = all(summary["checks"].values())
    _write(out, f"{name}-summary.json", json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")
    return summary


def _samples_csv(header: str, values) -> str:
    return header + "\n" + "".join(f"{i + 1},{float(v)!r}\n" for i, v in enumerate(values))


def tk_fig1(out: Path, scale="desk", seed=7, workers=1) -> dict:
    """Togashi-Kaneko jump-diffusion paths at V=32 from (3,0,1,0); pattern switches of U."""
    net = load_network("togashi-kaneko")
    fam = DensityFamily(net, 32)
    x0, t_end = [3, 0, 1, 0], 600.0
    traj = simulate_jump_diffusion(fam, x0, t_end, rng=RngStream(seed, 1), record=("grid", 0.5))
    _write(out, "tk-fig1-trajectory.csv", traj.to_csv(include_log=False))
    series = {net.species[i]: (traj.times, traj.states[:, i]) for i in range(4)}
    _write(out, "tk-fig1.svg", svg.line_plot(series, "Togashi-Kaneko jump-diffusion, V=32", "t", "density"))
    ens = simulate_ensemble(fam, x0, t_end, SCALES["tk-fig1"][scale]["paths"], seed, grid_states,
                            method="jd", workers=workers, record=("grid", 0.5))
    switched = [bool(np.any(u_statistic(s) < 0)) for s in ens.summaries]
    frac = float(np.mean(switched))
    _write(out, "tk-fig1-switches.csv", _samples_csv("path,switched", [int(s) for s in switched]))
    return _finish(out, "tk-fig1", {"paths": len(ens), "switch_fraction": frac,
                                    "checks": {"switch_fraction>=0.5": frac >= 0.5}})


def tk_fig2(out: Path, scale="desk", seed=11, workers=1, volume=128, paths=None) -> dict:
    """U-samples from the chain and U~ from the jump-diffusion at t=2500, with KDEs and KS distance."""
    net = load_network("togashi-kaneko")
    fam = DensityFamily(net, volume)
    paths = paths or SCALES["tk-fig2"][scale]["paths"]
    x0, t_end = [1, 1, 1, 1], 2500.0
    u_ssa = simulate_ensemble(fam, x0, t_end, paths, seed, u_summary, "ssa", workers).values()
    u_jd = simulate_ensemble(fam, x0, t_end, paths, seed + 1, u_summary, "jd", workers).values()
    k_ssa, k_jd = kde(u_ssa), kde(u_jd)
    ks = ks_distance(u_ssa, u_jd)
    _write(out, "tk-fig2-u-ssa.csv", _samples_csv("path,u", u_ssa))
    _write(out, "tk-fig2-u-jd.csv", _samples_csv("path,u", u_jd))
    _write(out, "tk-fig2-kde-ssa.csv", k_ssa.to_csv())
    _write(out, "tk-fig2-kde-jd.csv", k_jd.to_csv())
    _write(out, "tk-fig2.svg", svg.line_plot({"chain U": (k_ssa.grid, k_ssa.density),
                                              "jump-diffusion U~": (k_jd.grid, k_jd.density)},
                                             f"KDE of U at t=2500, V={volume:g}", "U", "density"))
    return _finish(out, "tk-fig2", {"paths": paths, "volume": volume, "ks_distance": ks,
                                    "bimodality_jd": bimodality_report(k_jd),
                                    "checks": {"ks<0.1": ks < 0.1}})


def bistable_fig3(out: Path, scale="desk", seed=3, workers=1) -> dict:
    """One chain path and one independent jump-diffusion path of the bistable network."""
    net = load_network("bistable")
    n = net.defaults["volume"]
    fam = DensityFamily(net, n)
    x0, t_end = net.defaults["x0"], float(net.defaults["t_end"])
    dt = float(net.defaults.get("sample_every", 0.2))
    a = simulate_ssa(fam, x0, t_end, RngStream(seed, 1), record=("grid", dt))
    b = simulate_jump_diffusion(fam, x0, t_end, policy_from_defaults(net, n), RngStream(seed, 2),
                                record=("grid", dt))
    _write(out, "bistable-fig3-ssa.csv", a.to_csv(include_log=False))
    _write(out, "bistable-fig3-jd.csv", b.to_csv(include_log=False))
    series = {}
    for i, s in enumerate(net.species):
        series[f"chain {s}"] = (a.times, a.states[:, i])
        series[f"jd {s}"] = (b.times, b.states[:, i])
    _write(out, "bistable-fig3.svg", svg.line_plot(series, "Bistable network, V=100", "t", "density"))
    drift_ok = _equilibria_check(fam, net)
    return _finish(out, "bistable-fig3", {"checks": drift_ok})


def _equilibria_check(fam, net) -> dict:
    from .network import drift
    eq = [np.asarray(e, float) for e in net.defaults["equilibria"]]
    ode = integrate_ode(fam, net.defaults["x0"], float(net.defaults["t_end"]), h=1e-3)
    return {
        "drift(x1)<1e-2": bool(np.all(np.abs(drift(fam, eq[0])) < 1e-2)),
        "drift(x2)<1e-2": bool(np.all(np.abs(drift(fam, eq[1])) < 1e-2)),
        "ode->x1": bool(np.max(np.abs(ode.states[-1] - eq[0])) < 1e-3),
    }


def bistable_fig4(out: Path, scale="desk", seed=5, workers=1, bins=60) -> dict:
    """Occupation histograms of chain and jump-diffusion ensembles sampled every 0.2."""
    net = load_network("bistable")
    n = net.defaults["volume"]
    fam = DensityFamily(net, n)
    x0, t_end = net.defaults["x0"], float(net.defaults["t_end"])
    dt = float(net.defaults.get("sample_every", 0.2))
    x2 = np.asarray(net.defaults["equilibria"][1], float)
    paths = SCALES["bistable-fig4"][scale]["paths"]
    res = {}
    for method, s in (("ssa", seed), ("jd", seed + 1)):
        ens = simulate_ensemble(fam, x0, t_end, paths, s, grid_states, method, workers,
                                record=("grid", dt), policy=policy_from_defaults(net, n))
        pts = np.concatenate(ens.summaries)
        near = np.max(np.abs(ens.endpoints - x2), axis=1) <= 1.0
        res[method] = float(np.mean(near))
        for dims in ((0, 1), (0, 2), (1, 2)):
            # fixed window so the two methods' histograms share bins
            hist = heat_histogram(pts, dims, bins, [[0, FIG4_WINDOW[k]] for k in dims])
            tag = f"{method}-{dims[0] + 1}{dims[1] + 1}"
            _write(out, f"bistable-fig4-{tag}.csv", hist.to_csv())
            _write(out, f"bistable-fig4-{tag}.svg",
                   svg.heatmap(hist.counts, hist.x_edges, hist.y_edges, f"{method} occupation",
                               net.species[dims[0]], net.species[dims[1]]))
    checks = {"0.45<=ssa_near_x2<=0.75": 0.45 <= res["ssa"] <= 0.75,
              "|ssa-jd|<0.10": abs(res["ssa"] - res["jd"]) < 0.10}
    return _finish(out, "bistable-fig4", {"paths": paths, "near_x2": res, "checks": checks})


def example1_failure(out: Path, scale="desk", seed=13, workers=1, h=1e-3) -> dict:
    """Boundary failures of the diffusion approximation started near 0, against the jump-diffusion."""
    net = load_network("example1")
    paths = SCALES["example1-failure"][scale]["paths"]
    x0, t_end = [0.05], 10.0
    frac = {}
    for n in (32, 10**6):
        ens = simulate_ensemble(DensityFamily(net, n), x0, t_end, paths, seed, no_summary, "diffusion",
                                workers, h=h, on_negative="fail")
        frac[n] = ens.failure_fraction
        rows = ["path,status,t,channel,value"]
        for p, f in zip(ens.stream_ids, ens.failures):
            rows.append(f"{p},completed,,," if f is None else
                        f"{p},boundary_failure,{float(f.t)!r},{f.channel},{float(f.value)!r}")
        _write(out, f"example1-failure-n{n}.csv", "\n".join(rows) + "\n")
    fam = DensityFamily(net, 32)
    jd = simulate_jump_diffusion(fam, x0, t_end, rng=RngStream(seed, 1))
    _write(out, "example1-jd-path.csv", jd.to_csv())
    checks = {"failure_fraction(n=32)>=0.5": frac[32] >= 0.5, "failures(n=1e6)==0": frac[10**6] == 0}
    return _finish(out, "example1-failure", {"paths": paths, "h": h,
                                             "failure_fraction": {str(k): v for k, v in frac.items()},
                                             "checks": checks})


def rate_study_pipeline(out: Path, scale="desk", seed=17, workers=1, n_list=None, reps=None) -> dict:
    """Coupled-pair sup distance on Example 1 across volumes, scaled by n / log n."""
    from scipy.stats import spearmanr

    cfg = SCALES["rate-study"][scale]
    n_list = n_list or cfg["n_list"]
    reps = reps or cfg["reps"]
    table = rate_study(load_network("example1"), [0.5], 10.0, n_list, reps, seed)
    table.to_csv(out / "rate-study.csv")
    med = table.medians()
    ns = sorted(med)
    vals = [med[n] for n in ns]
    rho, p = spearmanr(ns, vals, alternative="greater")
    _write(out, "rate-study.svg", svg.line_plot({"median sup * n / log n": (np.log2(ns), vals)},
                                                "Strong approximation rate", "log2 n", "scaled sup"))
    ratio = max(vals) / min(vals)
    checks = {"max/min<3": ratio < 3, "no_significant_growth": not (p < 0.05)}
    return _finish(out, "rate-study", {"medians": {str(k): v for k, v in med.items()}, "ratio": ratio,
                                       "spearman_rho": float(rho), "spearman_p": float(p),
                                       "checks": checks})


PIPELINES = {
    "tk-fig1": tk_fig1, "tk-fig2": tk_fig2, "bistable-fig3": bistable_fig3,
    "bistable-fig4": bistable_fig4, "example1-failure": example1_failure,
    "rate-study": rate_study_pipeline,
}


def run(name: str, out, scale="desk", seed=None, workers=1) -> dict:
    if name not in PIPELINES:
        raise ValueError(f"unknown reproduction {name!r}; expected one of {NAMES}")
    if scale not in ("desk", "paper"):
        raise ValueError("scale must be 'desk' or 'paper'")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    kw = {"scale": scale, "workers": workers}
    if seed is not None:
        kw["seed"] = seed
    return PIPELINES[name](out, **kw)
