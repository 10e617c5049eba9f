"""``ddjump`` command line: simulate, reproduce, rate-study, validate.

Exit codes: 0 success, 2 configuration error, 3 simulation error,
4 reproduction check failed (``reproduce --check``).
Outputs go to ``--out``, else ``$DDJUMP_OUT``, else ``./ddjump-out``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__

ENV_OUT = "DDJUMP_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4
METHODS = ("ssa", "ode", "diffusion", "jd", "coupled", "rate-study")
POLICY_FLAGS = {"step": "base", "step_mid": "mid", "step_near": "near",
                "zone_mid": "zone_mid", "zone_near": "zone_near"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    network: str
    method: str = "ssa"
    volume: float | None = None
    x0: list | None = None
    t_end: float | None = None
    paths: int = 1
    seed: int = 0
    record: str = "full"
    h: float = 1e-3
    on_negative: str = "fail"
    policy: dict = field(default_factory=dict)
    n_list: list | None = None
    reps: int = 10
    workers: int = 1

    def resolve(self):
        """Validate, fill network defaults and return ``(network, family)``."""
        from .network import DensityFamily, load_network

        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.paths < 1:
            raise ConfigError("paths must be >= 1")
        net = load_network(self.network)
        d = net.defaults
        self.volume = float(self.volume if self.volume is not None else d.get("volume", 100))
        self.x0 = [float(v) for v in (self.x0 if self.x0 is not None else d.get("x0", []))]
        self.t_end = float(self.t_end if self.t_end is not None else d.get("t_end", 1.0))
        if self.method not in ("rate-study",) and len(self.x0) != net.d:
            raise ConfigError(f"x0 has {len(self.x0)} entries, network has {net.d} species")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if not self.policy and d.get("policy"):
            self.policy = dict(d["policy"])
        return net, DensityFamily(net, self.volume)

    def step_policy(self):
        from .jump_diffusion import StepPolicy
        return StepPolicy.for_volume(self.volume, **self.policy)


def default_out() -> Path:
    return Path(os.environ.get(ENV_OUT, "ddjump-out"))


def write_manifest(out: Path, cfg: ExperimentConfig, command: str, extra=None):
    doc = {"command": command, "version": __version__, "config": asdict(cfg), "seed": cfg.seed}
    if extra:
        doc["results"] = extra
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> ExperimentConfig:
    doc = json.loads(Path(path).read_text())
    try:
        return ExperimentConfig(**doc["config"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed manifest {path}: {exc}") from exc


def _ensemble_csv(ens, d: int) -> str:
    head = "path," + ",".join(f"x_{i + 1}" for i in range(d))
    fail = bool(ens.failures)
    lines = [head + (",status" if fail else "")]
    for k, p in enumerate(ens.stream_ids):
        row = f"{p}," + ",".join(repr(float(v)) for v in ens.endpoints[k])
        if fail:
            row += ",completed" if ens.failures[k] is None else ",boundary_failure"
        lines.append(row)
    return "\n".join(lines) + "\n"


def run_simulation(cfg: ExperimentConfig) -> dict:
    """Run ``cfg`` and return ``{filename: text}`` plus a results summary (nothing written yet)."""
    from .coupling import build_channel_drivers, rate_study, simulate_coupled_pair
    from .diffusion import simulate_diffusion
    from .ensemble import simulate_ensemble
    from .jump_diffusion import simulate_jump_diffusion
    from .ode import integrate_ode
    from .ssa import simulate_ssa
    from .trajectory import RngStream

    net, fam = cfg.resolve()
    files, results = {}, {}
    stream = RngStream(cfg.seed, 1)
    if cfg.method == "rate-study":
        n_list = cfg.n_list or [64, 128, 256]
        table = rate_study(net, cfg.x0, cfg.t_end, n_list, cfg.reps, cfg.seed)
        files["rate-study.csv"] = table.to_csv()
        results["medians"] = {str(k): v for k, v in table.medians().items()}
    elif cfg.method == "coupled":
        drivers = build_channel_drivers(fam, cfg.t_end, stream)
        pair = simulate_coupled_pair(fam, cfg.x0, cfg.t_end, cfg.step_policy(), drivers,
                                     rng=stream.substream(10**6))
        d = fam.d
        lines = ["t," + ",".join(f"xhat_{i + 1}" for i in range(d)) + "," + ",".join(f"z_{i + 1}" for i in range(d))]
        for t, a, b in zip(pair.x_hat.times, pair.x_hat.states, pair.z.states):
            lines.append(",".join(repr(float(v)) for v in (t, *a, *b)))
        files["coupled.csv"] = "\n".join(lines) + "\n"
        results["sup_distance"] = pair.sup_distance
    elif cfg.paths > 1:
        opts = {"h": cfg.h, "on_negative": cfg.on_negative, "policy": cfg.step_policy()}
        ens = simulate_ensemble(fam, cfg.x0, cfg.t_end, cfg.paths, cfg.seed, method=cfg.method,
                                workers=cfg.workers, **opts)
        files["ensemble.csv"] = _ensemble_csv(ens, fam.d)
        if ens.failures:
            results["failure_fraction"] = ens.failure_fraction
    else:
        rec = cfg.record
        if cfg.method == "ssa":
            traj = simulate_ssa(fam, cfg.x0, cfg.t_end, stream, record=rec)
        elif cfg.method == "jd":
            traj = simulate_jump_diffusion(fam, cfg.x0, cfg.t_end, cfg.step_policy(), stream, record=rec)
            results["projections"] = traj.stats["projections"]
            results["flagged_projections"] = traj.stats["flagged_projections"]
        elif cfg.method == "diffusion":
            outc = simulate_diffusion(fam, cfg.x0, cfg.t_end, cfg.h, stream, cfg.on_negative, record=rec)
            traj = outc.trajectory
            results["status"] = outc.status
            if outc.failure:
                f = outc.failure
                results["failure"] = {"t": f.t, "channel": f.channel, "increment": list(f.increment),
                                      "value": f.value}
        else:
            traj = integrate_ode(fam, cfg.x0, cfg.t_end, h=cfg.h).trajectory()
        files["trajectory.csv"] = traj.to_csv()
    return {"files": files, "results": results}


def _conservation_warning(net):
    from .network import conservation_laws
    laws = conservation_laws(net)
    unbounded = [s for s, u in zip(net.species, net.upper) if not np.isfinite(u)]
    if laws and unbounded:
        print(f"warning: network has conservation law(s) {[list(map(int, v)) for v in laws]} "
              f"but no finite upper bound for {unbounded}; declare implied bounds to enable "
              "boundary gating there", file=sys.stderr)


def cmd_simulate(args) -> int:
    if args.manifest:
        cfg = read_manifest(args.manifest)
    else:
        policy = {POLICY_FLAGS[k]: getattr(args, k) for k in POLICY_FLAGS if getattr(args, k) is not None}
        cfg = ExperimentConfig(
            network=args.network, method=args.method, volume=args.volume,
            x0=_floats(args.x0) if args.x0 else None, t_end=args.t_end, paths=args.paths,
            seed=args.seed, record=args.record, h=args.h, on_negative=args.on_negative,
            policy=policy, n_list=[int(v) for v in _floats(args.n_list)] if args.n_list else None,
            reps=args.reps, workers=args.workers)
        if cfg.network is None:
            raise ConfigError("--network is required (or --manifest)")
    net, _ = cfg.resolve()
    _conservation_warning(net)
    out = Path(args.out) if args.out else default_out()
    try:
        res = run_simulation(cfg)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    for name, text in res["files"].items():
        (out / name).write_text(text)
    write_manifest(out, cfg, "simulate", res["results"])
    for k, v in res["results"].items():
        print(f"{k}: {v}")
    print(f"wrote {', '.join(sorted(res['files']))} to {out}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from . import experiments

    if args.name not in experiments.NAMES:
        raise ConfigError(f"unknown reproduction {args.name!r}; choose from {experiments.NAMES}")
    out = (Path(args.out) if args.out else default_out()) / args.name
    summary = experiments.run(args.name, out, args.scale, args.seed, args.workers)
    (out / "manifest.json").write_text(json.dumps(
        {"command": "reproduce", "name": args.name, "scale": args.scale, "seed": args.seed,
         "version": __version__}, indent=2, sort_keys=True) + "\n")
    for k, ok in summary["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'} {k}")
    if args.check and not summary["passed"]:
        return EXIT_CHECK
    return EXIT_OK


def cmd_rate_study(args) -> int:
    from .coupling import rate_study
    from .network import load_network

    net = load_network(args.network)
    n_list = [int(v) for v in _floats(args.n_list)]
    if any(n < 2 for n in n_list):
        raise ConfigError("n values must be >= 2")
    x0 = _floats(args.x0) if args.x0 else net.defaults.get("x0")
    table = rate_study(net, x0, args.t_end, n_list, args.reps, args.seed)
    out = Path(args.out) if args.out else default_out()
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "rate-study.csv")
    for n, m in table.medians().items():
        print(f"n={n} median scaled sup={m:.4g}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .network import DensityFamily, conservation_laws, load_network

    net = load_network(args.network)
    fam = DensityFamily(net, args.volume or net.defaults.get("volume", 100))
    print(f"network {net.name or args.network}: {net.d} species, {len(net.reactions)} reactions, "
          f"{fam.n_channels} channels")
    for s, lo, up in zip(net.species, net.lower, net.upper):
        print(f"  {s}: [{lo:g}, {up:g}]")
    for v in conservation_laws(net):
        print(f"  conserved: {' + '.join(f'{int(c)}*{s}' for c, s in zip(v, net.species) if c)}")
    _conservation_warning(net)
    print("ok")
    return EXIT_OK


def _floats(text) -> list:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ddjump", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate one path or an ensemble")
    s.add_argument("--network", help="bundled name or YAML path")
    s.add_argument("--method", default="ssa", choices=METHODS)
    s.add_argument("--volume", type=float)
    s.add_argument("--x0", help="comma-separated initial densities")
    s.add_argument("--t-end", type=float)
    s.add_argument("--paths", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--record", default="full", help="full | endpoints | grid:<dt>")
    s.add_argument("--h", type=float, default=1e-3, help="Euler / RK4 step for diffusion and ode")
    s.add_argument("--on-negative", default="fail", choices=("fail", "clamp"))
    s.add_argument("--step", type=float, help="base jump-diffusion step")
    s.add_argument("--step-mid", type=float)
    s.add_argument("--step-near", type=float)
    s.add_argument("--zone-mid", type=float, help="outer zone edge, molecules")
    s.add_argument("--zone-near", type=float, help="inner zone edge, molecules")
    s.add_argument("--n-list", help="volumes for --method rate-study")
    s.add_argument("--reps", type=int, default=10)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--manifest", help="re-run the configuration stored in a manifest.json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reproduce", help="run a bundled figure reproduction")
    r.add_argument("name")
    r.add_argument("--scale", default="desk", choices=("desk", "paper"))
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--check", action="store_true", help="exit 4 if the pipeline's checks fail")
    r.add_argument("--out")
    r.set_defaults(func=cmd_reproduce)

    q = sub.add_parser("rate-study", help="coupled strong-approximation rate study")
    q.add_argument("--network", default="example1")
    q.add_argument("--n-list", default="64,128,256,512,1024")
    q.add_argument("--reps", type=int, default=20)
    q.add_argument("--t-end", type=float, default=10.0)
    q.add_argument("--x0")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")
    q.set_defaults(func=cmd_rate_study)

    v = sub.add_parser("validate", help="check a network config")
    v.add_argument("--network", required=True)
    v.add_argument("--volume", type=float)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    from .coupling import DriverError
    from .ensemble import EnsembleError
    from .network import NetworkError

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, NetworkError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DriverError, EnsembleError, FloatingPointError, RuntimeError, ValueError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
