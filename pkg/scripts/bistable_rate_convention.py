"""Switching fraction of the bistable chain under two rate conventions for 2 S1 -> S1 + S2.

``density``: the bundled network, chain rate V * f(k/V) = k^2 / V.
``mass-action``: combinatorial rate k(k-1) / V with the same fluid limit.
The jump-diffusion approximates the first; the gap to the second is a
finite-volume effect of the model, not of the simulator.

    python scripts/bistable_rate_convention.py --paths 400
"""
import argparse

import numpy as np

from ddjump import DensityFamily, load_network, parse_network
from ddjump.ensemble import simulate_ensemble
from ddjump.experiments import policy_from_defaults
from ddjump.network import CONFIG_DIR


def mass_action_variant():
    text = (CONFIG_DIR / "bistable.yaml").read_text()
    return parse_network(text.replace('{name: c8, increment: [-1, 1, 0], f: "x1^2"}',
                                      "{name: c8, reactants: {S1: 2}, products: {S1: 1, S2: 1}, rate: 2.0}"))


def near_x2(net, method, paths, seed):
    fam = DensityFamily(net, net.defaults["volume"])
    x2 = np.asarray(net.defaults["equilibria"][1])
    ens = simulate_ensemble(fam, net.defaults["x0"], float(net.defaults["t_end"]), paths, seed, method=method,
                            policy=policy_from_defaults(net, fam.n))
    return float(np.mean(np.max(np.abs(ens.endpoints - x2), axis=1) <= 1.0))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args(argv)
    density = load_network("bistable")
    rows = [("chain, density rates", density, "ssa"), ("chain, mass-action rates", mass_action_variant(), "ssa"),
            ("jump-diffusion", density, "jd")]
    for label, net, method in rows:
        print(f"{label:26s} near x2: {near_x2(net, method, a.paths, a.seed):.1%}")


if __name__ == "__main__":
    main()
