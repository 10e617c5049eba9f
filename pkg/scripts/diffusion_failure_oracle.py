"""Independent estimate of the boundary-failure fraction of the Example 1 diffusion.

Vectorised Euler-Maruyama over all paths with plain numpy, sharing no code
with the package.  A path fails at the first step whose end state makes a
channel rate negative (x < 0 kills the death rate x, x > 1 the birth rate 2(1 - x)).

    python scripts/diffusion_failure_oracle.py --n 32 --x0 0.05 --paths 4000
"""
import argparse

import numpy as np


def failure_fraction(n: float, x0: float, t_end: float, h: float, paths: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    x = np.full(paths, x0)
    alive = np.ones(paths, bool)
    for _ in range(int(round(t_end / h))):
        birth, death = 2 * (1 - x), x
        dw = rng.standard_normal((2, paths)) * np.sqrt(h)
        step = (birth - death) * h + (np.sqrt(np.maximum(birth, 0) / n) * dw[0]
                                      - np.sqrt(np.maximum(death, 0) / n) * dw[1])
        x = np.where(alive, x + step, x)
        alive &= (x >= 0) & (x <= 1)
    return 1 - alive.mean()


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=float, default=32)
    p.add_argument("--x0", type=float, default=0.05)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--paths", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args(argv)
    frac = failure_fraction(a.n, a.x0, a.t_end, a.h, a.paths, a.seed)
    se = np.sqrt(frac * (1 - frac) / a.paths)
    print(f"n={a.n:g} x0={a.x0:g} T={a.t_end:g} h={a.h:g}: {frac:.2%} of {a.paths} paths failed (se {se:.2%})")


if __name__ == "__main__":
    main()
