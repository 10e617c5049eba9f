"""Reaction networks as density dependent families of Markov chains.

A :class:`Network` is the user-facing model (species, bounds, reactions).  A
:class:`DensityFamily` pairs it with the volume ``n`` and precompiles the flat
arrays consumed by the numba kernels: one *channel* per distinct increment
``l`` (reactions sharing an increment are merged here, never in the model),
each channel's density rate ``f_l`` stored as a sum of monomials.
"""
from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from . import _kernels as K

SNAP_FACTOR = 1e-9

CONFIG_DIR = Path(__file__).parent / "configs"


class NetworkError(ValueError):
    """Raised for malformed network configurations."""


# --------------------------------------------------------------------------
# polynomials
# --------------------------------------------------------------------------

Monomials = dict  # exponent tuple -> coefficient


def _poly_mul(a: Monomials, b: Monomials) -> Monomials:
    out: Monomials = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(i + j for i, j in zip(ea, eb))
            out[e] = out.get(e, 0.0) + ca * cb
    return out


def _poly_add(a: Monomials, b: Monomials, sign: float = 1.0) -> Monomials:
    out = dict(a)
    for e, c in b.items():
        out[e] = out.get(e, 0.0) + sign * c
    return out


def parse_polynomial(text: str, d: int) -> Monomials:
    """Parse a polynomial in ``x1..xd`` into ``{exponents: coefficient}``.

    Accepts ``+``, ``-``, ``*``, numeric literals and integer powers written
    as ``^`` or ``**``.

    >>> parse_polynomial("2 - 2*x1", 1)
    {(0,): 2.0, (1,): -2.0}
    """
    src = str(text).replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise NetworkError(f"cannot parse polynomial {text!r}: {exc.msg}") from None
    zero = (0,) * d

    def walk(node) -> Monomials:
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return {zero: float(node.value)}
        if isinstance(node, ast.Name):
            m = re.fullmatch(r"x(\d+)", node.id)
            if not m or not 1 <= int(m.group(1)) <= d:
                raise NetworkError(f"unknown variable {node.id!r} in {text!r} (d={d})")
            e = [0] * d
            e[int(m.group(1)) - 1] = 1
            return {tuple(e): 1.0}
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = walk(node.operand)
            s = -1.0 if isinstance(node.op, ast.USub) else 1.0
            return {e: s * c for e, c in inner.items()}
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Add):
                return _poly_add(walk(node.left), walk(node.right))
            if isinstance(node.op, ast.Sub):
                return _poly_add(walk(node.left), walk(node.right), -1.0)
            if isinstance(node.op, ast.Mult):
                return _poly_mul(walk(node.left), walk(node.right))
            if isinstance(node.op, ast.Pow):
                if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)
                        and node.right.value >= 0):
                    raise NetworkError(f"only nonnegative integer powers allowed in {text!r}")
                base, out = walk(node.left), {zero: 1.0}
                for _ in range(node.right.value):
                    out = _poly_mul(out, base)
                return out
        raise NetworkError(f"unsupported expression in polynomial {text!r}")

    poly = walk(tree)
    return {e: c for e, c in poly.items() if c != 0.0}


def format_polynomial(poly: Monomials) -> str:
    terms = []
    for e, c in sorted(poly.items()):
        factors = [repr(c)] + [f"x{i + 1}" for i, k in enumerate(e) for _ in range(k)]
        terms.append("*".join(factors))
    return " + ".join(terms) if terms else "0"


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Reaction:
    """One reaction ``sum c_i S_i -> sum c'_i S_i``.

    With ``density_rate`` set the reaction is given directly by its increment
    and rate polynomial ``f`` (times ``rate``); ``reactants`` then only encode
    the increment (``reactants`` zero, ``products`` equal to ``l`` shifted).
    """

    reactants: tuple[int, ...]
    products: tuple[int, ...]
    rate: float
    density_rate: Monomials | None = None
    name: str = ""
    explicit_increment: tuple[int, ...] | None = None

    @property
    def increment(self) -> tuple[int, ...]:
        if self.explicit_increment is not None:
            return self.explicit_increment
        return tuple(p - r for p, r in zip(self.products, self.reactants))

    @property
    def order(self) -> int:
        return sum(self.reactants)

    def density_monomials(self) -> Monomials:
        """Leading mass-action term ``rate / prod c_i! * prod x_i^c_i`` or the explicit rate."""
        if self.density_rate is not None:
            return {e: self.rate * c for e, c in self.density_rate.items()}
        denom = math.prod(math.factorial(c) for c in self.reactants)
        return {tuple(self.reactants): self.rate / denom}


@dataclass(frozen=True)
class Network:
    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    name: str = ""
    defaults: Mapping = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        d = len(self.species)
        if d < 1:
            raise NetworkError("network needs at least one species")
        if len(set(self.species)) != d:
            raise NetworkError("duplicate species names")
        if len(self.lower) != d or len(self.upper) != d:
            raise NetworkError("bounds must have one entry per species")
        for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if not lo < hi:
                raise NetworkError(f"bounds for species {self.species[i]!r}: lower must be < upper")
        for j, r in enumerate(self.reactions):
            if len(r.increment) != d or len(r.reactants) != d or len(r.products) != d:
                raise NetworkError(f"reactions[{j}]: dimension mismatch (expected {d})")
            if not any(r.increment):
                raise NetworkError(f"reactions[{j}]: increment is zero")
            if not r.rate >= 0 or not math.isfinite(r.rate):
                raise NetworkError(f"reactions[{j}]: rate must be a nonnegative finite number")

    @property
    def d(self) -> int:
        return len(self.species)

    @property
    def increments(self) -> list[tuple[int, ...]]:
        return [r.increment for r in self.reactions]

    def with_bounds(self, lower=None, upper=None) -> "Network":
        return Network(self.species, self.reactions,
                       tuple(self.lower if lower is None else lower),
                       tuple(self.upper if upper is None else upper),
                       self.name, self.defaults)

    def with_rates(self, rates: Sequence[float]) -> "Network":
        rx = tuple(Reaction(r.reactants, r.products, float(k), r.density_rate, r.name,
                            r.explicit_increment) for r, k in zip(self.reactions, rates))
        return Network(self.species, rx, self.lower, self.upper, self.name, self.defaults)


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------

def _as_bound(value, where: str) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if isinstance(value, str) and value.strip().lower() in ("-inf", "-infinity"):
        return -math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise NetworkError(f"{where}: bound must be a number or 'inf', got {value!r}") from None


def _complex(spec, species, where) -> tuple[int, ...]:
    if spec is None:
        spec = {}
    if not isinstance(spec, Mapping):
        raise NetworkError(f"{where}: expected a mapping species -> coefficient")
    out = [0] * len(species)
    for name, coeff in spec.items():
        if name not in species:
            raise NetworkError(f"{where}: unknown species {name!r}")
        if not isinstance(coeff, int) or coeff < 0:
            raise NetworkError(f"{where}: coefficient of {name!r} must be a nonnegative integer")
        out[species.index(name)] = coeff
    return tuple(out)


def parse_network(config_text: str) -> Network:
    """Build a :class:`Network` from YAML/JSON text.

    Raises:
        NetworkError: on schema violations; the message names the field.
    """
    try:
        doc = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise NetworkError(f"config is not valid YAML/JSON: {exc}") from None
    if not isinstance(doc, Mapping):
        raise NetworkError("config must be a mapping with keys 'species', 'reactions'")
    for key in ("species", "reactions"):
        if key not in doc:
            raise NetworkError(f"missing required field {key!r}")
    species = doc["species"]
    if not isinstance(species, list) or not all(isinstance(s, str) for s in species):
        raise NetworkError("field 'species' must be a list of strings")
    d = len(species)

    bounds = doc.get("bounds")
    lower, upper = [0.0] * d, [math.inf] * d
    if bounds is not None:
        if isinstance(bounds, Mapping):
            items = []
            for name, b in bounds.items():
                if name not in species:
                    raise NetworkError(f"bounds: unknown species {name!r}")
                items.append((species.index(name), b, f"bounds.{name}"))
        elif isinstance(bounds, list) and len(bounds) == d:
            items = [(i, b, f"bounds[{i}]") for i, b in enumerate(bounds)]
        else:
            raise NetworkError("field 'bounds' must map species to {lower, upper} or list one per species")
        for i, b, where in items:
            if not isinstance(b, Mapping):
                raise NetworkError(f"{where}: expected {{lower, upper}}")
            lower[i] = _as_bound(b.get("lower", 0.0), f"{where}.lower")
            upper[i] = _as_bound(b.get("upper", "inf"), f"{where}.upper")

    rx_docs = doc["reactions"]
    if not isinstance(rx_docs, list):
        raise NetworkError("field 'reactions' must be a list")
    reactions = []
    for j, r in enumerate(rx_docs):
        where = f"reactions[{j}]"
        if not isinstance(r, Mapping):
            raise NetworkError(f"{where}: expected a mapping")
        name = str(r.get("name", ""))
        if "increment" in r:
            inc = r["increment"]
            if not isinstance(inc, list) or not all(isinstance(v, int) for v in inc):
                raise NetworkError(f"{where}.increment: expected a list of integers")
            if len(inc) != d:
                raise NetworkError(f"{where}.increment: dimension mismatch, got {len(inc)} entries for {d} species")
            if "f" not in r:
                raise NetworkError(f"{where}: explicit reaction needs field 'f'")
            scale = r.get("rate_scale", 1.0)
            if not isinstance(scale, (int, float)) or scale < 0:
                raise NetworkError(f"{where}.rate_scale: must be a nonnegative number")
            poly = parse_polynomial(r["f"], d)
            reactions.append(Reaction((0,) * d, (0,) * d, float(scale), poly, name, tuple(inc)))
        else:
            if "rate" not in r:
                raise NetworkError(f"{where}: missing field 'rate'")
            rate = r["rate"]
            if not isinstance(rate, (int, float)) or isinstance(rate, bool):
                raise NetworkError(f"{where}.rate: must be a number")
            if rate < 0:
                raise NetworkError(f"{where}.rate: negative rate constant {rate}")
            reac = _complex(r.get("reactants"), species, f"{where}.reactants")
            prod = _complex(r.get("products"), species, f"{where}.products")
            reactions.append(Reaction(reac, prod, float(rate), None, name))

    net = Network(tuple(species), tuple(reactions), tuple(lower), tuple(upper),
                  str(doc.get("name", "")), dict(doc.get("defaults") or {}))
    _check_explicit_nonnegative(net)
    return net


def _check_explicit_nonnegative(net: Network, samples: int = 2000) -> None:
    rng = np.random.default_rng(0)
    lo = np.array(net.lower, float)
    hi = np.array(net.upper, float)
    lo_f = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi - 10.0, -10.0))
    hi_f = np.where(np.isfinite(hi), hi, lo_f + 10.0)
    pts = [lo_f, hi_f]
    pts += list(lo_f + (hi_f - lo_f) * rng.random((samples, net.d)))
    pts = np.array(pts)
    for j, r in enumerate(net.reactions):
        if r.density_rate is None:
            continue
        vals = _eval_monomials(r.density_rate, pts)
        if vals.min() < -1e-12:
            raise NetworkError(f"reactions[{j}].f is negative inside the bounds box "
                               f"(min {vals.min():.3g} at {pts[vals.argmin()].tolist()})")


def _eval_monomials(poly: Monomials, pts: np.ndarray) -> np.ndarray:
    out = np.zeros(len(pts))
    for e, c in poly.items():
        out += c * np.prod(pts ** np.array(e), axis=1)
    return out


def bundled_networks() -> list[str]:
    return sorted(p.stem for p in CONFIG_DIR.glob("*.yaml"))


def load_network(name_or_path: str | Path) -> Network:
    """Load a bundled network by name (``example1``...) or a config file path."""
    p = Path(name_or_path)
    if not p.exists():
        cand = CONFIG_DIR / f"{name_or_path}.yaml"
        if cand.exists():
            p = cand
        else:
            raise FileNotFoundError(f"no network file or bundled network named {name_or_path!r}")
    return parse_network(p.read_text())


# --------------------------------------------------------------------------
# density family
# --------------------------------------------------------------------------

class DensityFamily:
    """A network at volume ``n``: rate functions, lattice ``E^[n]`` and gating.

    Attributes of interest to kernels (all read-only numpy arrays):
    ``L`` channel increments, ``term_ptr``/``coef``/``factors`` channel rate
    monomials (sparse factor rows), ``rx_*`` per-reaction chain intensity data.
    """

    def __init__(self, network: Network, n: float):
        if not n >= 1:
            raise ValueError(f"volume n must be >= 1, got {n}")
        self.network = network
        self.n = float(n)
        self.d = network.d
        self.lower = np.array(network.lower, dtype=np.float64)
        self.upper = np.array(network.upper, dtype=np.float64)
        self.snap_tol = SNAP_FACTOR / self.n

        incs: list[tuple[int, ...]] = []
        polys: list[Monomials] = []
        self.reaction_channel = np.empty(len(network.reactions), dtype=np.int64)
        for j, r in enumerate(network.reactions):
            l = r.increment
            if l not in incs:
                incs.append(l)
                polys.append({})
            c = incs.index(l)
            self.reaction_channel[j] = c
            polys[c] = _poly_add(polys[c], r.density_monomials())
        self.increments = incs
        self.channel_polys = polys
        self.L = np.array(incs, dtype=np.int64).reshape(len(incs), self.d)
        self.term_ptr, self.coef, self.factors = _pack(polys, self.d)

        # per-reaction data for the exact chain
        R = len(network.reactions)
        self.rx_L = np.array([r.increment for r in network.reactions], dtype=np.int64).reshape(R, self.d)
        self.rx_explicit = np.array([r.density_rate is not None for r in network.reactions], dtype=np.bool_)
        self.rx_c = np.array([r.reactants for r in network.reactions], dtype=np.int64).reshape(R, self.d)
        self.rx_pref = np.array([r.rate / self.n ** (r.order - 1) if r.density_rate is None else r.rate
                                 for r in network.reactions], dtype=np.float64)
        self.rx_term_ptr, self.rx_coef, self.rx_factors = _pack(
            [r.density_rate if r.density_rate is not None else {} for r in network.reactions], self.d)
        for a in (self.L, self.term_ptr, self.coef, self.factors, self.rx_L, self.rx_c,
                  self.rx_pref, self.rx_explicit, self.rx_term_ptr, self.rx_coef, self.rx_factors,
                  self.lower, self.upper):
            a.setflags(write=False)

    def __repr__(self):
        name = self.network.name or "network"
        return f"DensityFamily({name}, d={self.d}, channels={len(self.increments)}, n={self.n:g})"

    @property
    def n_channels(self) -> int:
        return len(self.increments)

    def channel_index(self, l) -> int:
        return self.increments.index(tuple(int(v) for v in l))

    # -- geometry ---------------------------------------------------------

    def snap(self, x) -> np.ndarray:
        x = np.array(x, dtype=np.float64)
        K.snap_inplace(x, self.lower, self.upper, self.snap_tol)
        return x

    def in_box(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lower - self.snap_tol) and np.all(x <= self.upper + self.snap_tol))

    def check_in_box(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"state must have {self.d} coordinates, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"state {x.tolist()} is not finite")
        if not self.in_box(x):
            raise ValueError(f"state {x.tolist()} outside bounds box "
                             f"[{self.lower.tolist()}, {self.upper.tolist()}]")
        return self.snap(x)

    def to_lattice(self, x) -> np.ndarray:
        """Integer counts ``n*x``; raises if ``x`` is off the lattice of ``E^[n]``."""
        x = self.check_in_box(x)
        k = np.rint(x * self.n)
        if np.any(np.abs(k - x * self.n) > 1e-6):
            raise ValueError(f"state {x.tolist()} is not on the lattice (1/{self.n:g})Z^{self.d}")
        return k.astype(np.int64)

    def rate_bounds(self, caps: Mapping | None = None) -> np.ndarray:
        """Upper bounds ``sup_E f_l`` per channel, used to size driver horizons.

        Channels whose rate is unbounded on the box need an entry in ``caps``
        (channel index -> cap).
        """
        caps = dict(caps or {})
        out = np.empty(self.n_channels)
        finite = np.isfinite(self.lower) & np.isfinite(self.upper)
        for c, poly in enumerate(self.channel_polys):
            if c in caps:
                out[c] = caps[c]
                continue
            vars_used = [i for e in poly for i, k in enumerate(e) if k > 0]
            if any(not finite[i] for i in vars_used):
                raise ValueError(f"rate of channel {c} (increment {self.increments[c]}) is unbounded "
                                 "on the box; supply a cap")
            out[c] = _sup_on_box(poly, self.lower, self.upper)
        return out


def _pack(polys: Sequence[Monomials], d: int):
    ptr = np.zeros(len(polys) + 1, dtype=np.int64)
    coefs, rows = [], []
    for c, poly in enumerate(polys):
        for e, v in sorted(poly.items()):
            coefs.append(v)
            rows.append([(i, p) for i, p in enumerate(e) if p])
        ptr[c + 1] = len(coefs)
    # sparse factor rows: [count, species_1, power_1, species_2, power_2, ...]
    width = 1 + 2 * max((len(r) for r in rows), default=0)
    fac = np.zeros((len(rows), width), dtype=np.int64)
    for t, r in enumerate(rows):
        fac[t, 0] = len(r)
        for q, (i, p) in enumerate(r):
            fac[t, 1 + 2 * q] = i
            fac[t, 2 + 2 * q] = p
    return ptr, np.array(coefs, dtype=np.float64), fac


def _sup_on_box(poly: Monomials, lower, upper) -> float:
    if not poly:
        return 0.0
    d = len(lower)
    pts_1d = [np.linspace(lo, hi, 65 if d <= 2 else 17) for lo, hi in zip(lower, upper)]
    grid = np.stack(np.meshgrid(*pts_1d, indexing="ij"), -1).reshape(-1, d)
    vals = _eval_monomials(poly, grid)
    # grid maximum with a safety margin; exhausted horizons are detected at run time anyway
    return max(float(vals.max()) * 1.02, 0.0)


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def density_rates(family: DensityFamily, x) -> dict[tuple[int, ...], float]:
    """``f_l(x)`` for each distinct increment ``l`` (clamped at 0)."""
    x = family.check_in_box(x)
    out = np.empty(family.n_channels)
    K.channel_rates(x, family.lower, family.upper, family.term_ptr, family.coef, family.factors, out)
    return {l: float(v) for l, v in zip(family.increments, out)}


def chain_intensity(family: DensityFamily, k) -> dict[tuple[int, ...], float]:
    """Exact chain rates ``q_{k,k+l}`` at integer state ``k``."""
    k = np.asarray(k, dtype=np.int64)
    family.check_in_box(k / family.n)
    props = np.empty(len(family.network.reactions))
    K.reaction_propensities(k, family.n, family.lower, family.upper, family.rx_explicit,
                            family.rx_c, family.rx_pref, family.rx_term_ptr, family.rx_coef,
                            family.rx_factors, props)
    out = {l: 0.0 for l in family.increments}
    for j, q in enumerate(props):
        out[family.increments[family.reaction_channel[j]]] += float(q)
    return out


def drift(family: DensityFamily, x) -> np.ndarray:
    """``F(x) = sum_l l f_l(x)``."""
    f = density_rates(family, x)
    return sum((np.array(l, float) * v for l, v in f.items()), np.zeros(family.d))


def ab(family: DensityFamily, l, x) -> int:
    """1 if increment ``l`` moves some boundary-resident coordinate of ``x`` off its endpoint."""
    x = family.snap(np.asarray(x, dtype=np.float64))
    return int(K.ab_one(np.asarray(l, dtype=np.int64), x, family.lower, family.upper,
                        family.n, family.snap_tol))


def conservation_laws(network: Network) -> list[np.ndarray]:
    """Integer basis of the left null space of the stoichiometric matrix."""
    import sympy

    S = sympy.Matrix([list(l) for l in network.increments]).T  # d x R
    basis = S.T.nullspace()
    out = []
    for v in basis:
        den = math.lcm(*[Fraction(str(c)).denominator for c in v])
        w = np.array([int(c * den) for c in v], dtype=np.int64)
        g = math.gcd(*[int(abs(c)) for c in w]) or 1
        w //= g
        if w[np.flatnonzero(w)[0]] < 0:
            w = -w
        out.append(w)
    return out


def implied_upper_bounds(network: Network, x0) -> np.ndarray:
    """Finite upper bounds implied by nonnegative conservation laws and ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    upper = np.array(network.upper, dtype=float)
    lower = np.array(network.lower, dtype=float)
    for v in conservation_laws(network):
        if np.all(v >= 0) and np.all(lower[v > 0] >= 0):
            total = float(v @ x0)
            for i in np.flatnonzero(v > 0):
                upper[i] = min(upper[i], total / v[i])
    return upper
