import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddjump import (DensityFamily, NetworkError, ab, chain_intensity, conservation_laws,
                    density_rates, drift, load_network, parse_network)
from ddjump.network import bundled_networks, implied_upper_bounds, parse_polynomial

AB_BA = """
species: [A, B]
reactions:
  - {reactants: {A: 1}, products: {B: 1}, rate: 1.0}
  - {reactants: {B: 1}, products: {A: 1}, rate: 2.0}
"""


def test_bundled_configs_load():
    assert set(bundled_networks()) >= {"example1", "togashi-kaneko", "bistable"}
    e1, tk = load_network("example1"), load_network("togashi-kaneko")
    assert e1.d == 1 and e1.lower == (0.0,) and e1.upper == (1.0,)
    assert tk.d == 4 and len(tk.reactions) == 12
    assert all(u == math.inf for u in tk.upper) and all(lo == 0 for lo in tk.lower)
    assert tk.species == ("S1", "S2", "S3", "S4")


@pytest.mark.parametrize("text, field", [
    ("reactions: []", "species"),
    ("species: [A]", "reactions"),
    ("species: [A]\nreactions: [{reactants: {A: 1}, products: {}, rate: -1}]", "negative rate"),
    ("species: [A]\nreactions: [{increment: [1, 0], f: '1'}]", "dimension mismatch"),
    ("species: [A]\nreactions: [{reactants: {B: 1}, products: {}, rate: 1}]", "B"),
    ("species: [A]\nbounds: {A: {lower: 1, upper: 0}}\nreactions: [{reactants: {A: 1}, products: {}, rate: 1}]", "lower"),
    ("species: [A]\nreactions: [{reactants: {A: 1}, products: {A: 1}, rate: 1}]", "increment"),
    ("species: [A]\nreactions: [{reactants: {A: 1}, products: {}}]", "rate"),
])
def test_schema_errors_name_the_field(text, field):
    with pytest.raises(NetworkError, match=field):
        parse_network(text)


def test_explicit_rate_must_be_nonnegative_on_box():
    with pytest.raises(NetworkError, match="negative"):
        parse_network("species: [A]\nbounds: {A: {lower: 0, upper: 1}}\n"
                      "reactions: [{increment: [1], f: '1 - 2*x1'}]")


def test_species_order_preserved():
    net = parse_network("species: [Z, A, M]\nreactions: [{reactants: {M: 1}, products: {Z: 1}, rate: 1}]")
    assert net.species == ("Z", "A", "M")
    assert net.reactions[0].increment == (1, 0, -1)


def test_example1_rates(e1_32):
    assert density_rates(e1_32, [0.5]) == {(1,): pytest.approx(1.0), (-1,): pytest.approx(0.5)}


def test_tk_loop_rate_vanishes_when_factor_is_zero(tk_32):
    f = density_rates(tk_32, [3, 0, 1, 0])
    assert f[(-1, 1, 0, 0)] == 0.0
    assert f[(1, 0, 0, 0)] == pytest.approx(1 / 256)


def test_chain_intensity_mass_action():
    net = parse_network("species: [S1, S2]\nreactions: [{reactants: {S1: 2}, products: {S1: 1, S2: 1}, rate: 1}]")
    q = chain_intensity(DensityFamily(net, 100), [10, 0])
    assert q[(-1, 1)] == pytest.approx(10 * 9 / (2 * 100))


def test_chain_intensity_tk_and_decay(tk):
    fam = DensityFamily(tk, 32)
    assert chain_intensity(fam, [96, 0, 32, 0])[(-1, 1, 0, 0)] == 0.0
    for V in (1, 32, 1000):
        q = chain_intensity(DensityFamily(tk, V), [5, 0, 0, 0])
        assert q[(-1, 0, 0, 0)] == pytest.approx(5 / 256)


def test_explicit_rate_chain_intensity(e1_32):
    q = chain_intensity(e1_32, [8])
    assert q[(1,)] == pytest.approx(32 * 2 * (1 - 8 / 32))
    assert q[(-1,)] == pytest.approx(8)


def test_drift_example1(e1_32):
    for x in (0.0, 0.3, 2 / 3, 1.0):
        assert drift(e1_32, [x])[0] == pytest.approx(2 - 3 * x, abs=1e-14)


def test_bistable_equilibria_have_small_drift(bistable):
    fam = DensityFamily(bistable, 100)
    for eq in bistable.defaults["equilibria"]:
        assert np.all(np.abs(drift(fam, eq)) < 1e-2)


def test_ab_cases(tk_32, e1_32):
    x = [3, 0, 1, 0]
    assert ab(tk_32, (0, 1, 0, 0), x) == 1
    assert ab(tk_32, (-1, 1, 0, 0), x) == 1
    assert ab(tk_32, (1, 0, 0, 0), x) == 0
    assert all(ab(tk_32, l, [0.5, 1, 2, 3]) == 0 for l in tk_32.increments)
    assert ab(e1_32, (-1,), [1.0]) == 1
    assert ab(e1_32, (1,), [1.0]) == 0
    assert ab(e1_32, (1,), [0.0]) == 1
    assert ab(e1_32, (-1,), [0.0]) == 0


@given(st.floats(0, 1), st.sampled_from([(1,), (-1,)]))
def test_ab_idempotent_under_snap(x, l):
    fam = DensityFamily(load_network("example1"), 32)
    assert ab(fam, l, fam.snap(np.array([x]))) == ab(fam, l, [x])


def test_ab_snap_tolerance(e1_32):
    tol = e1_32.snap_tol
    assert ab(e1_32, (1,), [0.5 * tol]) == 1
    assert ab(e1_32, (1,), [2 * tol]) == 0


def test_conservation_laws():
    laws = conservation_laws(parse_network(AB_BA))
    assert len(laws) == 1 and list(laws[0]) == [1, 1]
    assert conservation_laws(load_network("togashi-kaneko")) == []
    assert conservation_laws(load_network("example1")) == []


def test_implied_upper_bounds():
    up = implied_upper_bounds(parse_network(AB_BA), [0.3, 0.2])
    assert np.allclose(up, [0.5, 0.5])


@given(st.lists(st.floats(0, 20), min_size=4, max_size=4))
def test_drift_is_sum_of_weighted_rates(x):
    fam = DensityFamily(load_network("togashi-kaneko"), 32)
    f = density_rates(fam, x)
    assert all(v >= 0 for v in f.values())
    expect = sum(np.array(l) * v for l, v in f.items())
    assert np.allclose(drift(fam, x), expect, rtol=1e-12, atol=1e-12)


@given(st.lists(st.integers(0, 30), min_size=3, max_size=3), st.sampled_from([7, 13, 50]))
def test_chain_intensity_approaches_density_rate(k, m):
    # x = k/m fixed, n = r*m growing: |q/n - f| <= C/n
    net = parse_network("species: [A, B, C]\nreactions:\n"
                        "  - {reactants: {A: 2}, products: {A: 1, B: 1}, rate: 2.0}\n"
                        "  - {reactants: {C: 1, B: 1}, products: {A: 2}, rate: 0.8}\n"
                        "  - {reactants: {C: 1}, products: {}, rate: 1.0}\n")
    x = np.array(k) / m
    errs = []
    for r in (1, 4, 16):
        n = r * m
        fam = DensityFamily(net, n)
        q = chain_intensity(fam, np.array(k) * r)
        f = density_rates(fam, x)
        errs.append(max(abs(q[l] / n - f[l]) for l in f) * n)
    # only 2A -> A + B (constant 2) is inexact: n |q/n - f| = 2 * x1 / 2
    assert max(errs) <= x[0] + 1e-9


@given(st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)),
                       st.integers(-5, 5).filter(bool), max_size=5))
def test_parse_polynomial_round_trip(poly):
    from ddjump.network import format_polynomial
    text = format_polynomial({e: float(c) for e, c in poly.items()})
    back = parse_polynomial(text, 2)
    assert {e: c for e, c in back.items() if c} == {e: float(c) for e, c in poly.items()}


def test_rate_bounds(e1_32, tk_32):
    fbar = e1_32.rate_bounds()
    assert fbar[e1_32.channel_index((1,))] >= 2.0
    assert fbar[e1_32.channel_index((-1,))] >= 1.0
    with pytest.raises(ValueError, match="unbounded"):
        tk_32.rate_bounds()


def test_family_rejects_off_lattice(e1_32):
    with pytest.raises(ValueError, match="lattice"):
        e1_32.to_lattice([0.013])
    with pytest.raises(ValueError):
        e1_32.check_in_box([1.5])


@given(st.lists(st.integers(0, 40), min_size=3, max_size=3))
def test_bistable_chain_is_exactly_density_dependent(k):
    # heterodimer and explicit rates give q = n f(k/n) with no finite-volume correction
    fam = DensityFamily(load_network("bistable"), 100)
    q = chain_intensity(fam, np.array(k))
    f = density_rates(fam, np.array(k) / 100)
    assert all(q[l] == pytest.approx(100 * f[l], rel=1e-12, abs=1e-12) for l in f)
