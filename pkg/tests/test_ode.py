import numpy as np
import pytest

from ddjump import DensityFamily, conservation_laws, drift, load_network, parse_network
from ddjump.ode import integrate_ode

from conftest import exact_x

CYCLE = """
species: [A, B, C]
reactions:
  - {reactants: {A: 1, B: 1}, products: {B: 2}, rate: 1.0}
  - {reactants: {B: 1}, products: {C: 1}, rate: 0.5}
  - {reactants: {C: 1}, products: {A: 1}, rate: 0.3}
"""


def test_example1_matches_closed_form(e1_32):
    sol = integrate_ode(e1_32, [0.5], 2.0, h=1e-3)
    assert np.max(np.abs(sol.states[:, 0] - exact_x(sol.times, 0.5))) < 1e-8
    assert np.allclose(np.diff(sol.times), 1e-3)


def test_rk4_order(e1_32):
    errs = []
    for h in (0.1, 0.05):
        sol = integrate_ode(e1_32, [0.0], 2.0, h=h, clamp=False)
        errs.append(np.max(np.abs(sol.states[:, 0] - exact_x(sol.times, 0.0))))
    assert 8 <= errs[0] / errs[1] <= 32


def test_equilibrium_is_constant(e1_32):
    sol = integrate_ode(e1_32, [2 / 3], 5.0, h=1e-2)
    assert np.allclose(sol.states, 2 / 3, atol=1e-14)


def test_bistable_converges_to_low_equilibrium(bistable):
    fam = DensityFamily(bistable, 100)
    sol = integrate_ode(fam, [0.1, 0.1, 10], 100.0, h=1e-3)
    x1 = np.array(bistable.defaults["equilibria"][0])
    assert np.max(np.abs(sol.states[-1] - x1)) < 1e-3
    assert np.all(np.abs(drift(fam, sol.states[-1])) < 1e-6)


def test_conservation_law_preserved():
    net = parse_network(CYCLE)
    (v,) = conservation_laws(net)
    sol = integrate_ode(DensityFamily(net, 10), [0.5, 0.2, 0.3], 10.0, h=1e-3, clamp=False)
    total = sol.states @ v
    assert np.max(np.abs(total - total[0])) < 1e-10


def test_clamping_is_logged():
    # outflow at a constant rate drives A below zero
    net = parse_network("species: [A]\nreactions: [{increment: [-1], f: '1'}]")
    sol = integrate_ode(DensityFamily(net, 10), [0.05], 1.0, h=0.01)
    assert np.all(sol.states >= 0)
    assert len(sol.clamp_events) > 0
    labels = sol.trajectory().event_labels()
    assert labels[0] == "start" and labels[-1] == "end" and "ode" in labels
    assert "clamp:0" in sol.trajectory().to_csv()


def test_bad_step_rejected(e1_32):
    with pytest.raises(ValueError):
        integrate_ode(e1_32, [0.5], 1.0, h=0)
