import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ddjump import DensityFamily, RngStream, chain_intensity, load_network, parse_network
from ddjump.ensemble import simulate_ensemble
from ddjump.ssa import simulate_ssa
from ddjump.stats import u_statistic

DEATH = "species: [S]\nreactions: [{reactants: {S: 1}, products: {}, rate: 1.0}]"
FLIP = "species: [A, B]\nreactions: [{reactants: {A: 1}, products: {B: 1}, rate: %r}, {reactants: {B: 1}, products: {A: 1}, rate: %r}]"


def test_example1_path_is_lattice_valued_in_box():
    fam = DensityFamily(load_network("example1"), 100)
    tr = simulate_ssa(fam, [0.5], 10, RngStream(1, 1))
    assert np.all((tr.states >= 0) & (tr.states <= 1))
    assert np.allclose(tr.states * 100, np.round(tr.states * 100), atol=1e-9)
    steps = np.abs(np.diff(tr.states[:, 0]))[:-1]
    assert np.allclose(steps, 0.01)
    assert np.all(np.diff(tr.times) > 0)


def test_pure_death_intensity_scaled_waits_are_erlang():
    # S -> 0 at rate 1 per molecule: the wait at state j is Exp(j), so the
    # intensity-weighted sum of waits is Erlang(k, 1)
    k = 5
    fam = DensityFamily(parse_network(DEATH), 1)
    scaled, total = [], []
    for p in range(1, 10_001):
        tr = simulate_ssa(fam, [k], 1e6, RngStream(3, p))
        waits = np.diff(tr.times[:-1])
        assert tr.endpoint[0] == 0 and len(waits) == k
        scaled.append(np.dot(waits, np.arange(k, 0, -1)))
        total.append(tr.times[-2])
    edges = stats.gamma.ppf(np.linspace(0, 1, 21), k)
    obs, _ = np.histogram(scaled, edges)
    assert stats.chisquare(obs).pvalue > 0.01
    # absorption time is the max of k unit exponentials
    assert stats.kstest(total, lambda t: (1 - np.exp(-t)) ** k).pvalue > 0.01


def test_two_state_relaxation():
    a, b, t = 1.5, 0.5, 0.7
    fam = DensityFamily(parse_network(FLIP % (a, b)), 1)
    ens = simulate_ensemble(fam, [1, 0], t, 100_000, 9)
    p_hat = np.mean(ens.endpoints[:, 0] == 1)
    p = b / (a + b) + a / (a + b) * np.exp(-(a + b) * t)
    se = np.sqrt(p * (1 - p) / 100_000)
    assert abs(p_hat - p) < 3 * se


def test_mean_holding_time():
    fam = DensityFamily(load_network("example1"), 10)
    k = 5
    rate = sum(chain_intensity(fam, [k]).values())
    first = np.array([simulate_ssa(fam, [k / 10], 50, RngStream(4, p)).times[1] for p in range(1, 5001)])
    se = first.std(ddof=1) / np.sqrt(first.size)
    assert abs(first.mean() - 1 / rate) < 3 * se


@given(st.integers(0, 2**32), st.sampled_from(["togashi-kaneko", "bistable", "example1"]))
def test_lattice_invariance(seed, name):
    net = load_network(name)
    n = 20
    fam = DensityFamily(net, n)
    x0 = np.round(np.asarray(net.defaults["x0"], float) * n) / n
    tr = simulate_ssa(fam, x0, 5.0, RngStream(seed, 1))
    k = tr.states * n
    assert np.allclose(k, np.round(k), atol=1e-9)
    assert np.all(tr.states >= np.array(net.lower)) and np.all(tr.states <= np.array(net.upper))
    assert tr.stats["box_exits"] == 0


def test_same_stream_same_path(e1_32):
    a = simulate_ssa(e1_32, [0.5], 5, RngStream(11, 3))
    b = simulate_ssa(e1_32, [0.5], 5, RngStream(11, 3))
    c = simulate_ssa(e1_32, [0.5], 5, RngStream(11, 4))
    assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)
    assert not np.array_equal(a.times, c.times)


def test_grid_rows_are_left_limits_of_full_path(e1_32):
    full = simulate_ssa(e1_32, [0.5], 5, RngStream(2, 2))
    grid = simulate_ssa(e1_32, [0.5], 5, RngStream(2, 2), record=("grid", 0.25))
    gt = grid.times[:-1]
    assert np.allclose(gt, np.arange(0, 5, 0.25))
    assert np.array_equal(grid.states[:-1], full.at(gt))
    assert np.array_equal(grid.endpoint, full.endpoint)


def test_zero_rate_network_holds_constant():
    net = parse_network(FLIP % (0.0, 0.0))
    tr = simulate_ssa(DensityFamily(net, 10), [0.3, 0.7], 4.0, RngStream(0, 1))
    assert tr.event_labels() == ["start", "end"]
    assert np.array_equal(tr.endpoint, [0.3, 0.7])


def test_off_lattice_start_rejected(e1_32):
    with pytest.raises(ValueError, match="lattice"):
        simulate_ssa(e1_32, [0.01], 1, 0)


def test_tk_pattern_switch_in_half_the_runs(tk_32):
    switched = 0
    for p in range(1, 101):
        tr = simulate_ssa(tk_32, [3, 0, 1, 0], 600, RngStream(21, p), record=("grid", 0.5))
        switched += bool(np.any(u_statistic(tr.states) < 0))
    assert switched >= 50


def test_csv_events(e1_32):
    tr = simulate_ssa(e1_32, [0.5], 0.5, RngStream(1, 1))
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,x_1,event"
    assert lines[1].endswith(",start") and lines[-1].endswith(",end")
    assert all(l.rsplit(",", 1)[1].startswith("jump:") for l in lines[2:-1])
