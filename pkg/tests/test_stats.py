import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from ddjump import Trajectory
from ddjump import _kernels as K
from ddjump.stats import (DensityEstimate, bimodality_report, heat_histogram, is_bimodal, kde,
                          ks_distance, sup_trajectory_distance, u_statistic)

samples = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=40)


def test_u_statistic():
    assert u_statistic([1, 0, 1, 0]) == 2
    assert u_statistic([0, 1, 0, 1]) == -2
    assert u_statistic([0.25, 0.25, 0.25, 0.25]) == 0
    assert np.array_equal(u_statistic(np.array([[1, 0, 0, 0], [0, 0, 0, 1]])), [1, -1])
    with pytest.raises(ValueError, match="dimension"):
        u_statistic([1, 2, 3])


def test_kde_matches_normal_density():
    x = np.random.default_rng(0).standard_normal(100_000)
    est = kde(x)
    assert abs(est.integral() - 1) < 1e-3
    assert np.max(np.abs(est.density - sps.norm.pdf(est.grid))) < 0.02


def test_kde_two_points_gives_two_bumps():
    est = kde([-1.0, 1.0], bandwidth=0.2)
    assert abs(est.integral() - 1) < 1e-3
    peaks = est.grid[est.local_maxima()]
    assert len(peaks) == 2 and np.allclose(peaks, [-1, 1], atol=0.02)
    assert is_bimodal(est)


def test_kde_errors():
    with pytest.raises(ValueError, match="degenerate"):
        kde([0.5] * 10)
    with pytest.raises(ValueError):
        kde([1.0])
    with pytest.raises(ValueError):
        kde([0.0, np.nan])
    with pytest.raises(ValueError):
        kde([0.0, 1.0], bandwidth=-1)


def test_kde_csv_roundtrip(tmp_path):
    est = kde([0.0, 1.0, 3.0], points=16)
    text = est.to_csv(tmp_path / "d.csv")
    rows = text.splitlines()
    assert rows[0] == "u,density" and len(rows) == 17
    back = np.loadtxt(tmp_path / "d.csv", delimiter=",", skiprows=1)
    assert np.array_equal(back[:, 0], est.grid) and np.array_equal(back[:, 1], est.density)


def test_bimodality_rule():
    g = np.linspace(-2, 2, 401)
    one = DensityEstimate(g, np.exp(-g**2), 0.1)
    assert not is_bimodal(one)
    two = DensityEstimate(g, np.exp(-8 * (g - 1) ** 2) + np.exp(-8 * (g + 1) ** 2), 0.1)
    rep = bimodality_report(two)
    assert rep["bimodal"] and rep["dip_ratio"] < 0.1
    same_side = DensityEstimate(g, np.exp(-40 * (g - 1.5) ** 2) + np.exp(-40 * (g - 0.5) ** 2), 0.1)
    assert not is_bimodal(same_side)
    assert is_bimodal(same_side, require_opposite_signs=False)


def test_ks_basic_values():
    a = np.linspace(0, 1, 1001)
    assert ks_distance(a, a) == 0
    rng = np.random.default_rng(1)
    u, v = rng.uniform(0, 1, 20_000), rng.uniform(0.5, 1.5, 20_000)
    assert abs(ks_distance(u, v) - 0.5) < 0.02
    with pytest.raises(ValueError):
        ks_distance([], [1.0])


@given(samples, samples, samples)
def test_ks_is_a_pseudometric(a, b, c):
    dab, dba = ks_distance(a, b), ks_distance(b, a)
    assert dab == pytest.approx(dba)
    assert 0 <= dab <= 1
    assert ks_distance(a, c) <= dab + ks_distance(b, c) + 1e-12


def _path(times, values, kinds):
    m = len(times)
    return Trajectory(np.asarray(times, float), np.asarray(values, float)[:, None],
                      np.asarray(kinds, np.int64), np.full(m, -1), np.zeros(m))


def _step_path(values, rng):
    times = np.sort(rng.uniform(0.01, 0.99, len(values) - 1))
    kinds = [K.START] + [K.JUMP] * len(times) + [K.END]
    return _path(np.concatenate([[0.0], times, [1.0]]), list(values) + [values[-1]], kinds)


@given(st.lists(st.integers(-5, 5), min_size=2, max_size=6), st.lists(st.integers(-5, 5), min_size=2, max_size=6),
       st.lists(st.integers(-5, 5), min_size=2, max_size=6), st.integers(0, 1000))
def test_sup_distance_is_a_pseudometric(va, vb, vc, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_step_path(v, rng) for v in (va, vb, vc))
    grid = np.linspace(0, 1, 257)
    assert sup_trajectory_distance(a, a, grid) == 0
    dab = sup_trajectory_distance(a, b, grid)
    assert dab == sup_trajectory_distance(b, a, grid)
    assert sup_trajectory_distance(a, c, grid) <= dab + sup_trajectory_distance(b, c, grid)


def test_sup_distance_uses_left_limits():
    a = _path([0.0, 0.5, 1.0], [0.0, 1.0, 1.0], [K.START, K.JUMP, K.END])
    b = _path([0.0, 1.0], [0.0, 0.0], [K.START, K.END])
    assert sup_trajectory_distance(a, b, [0.0, 0.5]) == 0
    assert sup_trajectory_distance(a, b, [0.0, 0.5, 0.75]) == 1
    with pytest.raises(ValueError):
        sup_trajectory_distance(a, b, [0.0, 2.0])


def test_heat_histogram():
    h = heat_histogram(np.array([[0.2, 0.3, 9.0]]), dims=(0, 1), bins=4)
    assert h.counts.sum() == 1 and h.counts.shape == (4, 4)
    pts = np.random.default_rng(2).uniform(0, 1, (500, 3))
    h = heat_histogram(pts, dims=(0, 2), bins=5, range_=[[0, 1], [0, 1]])
    assert h.counts.sum() == 500 and h.dims == (0, 2)
    rows = h.to_csv().splitlines()
    assert rows[0] == "bin_i,bin_j,count" and len(rows) == 26
    assert heat_histogram(np.zeros((0, 2)), bins=3, range_=[[0, 1], [0, 1]]).counts.sum() == 0
    with pytest.raises(ValueError):
        heat_histogram(np.zeros(4))
