import numpy as np
import pytest

from ddjump import DensityFamily, RngStream, load_network, parse_network
from ddjump.diffusion import simulate_diffusion
from ddjump.ensemble import simulate_ensemble
from ddjump.ode import integrate_ode

CONST = """
species: [X]
bounds: {X: {lower: -inf, upper: inf}}
reactions:
  - {increment: [1], f: "1"}
  - {increment: [-1], f: "0.5"}
"""


def test_large_volume_tracks_fluid(example1):
    fam = DensityFamily(example1, 10**6)
    ode = integrate_ode(fam, [0.5], 1.0, h=1e-3)
    close = 0
    for p in range(1, 101):
        out = simulate_diffusion(fam, [0.5], 1.0, 1e-3, RngStream(5, p))
        assert out.completed
        close += np.max(np.abs(out.trajectory.states[:, 0] - ode.at(out.trajectory.times)[:, 0])) < 0.01
    assert close >= 95


def test_failure_stops_path_and_reports_negative_rate(example1):
    fam = DensityFamily(example1, 2)
    failures = 0
    for p in range(1, 51):
        out = simulate_diffusion(fam, [0.05], 10.0, 1e-2, RngStream(6, p))
        if out.completed:
            continue
        failures += 1
        f = out.failure
        tr = out.trajectory
        assert out.status == "boundary_failure"
        assert tr.t_end == pytest.approx(f.t) and tr.event_labels()[-1].startswith("failure:")
        assert f.value < 0 and f.increment == fam.increments[f.channel]
        assert "failure" in tr.to_csv().splitlines()[-1]
    assert failures > 10


def test_clamp_mode_stays_in_box_and_logs(example1):
    fam = DensityFamily(example1, 2)
    clamps = 0
    for p in range(1, 21):
        out = simulate_diffusion(fam, [0.05], 5.0, 1e-2, RngStream(6, p), on_negative="clamp")
        assert out.completed
        assert np.all((out.trajectory.states >= 0) & (out.trajectory.states <= 1))
        clamps += out.trajectory.stats["clamps"]
    assert clamps > 0


def test_noise_free_limit_is_euler():
    fam = DensityFamily(parse_network(CONST), 1e300)
    h = 0.01
    out = simulate_diffusion(fam, [0.2], 1.0, h, RngStream(1, 1))
    x, t = [0.2], 0.0
    while t < 1.0:
        tn = t + h
        if tn > 1.0 or 1.0 - tn <= 1e-12:
            tn = 1.0
        tau = tn - t
        x.append(x[-1] + (0.0 + 1 * (1.0 * tau) + -1 * (0.5 * tau)))
        t = tn
    assert np.array_equal(out.trajectory.states[:, 0], np.array(x))


def test_one_normal_per_channel_in_order(e1_32):
    h = 0.01
    out = simulate_diffusion(e1_32, [0.5], 0.03, h, RngStream(8, 2))
    g = RngStream(8, 2).generator()
    x = 0.5
    for k in range(3):
        fp, fm = 2 - 2 * x, x
        dx = 0.0
        for l, f in ((1, fp), (-1, fm)):
            dx += l * (f * h + np.sqrt(f) / np.sqrt(32.0) * np.sqrt(h) * g.standard_normal())
        x = x + dx
        assert out.trajectory.states[k + 1, 0] == x


def test_weak_consistency_with_chain(example1):
    fam = DensityFamily(example1, 10**4)
    N = 10**4
    a = simulate_ensemble(fam, [0.5], 1.0, N, 31, method="diffusion", h=1e-3).endpoints[:, 0]
    b = simulate_ensemble(fam, [0.5], 1.0, N, 32, method="ssa").endpoints[:, 0]
    se_mean = np.sqrt(a.var(ddof=1) / N + b.var(ddof=1) / N)
    assert abs(a.mean() - b.mean()) < 3 * se_mean
    se_var = np.sqrt(2 / (N - 1)) * np.hypot(a.var(ddof=1), b.var(ddof=1))
    assert abs(a.var(ddof=1) - b.var(ddof=1)) < 3 * se_var


def test_rejects_bad_arguments(e1_32):
    with pytest.raises(ValueError):
        simulate_diffusion(e1_32, [0.5], 1.0, 0.0, 0)
    with pytest.raises(ValueError):
        simulate_diffusion(e1_32, [0.5], 1.0, 0.01, 0, on_negative="reflect")
