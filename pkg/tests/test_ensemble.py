import numpy as np
import pytest

from ddjump import DensityFamily, RngStream, load_network
from ddjump.ensemble import EnsembleError, simulate_ensemble
from ddjump.experiments import u_summary
from ddjump.ssa import simulate_ssa


def test_single_path_matches_direct_call(e1_32):
    ens = simulate_ensemble(e1_32, [0.5], 2.0, 1, seed=4)
    direct = simulate_ssa(e1_32, [0.5], 2.0, RngStream(4, 1), record="endpoints")
    assert np.array_equal(ens.endpoints[0], direct.endpoint)
    assert list(ens.stream_ids) == [1]


@pytest.mark.parametrize("method", ["ssa", "jd", "diffusion"])
def test_worker_count_does_not_change_results(e1_32, method):
    a = simulate_ensemble(e1_32, [0.5], 1.0, 6, seed=9, method=method, workers=1)
    b = simulate_ensemble(e1_32, [0.5], 1.0, 6, seed=9, method=method, workers=3)
    assert np.array_equal(a.stream_ids, b.stream_ids)
    assert np.array_equal(a.endpoints, b.endpoints)


def test_summary_function_and_failures():
    tk = DensityFamily(load_network("togashi-kaneko"), 16)
    ens = simulate_ensemble(tk, [1, 1, 1, 1], 1.0, 4, seed=1, summary_fn=u_summary)
    assert ens.values().shape == (4,)
    e1 = DensityFamily(load_network("example1"), 4)
    dif = simulate_ensemble(e1, [0.25], 5.0, 20, seed=2, method="diffusion", h=0.01)
    assert len(dif.failures) == 20 and 0 < dif.failure_fraction <= 1


def _explode(traj):
    if traj.endpoint[0] >= 0:
        raise RuntimeError("boom")


def test_error_carries_path_index(e1_32):
    with pytest.raises(EnsembleError) as info:
        simulate_ensemble(e1_32, [0.5], 0.1, 3, seed=1, summary_fn=_explode, workers=2)
    assert info.value.path == 1 and "boom" in str(info.value)


def test_bad_arguments(e1_32):
    with pytest.raises(ValueError):
        simulate_ensemble(e1_32, [0.5], 1.0, 0, seed=1)
    with pytest.raises(ValueError):
        simulate_ensemble(e1_32, [0.5], 1.0, 2, seed=1, method="tau-leap")
