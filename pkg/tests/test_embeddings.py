import numpy as np
import pytest

from netkucb import EmbeddingState, EmpiricalNetworkKernel, KernelSpec
from netkucb.kernels import eval_kernel, kernel_matrix

RBF = KernelSpec("rbf", bandwidth=1.0)


def brute_force_sums(spec, xs_v, xs_w):
    """Full double sums the incremental state should reproduce."""
    Kvv = kernel_matrix(spec, xs_v, xs_v)
    Kww = kernel_matrix(spec, xs_w, xs_w)
    Kvw = kernel_matrix(spec, xs_v, xs_w)
    return float(Kvv.sum()), float(Kww.sum()), float(Kvw.sum())


def brute_force_mmd(spec, xs_v, xs_w):
    svv, sww, svw = brute_force_sums(spec, xs_v, xs_w)
    t, tp = len(xs_v), len(xs_w)
    return np.sqrt(max(0.0, svv / t**2 + sww / tp**2 - 2 * svw / (t * tp)))


def test_single_observation_cross_sum():
    state = EmbeddingState(2, RBF, dim=3)
    rng = np.random.default_rng(0)
    xv, xw = rng.standard_normal(3), rng.standard_normal(3)
    state.observe(0, xv)
    state.observe(1, xw)
    assert state._cross[(0, 1)] == pytest.approx(
        eval_kernel(RBF, xv, xw), abs=1e-12
    )


def test_counts_increment():
    state = EmbeddingState(3, RBF, dim=2)
    rng = np.random.default_rng(1)
    for i in range(5):
        state.observe(0, rng.standard_normal(2))
        assert state.count(0) == i + 1
    assert state.count(1) == 0


def test_incremental_sums_match_double_sum_oracle():
    rng = np.random.default_rng(2)
    state = EmbeddingState(2, RBF, dim=3)
    xs = {0: [], 1: []}
    for _ in range(100):
        v = int(rng.integers(2))
        x = rng.standard_normal(3)
        state.observe(v, x)
        xs[v].append(x)
    svv, sww, svw = brute_force_sums(
        RBF, np.asarray(xs[0]), np.asarray(xs[1])
    )
    assert state._self_sums[0] == pytest.approx(svv, abs=1e-9)
    assert state._self_sums[1] == pytest.approx(sww, abs=1e-9)
    assert state._cross[(0, 1)] == pytest.approx(svw, abs=1e-9)
    assert state.empirical_mmd(0, 1) == pytest.approx(
        brute_force_mmd(RBF, np.asarray(xs[0]), np.asarray(xs[1])), abs=1e-9
    )


def test_identical_histories_zero_mmd():
    rng = np.random.default_rng(3)
    state = EmbeddingState(2, RBF, dim=2)
    for _ in range(20):
        x = rng.standard_normal(2)
        state.observe(0, x)
        state.observe(1, x)
    assert state.empirical_mmd(0, 1) == pytest.approx(0.0, abs=1e-7)
    assert state.empirical_network_kernel(0, 1, sigma_z=1.0) == pytest.approx(
        1.0, abs=1e-7
    )


def test_singleton_closed_form():
    rng = np.random.default_rng(4)
    a, b = rng.standard_normal(3), rng.standard_normal(3)
    state = EmbeddingState(2, RBF, dim=3)
    state.observe(0, a)
    state.observe(1, b)
    want = np.sqrt(2.0 - 2.0 * eval_kernel(RBF, a, b))
    assert state.empirical_mmd(0, 1) == pytest.approx(want, abs=1e-12)


def test_mmd_symmetric():
    rng = np.random.default_rng(5)
    state = EmbeddingState(2, RBF, dim=2)
    for _ in range(7):
        state.observe(0, rng.standard_normal(2))
    for _ in range(4):
        state.observe(1, rng.standard_normal(2))
    assert state.empirical_mmd(0, 1) == state.empirical_mmd(1, 0)


def test_zero_observations_error():
    state = EmbeddingState(2, RBF, dim=2)
    state.observe(0, np.zeros(2))
    with pytest.raises(ValueError):
        state.empirical_mmd(0, 1)


def test_network_kernel_bounds_and_diagonal():
    rng = np.random.default_rng(6)
    V = 4
    state = EmbeddingState(V, RBF, dim=2)
    for _ in range(15):
        for v in range(V):
            state.observe(v, rng.standard_normal(2) + v)
    K = state.pairwise_matrix(sigma_z=1.0)
    assert np.array_equal(K, K.T)
    assert np.all(np.diag(K) == 1.0)
    assert np.all((K > 0) & (K <= 1))
    with pytest.raises(ValueError):
        state.empirical_network_kernel(0, 1, sigma_z=0.0)


def test_registered_pairs_restriction():
    rng = np.random.default_rng(7)
    state = EmbeddingState(3, RBF, dim=2, pairs=[(0, 1)])
    xs = {v: [] for v in range(3)}
    for _ in range(12):
        for v in range(3):
            x = rng.standard_normal(2)
            state.observe(v, x)
            xs[v].append(x)
    assert (0, 2) not in state._cross
    # unregistered pairs still answer, via the on-demand double sum
    want = brute_force_mmd(RBF, np.asarray(xs[0]), np.asarray(xs[2]))
    assert state.empirical_mmd(0, 2) == pytest.approx(want, abs=1e-9)


def test_convergence_trend_identical_distributions():
    # same sampling distribution: average similarity rises with sample count
    sims = {10: [], 100: []}
    for seed in range(10):
        rng = np.random.default_rng(seed)
        state = EmbeddingState(2, RBF, dim=3)
        for t in range(1, 101):
            state.observe(0, rng.standard_normal(3) * 0.5)
            state.observe(1, rng.standard_normal(3) * 0.5)
            if t in sims:
                sims[t].append(
                    state.empirical_network_kernel(0, 1, sigma_z=1.0)
                )
    assert np.mean(sims[100]) > np.mean(sims[10])


def test_handle_caches_and_invalidates():
    rng = np.random.default_rng(8)
    state = EmbeddingState(2, RBF, dim=2)
    state.observe(0, rng.standard_normal(2))
    state.observe(1, rng.standard_normal(2))
    handle = EmpiricalNetworkKernel(state, sigma_z=1.0)
    assert handle.value(0, 0) == 1.0
    first = handle.value(0, 1)
    state.observe(0, rng.standard_normal(2))
    assert handle.value(0, 1) == first  # cached until invalidated
    handle.invalidate()
    assert handle.value(0, 1) != first
    row = handle.row(np.array([0, 1]), 1)
    assert row[1] == 1.0 and row[0] == handle.value(0, 1)


def test_squared_exponent_mode():
    rng = np.random.default_rng(9)
    state = EmbeddingState(2, RBF, dim=2)
    state.observe(0, rng.standard_normal(2))
    state.observe(1, rng.standard_normal(2))
    mmd = state.empirical_mmd(0, 1)
    assert state.empirical_network_kernel(0, 1, 1.0, squared=True) == \
        pytest.approx(np.exp(-mmd**2 / 2.0), abs=1e-12)
    assert state.empirical_network_kernel(0, 1, 1.0) == \
        pytest.approx(np.exp(-mmd / 2.0), abs=1e-12)
