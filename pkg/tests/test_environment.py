import numpy as np
import pytest

from netkucb import (
    AugmentedContext,
    ComposedKernel,
    Graph,
    GroundTruth,
    KernelSpec,
    build_gram,
    gen_network_contexts,
    instant_regret,
    kernel_matrix,
    make_ground_truth,
    numerical_rank,
    reward,
)
from netkucb.environment import derived_rng, sample_unit_ball, sample_unit_sphere

RBF = KernelSpec("rbf", bandwidth=1.0)
LIN = KernelSpec("linear")
CK = ComposedKernel(RBF, RBF)


def pool(rng, n=4, dim=2):
    return sample_unit_sphere(rng, n, dim)


def test_single_anchor_norm_exact():
    rng = np.random.default_rng(0)
    gt = make_ground_truth(CK, m=1, B=2.5, seed_rng=rng, z_pool=pool(rng),
                           dim_x=3)
    # |alpha| * sqrt(K(c,c)) = B, and K(c,c) = 1 for rbf/rbf
    assert abs(gt.alpha[0]) == pytest.approx(2.5, abs=1e-12)
    anchor_value = gt.value(gt.anchors_z[0], gt.anchors_x[0])
    assert anchor_value == pytest.approx(gt.alpha[0], abs=1e-12)


def test_norm_matches_quadratic_form_oracle():
    rng = np.random.default_rng(1)
    for m in (3, 17, 50):
        gt = make_ground_truth(CK, m=m, B=1.0, seed_rng=rng,
                               z_pool=pool(rng), dim_x=4)
        pts = [
            AugmentedContext(z=gt.anchors_z[j], x=gt.anchors_x[j])
            for j in range(m)
        ]
        G = build_gram(CK, pts)
        assert float(np.sqrt(gt.alpha @ G @ gt.alpha)) == pytest.approx(
            1.0, abs=1e-10
        )
        assert gt.rkhs_norm() == pytest.approx(1.0, abs=1e-10)


def test_values_match_expansion_oracle():
    rng = np.random.default_rng(2)
    gt = make_ground_truth(CK, m=6, B=1.0, seed_rng=rng, z_pool=pool(rng),
                           dim_x=3)
    z = pool(rng)[0]
    arms = sample_unit_ball(rng, 5, 3)
    got = gt.values(z, arms)
    from netkucb.kernels import eval_composed

    for i in range(5):
        want = sum(
            gt.alpha[j] * eval_composed(
                CK,
                AugmentedContext(z=z, x=arms[i]),
                AugmentedContext(z=gt.anchors_z[j], x=gt.anchors_x[j]),
            )
            for j in range(6)
        )
        assert got[i] == pytest.approx(want, abs=1e-10)


def test_reward_noise_free():
    rng = np.random.default_rng(3)
    gt = make_ground_truth(CK, m=4, B=1.0, seed_rng=rng, z_pool=pool(rng),
                           dim_x=2)
    p = AugmentedContext(z=pool(rng)[0], x=sample_unit_ball(rng, 1, 2)[0])
    want = gt.value(p.z, p.x)
    assert reward(gt, p, R=0.0, rng=rng) == want


def test_reward_deterministic_stream():
    rng1 = np.random.default_rng(4)
    gt = make_ground_truth(CK, m=4, B=1.0, seed_rng=rng1, z_pool=pool(rng1),
                           dim_x=2)
    p = AugmentedContext(z=pool(rng1)[0], x=np.zeros(2))
    a = [reward(gt, p, 0.5, derived_rng(9, 0, 4, 1, t)) for t in range(10)]
    b = [reward(gt, p, 0.5, derived_rng(9, 0, 4, 1, t)) for t in range(10)]
    assert a == b
    c = [reward(gt, p, 0.5, derived_rng(9, 1, 4, 1, t)) for t in range(10)]
    assert a != c


def test_reward_law_of_large_numbers():
    rng = np.random.default_rng(5)
    gt = make_ground_truth(CK, m=4, B=1.0, seed_rng=rng, z_pool=pool(rng),
                           dim_x=2)
    p = AugmentedContext(z=pool(rng)[0], x=np.zeros(2))
    R = 0.3
    n = 100_000
    noise_rng = np.random.default_rng(6)
    draws = gt.value(p.z, p.x) + R * noise_rng.standard_normal(n)
    assert abs(np.mean(draws) - gt.value(p.z, p.x)) < 4 * R / np.sqrt(n)


def test_instant_regret_zero_at_argmax():
    rng = np.random.default_rng(7)
    gt = make_ground_truth(CK, m=5, B=1.0, seed_rng=rng, z_pool=pool(rng),
                           dim_x=3)
    z = pool(rng)[1]
    arms = sample_unit_ball(rng, 8, 3)
    best = int(np.argmax(gt.values(z, arms)))
    assert instant_regret(gt, z, arms, best) == 0.0


def test_instant_regret_constructed_gap():
    # linear anchor construction with known values 0.3 and 0.7
    ck = ComposedKernel(LIN, LIN)
    gt = GroundTruth(
        anchors_z=np.array([[1.0]]),
        anchors_x=np.array([[1.0, 0.0]]),
        alpha=np.array([1.0]),
        ck=ck,
        B=1.0,
    )
    arms = np.array([[0.3, 0.0], [0.7, 0.0]])
    z = np.array([1.0])
    assert gt.values(z, arms) == pytest.approx([0.3, 0.7])
    assert instant_regret(gt, z, arms, 0) == pytest.approx(0.4, abs=1e-12)
    assert instant_regret(gt, z, arms, 1) == 0.0


def test_instant_regret_replay_consistency():
    rng = np.random.default_rng(8)
    gt = make_ground_truth(CK, m=5, B=1.0, seed_rng=rng, z_pool=pool(rng),
                           dim_x=3)
    z = pool(rng)[2]
    total = 0.0
    replay = []
    for _ in range(20):
        arms = sample_unit_ball(rng, 4, 3)
        chosen = int(rng.integers(4))
        total += instant_regret(gt, z, arms, chosen)
        replay.append((arms, chosen))
    manual = sum(
        float(np.max(gt.values(z, a)) - gt.values(z, a)[c]) for a, c in replay
    )
    assert total == pytest.approx(manual, abs=1e-10)


def test_instant_regret_nonnegative_and_validates():
    rng = np.random.default_rng(9)
    gt = make_ground_truth(CK, m=3, B=1.0, seed_rng=rng, z_pool=pool(rng),
                           dim_x=2)
    with pytest.raises(ValueError):
        instant_regret(gt, pool(rng)[0], np.empty((0, 2)), 0)


# -- network context models ----------------------------------------------------


def test_identical_contexts_unit_kernel():
    zs, clusters = gen_network_contexts("identical", V=5, dim=3,
                                        seed_rng=np.random.default_rng(10))
    assert clusters is None
    Z = np.asarray(zs)
    for spec in (LIN, RBF):
        Kz = kernel_matrix(spec, Z, Z)
        assert np.allclose(Kz, 1.0)
        assert numerical_rank(Kz) == 1


def test_clustered_contexts_rank_bounded():
    g = Graph(8, [(i, i + 1) for i in range(7)])
    zs, clusters = gen_network_contexts(
        "clustered", V=8, dim=4, graph=g, gamma=2,
        seed_rng=np.random.default_rng(11),
    )
    n_clusters = len(set(clusters.tolist()))
    Kz = kernel_matrix(LIN, np.asarray(zs), np.asarray(zs))
    assert numerical_rank(Kz) <= n_clusters
    for v, w in ((0, 1), (3, 4)):
        if clusters[v] == clusters[w]:
            assert np.array_equal(zs[v], zs[w])


def test_clustered_members_not_gamma_adjacent():
    g = Graph(8, [(i, i + 1) for i in range(7)])
    from netkucb.graphs import graph_power

    gpow = graph_power(g, 2)
    _, clusters = gen_network_contexts(
        "clustered", V=8, dim=4, graph=g, gamma=2,
        seed_rng=np.random.default_rng(12),
    )
    for v in range(8):
        for w in range(v + 1, 8):
            if clusters[v] == clusters[w]:
                assert not gpow.has_edge(v, w)


def test_random_unit_contexts_on_sphere():
    zs, _ = gen_network_contexts("random-unit", V=6, dim=5,
                                 seed_rng=np.random.default_rng(13))
    for z in zs:
        assert abs(np.linalg.norm(z) - 1.0) < 1e-12


def test_unknown_model_rejected():
    with pytest.raises(ValueError):
        gen_network_contexts("banded", V=3, dim=2,
                             seed_rng=np.random.default_rng(0))


def test_unit_ball_sampling_inside():
    pts = sample_unit_ball(np.random.default_rng(14), 200, 6)
    assert np.all(np.linalg.norm(pts, axis=1) <= 1.0 + 1e-12)


def test_derived_rng_reproducible_and_distinct():
    a = derived_rng(42, 0, 3, 1, 2).random(4)
    b = derived_rng(42, 0, 3, 1, 2).random(4)
    c = derived_rng(42, 0, 3, 1, 3).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
