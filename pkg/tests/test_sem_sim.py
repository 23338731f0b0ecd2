import numpy as np
import pytest

from jointdag.graph_core import is_consistent
from jointdag.sem_sim import (
    SemModel,
    TaskBundle,
    covariance,
    family_from_dict,
    family_to_dict,
    generate_family,
    sample_data,
)


def test_generate_family_keep_prob_one_shares_support():
    fam = generate_family(p=4, s=3, K=2, n_identifiable=2,
                          weight_range=(0.5, 2.0), keep_prob=1.0, seed=42)
    support = set(fam.union_support)
    for m in fam.models:
        edges = set(zip(*np.nonzero(m.weights)))
        assert edges == support
        assert np.all(m.noise_vars == 1.0)


def test_generate_family_single_edge_orientation():
    fam = generate_family(p=2, s=1, K=1, n_identifiable=1, keep_prob=1.0, seed=3)
    (i, j), = fam.union_support
    assert fam.shared_order[i] < fam.shared_order[j]
    assert fam.models[0].weights[i, j] != 0


def test_generate_family_consistency_and_support():
    for seed in range(10):
        fam = generate_family(p=8, s=10, K=4, n_identifiable=2, seed=seed)
        assert len(fam.union_support) == 10
        support = set(fam.union_support)
        for k, m in enumerate(fam.models):
            assert is_consistent(m.weights, fam.shared_order)
            assert set(zip(*np.nonzero(m.weights))) <= support
            mags = np.abs(m.weights[m.weights != 0])
            assert np.all((mags >= 0.5) & (mags <= 2.0))
            if k >= 2:
                assert np.all((m.noise_vars >= 0.5) & (m.noise_vars <= 2.0))


def test_generate_family_union_coverage_monte_carlo():
    # union of task supports should equal S_0 except with probability
    # at most s*(1-keep_prob)^K; check the empirical rate over many seeds
    p, s, K, keep = 8, 10, 8, 0.9
    bound = s * (1 - keep) ** K
    misses = 0
    trials = 1000
    for seed in range(trials):
        fam = generate_family(p=p, s=s, K=K, n_identifiable=K, keep_prob=keep,
                              seed=seed)
        union = set()
        for m in fam.models:
            union |= set(zip(*np.nonzero(m.weights)))
        if union != set(fam.union_support):
            misses += 1
    assert misses / trials <= bound + 3 * np.sqrt(bound / trials) + 1e-3


def test_generate_family_rejects_oversized_support():
    with pytest.raises(ValueError):
        generate_family(p=3, s=4, K=1, n_identifiable=1)


def test_covariance_no_edges_unit_variance():
    m = SemModel(np.zeros((3, 3)), np.ones(3), [0, 1, 2])
    assert np.allclose(covariance(m), np.eye(3))


def test_covariance_two_node_chain_by_hand():
    a = 1.3
    W = np.zeros((2, 2))
    W[0, 1] = a
    m = SemModel(W, np.ones(2), [0, 1])
    assert np.allclose(covariance(m), np.array([[1, a], [a, 1 + a * a]]))


def test_covariance_symmetric_positive_definite():
    rng = np.random.default_rng(17)
    for _ in range(100):
        p = int(rng.integers(2, 9))
        s = int(rng.integers(1, p * (p - 1) // 2 + 1))
        fam = generate_family(p=p, s=s, K=1, n_identifiable=1,
                              seed=int(rng.integers(1 << 31)))
        S = covariance(fam.models[0])
        assert np.allclose(S, S.T)
        assert np.linalg.eigvalsh(S).min() > 0


def test_sample_data_single_node_variance():
    m = SemModel(np.zeros((1, 1)), np.array([1.7]), [0])
    fam_like = type("F", (), {"models": [m]})()
    X = sample_data(fam_like, n=100000, seed=11).data[0]
    var = X.var()
    assert abs(var - 1.7) < 3 * 1.7 * np.sqrt(2 / 100000)


def test_sample_data_empirical_covariance_matches_exact():
    # fixed 3-node chain 0 -> 1 -> 2
    W = np.zeros((3, 3))
    W[0, 1], W[1, 2] = 0.8, -0.6
    m = SemModel(W, np.ones(3), [0, 1, 2])
    fam_like = type("F", (), {"models": [m]})()
    X = sample_data(fam_like, n=1000000, seed=1).data[0]
    emp = X.T @ X / X.shape[0]
    exact = covariance(m)
    assert np.max(np.abs(emp - exact)) < 0.01


def test_sample_data_deterministic():
    fam = generate_family(p=5, s=4, K=3, n_identifiable=3, seed=9)
    b1 = sample_data(fam, n=50, seed=4)
    b2 = sample_data(fam, n=50, seed=4)
    for X1, X2 in zip(b1.data, b2.data):
        assert np.array_equal(X1, X2)


def test_sample_data_frobenius_convergence():
    # sample-covariance error scales with ||Sigma||, so draw weights in a
    # range that keeps the model covariance at unit-ish scale
    rng = np.random.default_rng(21)
    for _ in range(5):
        p = int(rng.integers(2, 9))
        fam = generate_family(p=p, s=p, K=1, n_identifiable=1,
                              weight_range=(0.5, 1.0),
                              seed=int(rng.integers(1 << 31)))
        n = 100000
        X = sample_data(fam, n=n, seed=2).data[0]
        emp = X.T @ X / n
        exact = covariance(fam.models[0])
        assert np.linalg.norm(emp - exact) < 5 * p / np.sqrt(n)


def test_family_json_round_trip():
    fam = generate_family(p=6, s=7, K=3, n_identifiable=2, seed=13)
    d = family_to_dict(fam)
    back = family_from_dict(d)
    assert np.array_equal(back.shared_order, fam.shared_order)
    assert back.union_support == fam.union_support
    assert back.n_identifiable == fam.n_identifiable
    for m1, m2 in zip(fam.models, back.models):
        assert np.array_equal(m1.weights, m2.weights)
        assert np.array_equal(m1.noise_vars, m2.noise_vars)


def test_bundle_validation():
    with pytest.raises(ValueError):
        TaskBundle((np.zeros((3, 2)), np.zeros((3, 4))))
    with pytest.raises(ValueError):
        TaskBundle((np.zeros((0, 2)),))
    b = TaskBundle((np.zeros((3, 2)), np.zeros((5, 2))))
    assert b.p == 2 and b.K == 2 and b.n_list == (3, 5)


def test_model_validation():
    with pytest.raises(ValueError):
        SemModel(np.zeros((2, 2)), np.array([1.0, 0.0]), [0, 1])
    W = np.zeros((2, 2))
    W[1, 0] = 1.0
    with pytest.raises(ValueError):
        SemModel(W, np.ones(2), [0, 1])
