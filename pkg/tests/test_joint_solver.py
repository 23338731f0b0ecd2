import numpy as np
import pytest

from jointdag.graph_core import permutation_from_mask
from jointdag.joint_solver import (
    EstimationResult,
    Hyperparams,
    NonFinite,
    default_lambda,
    extract_estimate,
    fit_joint,
    gradient_f,
    nearest_order,
    smooth_objective,
    theory_lambda,
)
from jointdag.metrics import order_success
from jointdag.sem_sim import TaskBundle, generate_family, sample_data

from oracles import max_rel_error


def _bundle(p=4, K=2, n=100, seed=0, **kw):
    fam = generate_family(p=p, s=max(p - 1, 1), K=K, n_identifiable=K,
                          seed=seed, **kw)
    return fam, sample_data(fam, n=n, seed=seed + 1)


def _base_term(bundle):
    return sum(0.5 / X.shape[0] * np.sum(X * X) for X in bundle.data)


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        Hyperparams(rho=0.0)
    with pytest.raises(ValueError):
        Hyperparams(lam=-1.0)
    with pytest.raises(ValueError):
        Hyperparams(inner_iters=0)
    with pytest.raises(ValueError):
        Hyperparams(h_variant="exp")
    with pytest.raises(ValueError):
        Hyperparams.from_dict({"nonsense": 1})
    hp = Hyperparams.from_dict({"rho": 2.0, "lam": 0.1})
    assert hp.rho == 2.0
    assert Hyperparams.from_dict(hp.as_dict()) == hp


def test_lambda_rules():
    assert theory_lambda(16, 100, 0.1) == pytest.approx(
        0.1 * np.sqrt(16 * np.log(16) / 100))
    assert default_lambda(16, 100, 4, 0.1) == pytest.approx(
        theory_lambda(16, 100, 0.1) / 2)


def test_smooth_objective_ones_mask():
    fam, bundle = _bundle(p=3, K=2)
    p = 3
    G = np.zeros((2, p, p))
    T = 1.0 - np.eye(p)
    hyper = Hyperparams(lam=0.1, rho=1.3)
    val = smooth_objective(G, T, 0.0, 0.0, bundle, hyper)
    # the p diagonal ones-targets stay unmatched
    assert val == pytest.approx(_base_term(bundle) + 1.3 * p, rel=1e-12)


def test_smooth_objective_zero_mask():
    fam, bundle = _bundle(p=4, K=2)
    G = np.zeros((2, 4, 4))
    T = np.zeros((4, 4))
    hyper = Hyperparams(lam=0.1, rho=0.7)
    val = smooth_objective(G, T, 0.0, 5.0, bundle, hyper)
    assert val == pytest.approx(_base_term(bundle) + 0.7 * 16, rel=1e-12)


def test_smooth_objective_alpha_linearity():
    rng = np.random.default_rng(3)
    fam, bundle = _bundle(p=4, K=2)
    G = rng.normal(size=(2, 4, 4))
    T = rng.uniform(0, 1, size=(4, 4))
    hyper = Hyperparams(lam=0.1)
    v1 = smooth_objective(G, T, 0.4, 1.0, bundle, hyper)
    v2 = smooth_objective(G, T, 0.4, 2.0, bundle, hyper)
    from jointdag.graph_core import h_expm
    assert v2 - v1 == pytest.approx(h_expm(T) ** 2, rel=1e-9)


def test_gradient_at_origin():
    fam, bundle = _bundle(p=4, K=3)
    hyper = Hyperparams(lam=0.1, rho=1.0)
    dG, dT = gradient_f(np.zeros((3, 4, 4)), np.zeros((4, 4)), 0.0, 0.0,
                        bundle, hyper)
    assert np.all(dG == 0.0)
    off = ~np.eye(4, dtype=bool)
    assert np.allclose(dT[off], -2.0, atol=1e-12)


@pytest.mark.parametrize("variant", ["expm", "poly"])
def test_gradient_matches_finite_differences(variant):
    rng = np.random.default_rng(11)
    fam, bundle = _bundle(p=5, K=2, n=60)
    hyper = Hyperparams(lam=0.1, rho=0.8, h_variant=variant)
    G = rng.normal(scale=0.5, size=(2, 5, 5))
    T = rng.uniform(-0.8, 0.8, size=(5, 5))
    beta, alpha = 0.7, 0.3
    dG, dT = gradient_f(G, T, beta, alpha, bundle, hyper)

    def fG(Gflat):
        return smooth_objective(Gflat.reshape(G.shape), T, beta, alpha, bundle, hyper)

    def fT(Tflat):
        return smooth_objective(G, Tflat.reshape(T.shape), beta, alpha, bundle, hyper)

    from oracles import central_difference
    fd_G = central_difference(fG, G.ravel()).reshape(G.shape)
    fd_T = central_difference(fT, T.ravel()).reshape(T.shape)
    assert max_rel_error(dG, fd_G) < 1e-5
    assert max_rel_error(dT, fd_T) < 1e-5


def test_gradient_k1_masked_least_squares():
    # with the mask fixed to a full-order mask, the weight gradient is the
    # plain least-squares gradient restricted to the mask support
    from jointdag.graph_core import mask_from_permutation

    fam, bundle = _bundle(p=4, K=1, n=80)
    T = mask_from_permutation(fam.shared_order)
    rng = np.random.default_rng(5)
    G = rng.normal(size=(1, 4, 4)) * T
    hyper = Hyperparams(lam=0.1, rho=1.0)
    dG, _ = gradient_f(G, T, 0.0, 0.0, bundle, hyper)
    X = bundle.data[0]
    n = X.shape[0]
    ls_grad = X.T @ (X @ (G[0] * T) - X) / n
    assert np.allclose(dG[0], ls_grad * T, atol=1e-10)


def test_fit_joint_recovers_strong_signal():
    fam = generate_family(p=4, s=4, K=2, n_identifiable=2, keep_prob=1.0,
                          weight_range=(0.8, 2.0), seed=3)
    bundle = sample_data(fam, n=500, seed=4)
    res = fit_joint(bundle, Hyperparams(lam=theory_lambda(4, 500), seed=5))
    assert res.converged
    truths = [m.weights for m in fam.models]
    assert order_success(res.order, truths)
    est_support = {tuple(e) for e in zip(*np.nonzero(res.per_task_adjacency[0]))}
    assert est_support == set(fam.union_support)


def test_fit_joint_huge_lambda_zeroes_weights():
    fam, bundle = _bundle(p=4, K=2, n=200, seed=9)
    res = fit_joint(bundle, Hyperparams(lam=50.0, seed=1))
    assert np.all(res.weights == 0.0)
    # the mask still settles on a full-order mask
    assert sorted(res.mask.sum(axis=1)) == [0, 1, 2, 3]


def test_fit_joint_zero_outer_iters():
    fam, bundle = _bundle(p=3, K=2, n=50, seed=2)
    res = fit_joint(bundle, Hyperparams(lam=0.1, outer_iters=0, seed=7))
    assert not res.converged
    assert res.order is None
    assert np.all(res.weights == 0.0)
    assert len(res.diagnostics["objective"]) == 0


def test_fit_joint_deterministic():
    fam, bundle = _bundle(p=5, K=2, n=120, seed=6)
    hyper = Hyperparams(lam=0.08, seed=21, outer_iters=8, inner_iters=80)
    r1 = fit_joint(bundle, hyper)
    r2 = fit_joint(bundle, hyper)
    assert np.array_equal(r1.weights, r2.weights)
    assert np.array_equal(r1.mask_continuous, r2.mask_continuous)
    assert np.array_equal(r1.diagnostics["objective"], r2.diagnostics["objective"])
    assert r1.objective == r2.objective


def test_fit_joint_nonfinite_guard():
    fam, bundle = _bundle(p=6, K=2, n=80, seed=8)
    hyper = Hyperparams(lam=0.1, optimizer="gd", step=10.0, seed=3,
                        outer_iters=3, inner_iters=50)
    with pytest.raises(NonFinite):
        fit_joint(bundle, hyper)


def test_fit_joint_inner_objective_monotone_gd():
    # plain gradient steps with a small step size keep the composite
    # objective non-increasing within each outer round
    fam, bundle = _bundle(p=6, K=2, n=100, seed=12)
    hyper = Hyperparams(lam=0.05, optimizer="gd", step=1e-4, seed=4,
                        outer_iters=4, inner_iters=60)
    res = fit_joint(bundle, hyper, inner_diagnostics=True)
    inner = res.diagnostics["inner_objective"]
    per_round = inner.reshape(4, 60)
    for segment in per_round:
        assert np.all(np.diff(segment) <= 1e-9)


def test_fit_joint_diagnostics_shapes():
    fam, bundle = _bundle(p=4, K=2, n=60, seed=13)
    res = fit_joint(bundle, Hyperparams(lam=0.1, outer_iters=5,
                                        inner_iters=40, seed=2))
    for key in ("objective", "h", "beta", "alpha"):
        assert len(res.diagnostics[key]) == 5
    assert res.diagnostics["alpha"][0] == pytest.approx(0.1)
    # beta accumulates tau * h of the previous rounds
    assert res.diagnostics["beta"][1] == pytest.approx(
        10.0 * res.diagnostics["h"][0])


def test_nearest_order_on_exact_mask():
    from jointdag.graph_core import mask_from_permutation

    rng = np.random.default_rng(17)
    for p in (2, 5, 8):
        order = rng.permutation(p)
        assert np.array_equal(nearest_order(mask_from_permutation(order)), order)


def test_extract_estimate_round_trip():
    from jointdag.graph_core import mask_from_permutation

    fam = generate_family(p=5, s=6, K=2, n_identifiable=2, keep_prob=1.0,
                          weight_range=(0.8, 2.0), seed=19)
    T = mask_from_permutation(fam.shared_order)
    G = fam.weight_stack()
    order, weights = extract_estimate(G, T, edge_threshold=0.3)
    assert order_success(order, [m.weights for m in fam.models])
    assert np.array_equal(weights != 0, G != 0)
    # omega = 0 keeps the exact nonzero pattern of the masked stack
    _, w0 = extract_estimate(G, T, edge_threshold=0.0)
    assert np.array_equal(w0, G * T)


def test_extract_estimate_propagates_rounding_errors():
    from jointdag.graph_core import RoundingAmbiguous

    T = np.full((3, 3), 0.5)
    np.fill_diagonal(T, 0.0)
    with pytest.raises(RoundingAmbiguous):
        extract_estimate(np.zeros((1, 3, 3)), T, edge_threshold=0.1)


def test_extract_estimate_refit_reduces_error():
    fam = generate_family(p=5, s=6, K=2, n_identifiable=2, keep_prob=1.0,
                          weight_range=(0.8, 2.0), seed=23)
    bundle = sample_data(fam, n=2000, seed=24)
    res = fit_joint(bundle, Hyperparams(lam=theory_lambda(5, 2000), seed=25))
    assert res.converged
    from jointdag.graph_core import mask_from_permutation
    from jointdag.metrics import frob_error

    T = mask_from_permutation(res.order)
    G = res.weights.copy()
    # place raw (unmasked) weights so both paths share the same support
    _, plain = extract_estimate(G, T, edge_threshold=0.3)
    _, refit = extract_estimate(G, T, edge_threshold=0.3, bundle=bundle,
                                refit=True)
    truth = fam.weight_stack()
    assert frob_error(refit, truth) <= frob_error(plain, truth) + 1e-9
