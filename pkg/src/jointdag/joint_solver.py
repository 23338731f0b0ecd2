"""Continuous joint estimator: one shared mask matrix times K weight matrices.

The smooth part couples the per-task squared losses with a pull of the mask
toward the all-ones matrix, a dual term beta*h(T), and a quadratic penalty
alpha*h(T)^2 on the acyclicity function.  Each inner iteration takes one
gradient step on (G, T), then group-soft-thresholds G with per-entry level
t*lam*|T_ij| and soft-thresholds T with level t*lam*||G_ij||; the outer loop
runs dual ascent on beta and grows alpha geometrically.  At the end the mask
is rounded to the nearest full-order mask and the weights are re-solved
under that order.

All data enters through per-task Gram matrices, so iteration cost does not
depend on the sample count.
"""

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .graph_core import (
    NotPermutationMask,
    RoundingAmbiguous,
    acyclicity_and_grad,
    mask_from_permutation,
    permutation_from_mask,
)
from .group_lasso import (fit_fixed_order, gram_stack, group_norm,
                          ols_refit, refine_order_adjacent)


class NonFinite(FloatingPointError):
    """Objective became NaN/Inf; the gradient step size is too large."""


def default_lambda(p, n, K, c=0.1):
    """Group-norm weight c * sqrt(p log p / (n K)) used when none is given."""
    return c * math.sqrt(p * math.log(max(p, 2)) / (n * K))


def theory_lambda(p, n, c=0.1):
    """Single-task theory scaling c * sqrt(p log p / n)."""
    return c * math.sqrt(p * math.log(max(p, 2)) / n)


@dataclass(frozen=True)
class Hyperparams:
    """Solver configuration; field names mirror the algorithm's symbols."""

    rho: float = 1.0            # mask attraction toward all-ones
    lam: float | None = None    # group-norm weight; None -> default_lambda
    lam_scale: float = 0.1      # c in the default lambda rule
    struct_lam: float | None = None  # adjacency-stage weight; None -> lam
    alpha0: float = 0.1         # initial quadratic-penalty coefficient
    beta0: float = 0.0          # initial dual variable
    step: float = 1e-3          # t: prox level and plain-gradient step
    delta: float = 0.25         # alpha growth rate per outer round
    tau: float = 10.0           # dual ascent step
    outer_iters: int = 30       # M
    inner_iters: int = 300      # M'
    h_variant: str = "expm"
    tol_h: float = 1e-8
    optimizer: str = "adam"     # "adam" | "gd"
    adam_lr: float = 1e-3
    edge_threshold: float = 0.3
    refine_passes: int = 8      # adjacent-swap order refinement; 0 disables
    seed: int = 0

    def __post_init__(self):
        positives = {"rho": self.rho, "alpha0": self.alpha0, "step": self.step,
                     "tau": self.tau, "tol_h": self.tol_h, "delta": self.delta,
                     "lam_scale": self.lam_scale, "adam_lr": self.adam_lr}
        for name, val in positives.items():
            if val <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lam must be positive when given")
        if self.struct_lam is not None and self.struct_lam <= 0:
            raise ValueError("struct_lam must be positive when given")
        if self.beta0 < 0:
            raise ValueError("beta0 must be nonnegative")
        if self.outer_iters < 0 or self.inner_iters < 1:
            raise ValueError("need outer_iters >= 0 and inner_iters >= 1")
        if self.refine_passes < 0:
            raise ValueError("refine_passes must be nonnegative")
        if self.h_variant not in ("expm", "poly"):
            raise ValueError(f"unknown h_variant {self.h_variant!r}")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown hyperparameter keys: {sorted(extra)}")
        return cls(**d)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def with_overrides(self, **kwargs):
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


@dataclass
class EstimationResult:
    weights: np.ndarray             # (K, p, p); polished under the order when present
    mask: np.ndarray                # rounded binary mask when an order was extracted
    mask_continuous: np.ndarray     # final T before rounding
    order: np.ndarray | None
    per_task_adjacency: np.ndarray  # (K, p, p) weights after edge thresholding
    converged: bool                 # strict: mask rounds cleanly to a full-order mask
    objective: float
    lam: float
    diagnostics: dict = field(default_factory=dict)


def nearest_order(T):
    """Rank nodes by descending row sum of the mask (ties by node index).

    For a mask that encodes a full order exactly this inverts
    mask_from_permutation; for a non-committed mask it is the projection
    onto the nearest full-order mask in the row-sum ranking sense.
    """
    T = np.asarray(T, dtype=float)
    p = T.shape[0]
    rowsums = T.sum(axis=1) - np.diag(T)
    by_position = sorted(range(p), key=lambda i: (-rowsums[i], i))
    order = np.empty(p, dtype=int)
    for rank, node in enumerate(by_position):
        order[node] = rank
    return order


def _compile(bundle):
    C = gram_stack(bundle)
    half_traces = 0.5 * np.trace(C, axis1=1, axis2=2)
    return C, half_traces


def _quad_terms(C, half_traces, G, T):
    """Smooth data term and its gradient wrt the masked stack."""
    Gbar = G * T
    M = C @ Gbar
    quad = float(np.sum(half_traces)
                 - np.einsum("kii->", M)
                 + 0.5 * np.einsum("kij,kij->", Gbar, M))
    E = M - C
    return quad, E, Gbar


def smooth_objective(G, T, beta, alpha, bundle, hyper):
    """f(G, T; beta, alpha): data term + rho||1-T||_F^2 + beta h + alpha h^2."""
    C, half_traces = _compile(bundle)
    quad, _, _ = _quad_terms(C, half_traces, np.asarray(G, float), np.asarray(T, float))
    h, _ = acyclicity_and_grad(T, hyper.h_variant)
    ones_gap = float(np.sum((1.0 - np.asarray(T, float)) ** 2))
    return quad + hyper.rho * ones_gap + beta * h + alpha * h * h


def gradient_f(G, T, beta, alpha, bundle, hyper):
    """Gradients of smooth_objective wrt G (stack) and T."""
    G = np.asarray(G, dtype=float)
    T = np.asarray(T, dtype=float)
    C, half_traces = _compile(bundle)
    _, E, _ = _quad_terms(C, half_traces, G, T)
    h, gh = acyclicity_and_grad(T, hyper.h_variant)
    dG = E * T
    dT = np.sum(E * G, axis=0) - 2.0 * hyper.rho * (1.0 - T) + (beta + 2.0 * alpha * h) * gh
    return dG, dT


def fit_joint(bundle, hyper=None, inner_diagnostics=False):
    """Run the full alternating scheme and extract a feasible estimate.

    The returned weights are always re-solved under the extracted order;
    `converged` is the strict check that the final mask rounds cleanly to a
    full-order mask (its acyclicity value is then exactly 0).  With
    outer_iters=0 the untouched initial state is returned.  A NaN/Inf
    objective raises NonFinite.
    """
    hyper = hyper or Hyperparams()
    p, K = bundle.p, bundle.K
    n_mean = sum(bundle.n_list) / K
    lam = hyper.lam if hyper.lam is not None else default_lambda(p, n_mean, K, hyper.lam_scale)

    C, half_traces = _compile(bundle)
    rng = np.random.default_rng(hyper.seed)
    # start below the acyclicity barrier: entries rise with the ones-pull
    # and commit sequentially where the data supports them
    T = rng.uniform(0.0, 0.2, size=(p, p))
    G = np.zeros((K, p, p))
    diag = np.arange(p)
    T[diag, diag] = 0.0

    beta = hyper.beta0
    alpha = hyper.alpha0
    t = hyper.step
    use_adam = hyper.optimizer == "adam"
    if use_adam:
        m_G = np.zeros_like(G)
        v_G = np.zeros_like(G)
        m_T = np.zeros_like(T)
        v_T = np.zeros_like(T)
        adam_step = 0
        b1, b2, eps = 0.9, 0.999, 1e-8

    trace = {"objective": [], "h": [], "beta": [], "alpha": []}
    inner_trace = []

    def composite(h_val, quad):
        ones_gap = float(np.sum((1.0 - T) ** 2))
        f = quad + hyper.rho * ones_gap + beta * h_val + alpha * h_val * h_val
        return f + lam * group_norm(G * T)

    for outer in range(hyper.outer_iters):
        # non-finite intermediates surface through the NonFinite guard below
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(hyper.inner_iters):
                Gbar = G * T
                E = C @ Gbar
                E -= C
                h_val, gh = acyclicity_and_grad(T, hyper.h_variant)
                dG = E * T
                dT = np.einsum("kij,kij->ij", E, G)
                dT += 2.0 * hyper.rho * T
                dT -= 2.0 * hyper.rho
                gh *= beta + 2.0 * alpha * h_val
                dT += gh
                if use_adam:
                    adam_step += 1
                    m_G *= b1
                    m_G += (1 - b1) * dG
                    v_G *= b2
                    v_G += (1 - b2) * dG * dG
                    m_T *= b1
                    m_T += (1 - b1) * dT
                    v_T *= b2
                    v_T += (1 - b2) * dT * dT
                    c1 = 1 - b1 ** adam_step
                    c2 = 1 - b2 ** adam_step
                    G -= hyper.adam_lr * (m_G / c1) / (np.sqrt(v_G / c2) + eps)
                    T -= hyper.adam_lr * (m_T / c1) / (np.sqrt(v_T / c2) + eps)
                else:
                    G -= t * dG
                    T -= t * dT
                G[:, diag, diag] = 0.0
                T[diag, diag] = 0.0
                # group soft threshold on G at level t*lam*|T|; the prox leaves
                # group norms at max(0, norm - level), reused for the T prox
                norms = np.sqrt(np.einsum("kij,kij->ij", G, G))
                level = t * lam * np.abs(T)
                scale = np.zeros_like(norms)
                nz = norms > 0
                scale[nz] = np.maximum(0.0, 1.0 - level[nz] / norms[nz])
                G *= scale
                norms = np.maximum(norms - level, 0.0)
                np.sign(T, out=level)
                np.abs(T, out=T)
                T -= t * lam * norms
                np.maximum(T, 0.0, out=T)
                T *= level
                if inner_diagnostics:
                    q, _, _ = _quad_terms(C, half_traces, G, T)
                    hv, _ = acyclicity_and_grad(T, hyper.h_variant)
                    inner_trace.append(composite(hv, q))
        quad, _, _ = _quad_terms(C, half_traces, G, T)
        h_val, _ = acyclicity_and_grad(T, hyper.h_variant)
        obj = composite(h_val, quad)
        if not np.isfinite(obj):
            raise NonFinite(
                f"objective is not finite at outer round {outer + 1}; "
                f"reduce step/adam_lr (t={t}, adam_lr={hyper.adam_lr})")
        trace["objective"].append(obj)
        trace["h"].append(h_val)
        trace["beta"].append(beta)
        trace["alpha"].append(alpha)
        beta = beta + hyper.tau * h_val
        alpha = alpha * (1.0 + hyper.delta)

    diagnostics = {k: np.asarray(v) for k, v in trace.items()}
    if inner_diagnostics:
        diagnostics["inner_objective"] = np.asarray(inner_trace)

    if hyper.outer_iters == 0:
        return EstimationResult(
            weights=G * T, mask=T.copy(), mask_continuous=T, order=None,
            per_task_adjacency=np.zeros_like(G), converged=False,
            objective=float("nan"), lam=lam, diagnostics=diagnostics)

    # rounding-assisted final projection onto the nearest full-order mask,
    # a local descent over adjacent rank swaps, then a fresh solve of the
    # weights under the refined order
    order = nearest_order(T)
    if hyper.refine_passes > 0:
        order = refine_order_adjacent(C, order, lam, tol=1e-6, max_iter=250,
                                      max_passes=hyper.refine_passes)
    mask = mask_from_permutation(order)
    polish = fit_fixed_order(bundle, order, lam, max_iter=1500, grams=C)
    weights = polish.weights
    try:
        strict = permutation_from_mask(T, tol=1e-3)
        h_final, _ = acyclicity_and_grad(mask_from_permutation(strict), hyper.h_variant)
        converged = h_final <= hyper.tol_h
    except (RoundingAmbiguous, NotPermutationMask):
        converged = False

    if hyper.struct_lam is not None and hyper.struct_lam != lam:
        struct = fit_fixed_order(bundle, order, hyper.struct_lam,
                                 max_iter=1500, grams=C)
        adjacency = struct.weights * (np.abs(struct.weights) > hyper.edge_threshold)
    else:
        adjacency = weights * (np.abs(weights) > hyper.edge_threshold)
    return EstimationResult(
        weights=weights,
        mask=mask,
        mask_continuous=T,
        order=order,
        per_task_adjacency=adjacency,
        converged=converged,
        objective=float(polish.objective),
        lam=lam,
        diagnostics=diagnostics,
    )


def extract_estimate(G, T, edge_threshold, bundle=None, refit=False, tol=1e-3):
    """Order + per-task adjacency from a converged (G, T) pair.

    Raises RoundingAmbiguous/NotPermutationMask when T has not committed to
    an order.  With refit=True the thresholded supports are re-estimated by
    unpenalized least squares on the bundle.
    """
    G = np.asarray(G, dtype=float)
    T = np.asarray(T, dtype=float)
    order = permutation_from_mask(T, tol=tol)
    bin_mask = mask_from_permutation(order)
    masked = G * T * bin_mask
    supports = np.abs(masked) > edge_threshold
    if refit:
        if bundle is None:
            raise ValueError("refit requires the data bundle")
        weights = ols_refit(bundle, supports)
    else:
        weights = masked * supports
    return order, weights
