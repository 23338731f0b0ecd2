"""l1/l2 group norm, its prox, and the fixed-order multi-task solver.

With the causal order fixed, the joint objective splits into p independent
group-Lasso problems, one per column j, over the predictors that precede j
in the order.  Each is solved by accelerated proximal gradient with
function-value restart; all data enters through per-task Gram matrices, so
iteration cost is independent of the sample count.
"""

from typing import NamedTuple

import numpy as np

from .graph_core import check_permutation


class RankDeficient(np.linalg.LinAlgError):
    """Restricted Gram matrix is singular beyond the ridge."""


def group_norm(stack):
    """Sum over entries (i, j) of the Euclidean norm of the cross-task vector."""
    stack = np.asarray(stack, dtype=float)
    return float(np.linalg.norm(stack, axis=0).sum())


def prox_group(stack, c):
    """Group-wise soft threshold: each (i, j) group shrunk by c in norm."""
    if c < 0:
        raise ValueError("threshold must be nonnegative")
    stack = np.asarray(stack, dtype=float)
    norms = np.linalg.norm(stack, axis=0)
    scale = np.zeros_like(norms)
    nz = norms > 0
    scale[nz] = np.maximum(0.0, 1.0 - c / norms[nz])
    return stack * scale


def gram_stack(bundle):
    """Per-task Gram matrices (1/n_k) X_k^T X_k, stacked (K, p, p)."""
    return np.stack([X.T @ X / X.shape[0] for X in bundle.data])


def _power_iteration_norm(A, iters=20):
    """Largest eigenvalue of a PSD matrix, estimated by power iteration."""
    m = A.shape[0]
    v = np.full(m, 1.0 / np.sqrt(m))
    lam = 0.0
    for _ in range(iters):
        w = A @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam = nw
    return lam


class GroupLassoFit(NamedTuple):
    coef: np.ndarray        # (K, m)
    objective: float
    iterations: int


def solve_column_group_lasso(grams, targets, const, lam, tol=1e-8, max_iter=5000,
                             init=None):
    """min over B (K x m):  sum_k [ 1/2 b_k' A_k b_k - t_k' b_k + const_k ]
    + lam * sum_i ||B_{:,i}||_2,  by APG with function-value restart.

    grams: (K, m, m) restricted Gram matrices; targets: (K, m) cross
    moments; const: (K,) so the value equals the half residual norms.
    Stops when the proximal-gradient optimality residual falls below
    tol * (1 + lam), which certifies the subgradient conditions directly.
    An optional init (K, m) warm-starts the iteration.
    """
    K, m = targets.shape
    base = float(np.sum(const))
    if m == 0:
        return GroupLassoFit(np.zeros((K, 0)), base, 0)

    def _apply(B):
        return np.einsum("kij,kj->ki", grams, B)

    def objective_from(B, AB):
        smooth = float(np.einsum("ki,ki->", B, 0.5 * AB - targets)) + base
        return smooth + lam * np.sqrt(np.einsum("ki,ki->i", B, B)).sum()

    if lam == 0.0:
        # unpenalized least squares: solve the normal equations outright
        B = np.stack([_pinv_solve(grams[k], targets[k]) for k in range(K)])
        return GroupLassoFit(B, objective_from(B, _apply(B)), 0)

    L = max(_power_iteration_norm(grams[k]) for k in range(K)) * 1.01
    if L <= 0:
        return GroupLassoFit(np.zeros((K, m)), base, 0)
    step = 1.0 / L
    level = step * lam
    residual_tol = tol * (1.0 + lam)

    def prox(V):
        # inline group soft threshold at `level`
        norms = np.sqrt(np.einsum("ki,ki->i", V, V))
        np.maximum(norms, level, out=norms)
        return V * (1.0 - level / norms)

    B_prev = np.zeros((K, m)) if init is None else np.array(init, dtype=float)
    Z = B_prev
    t_mom = 1.0
    f_prev = objective_from(B_prev, _apply(B_prev))
    it = 0
    for it in range(1, max_iter + 1):
        B = prox(Z - step * (_apply(Z) - targets))
        AB = _apply(B)
        f = objective_from(B, AB)
        if f > f_prev:
            # restart: plain descent step from the last accepted point
            Z = B_prev
            t_mom = 1.0
            B = prox(Z - step * (_apply(Z) - targets))
            AB = _apply(B)
            f = objective_from(B, AB)
        diff = B - prox(B - step * (AB - targets))
        residual = np.sqrt(np.einsum("ki,ki->", diff, diff)) / step
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        Z = B + ((t_mom - 1.0) / t_next) * (B - B_prev)
        B_prev, t_mom, f_prev = B, t_next, f
        if residual <= residual_tol:
            break
    return GroupLassoFit(B_prev, f_prev, it)


def _pinv_solve(A, b):
    try:
        x = np.linalg.solve(A, b)
        if np.all(np.isfinite(x)):
            return x
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(A, b, rcond=None)[0]


class FixedOrderFit(NamedTuple):
    weights: np.ndarray     # (K, p, p)
    objective: float


def fit_fixed_order(bundle, order, lam, tol=1e-8, max_iter=5000, grams=None):
    """Multi-task group Lasso under a fixed causal order.

    Column j is regressed on the predictors S_j = {i : order[i] < order[j]};
    the returned stack is consistent with the order and minimizes
    sum_k 1/(2 n_k) ||X_k - X_k G_k||_F^2 + lam * group_norm(G).
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    order = check_permutation(order)
    p = bundle.p
    if order.shape[0] != p:
        raise ValueError("order length does not match the data dimension")
    K = bundle.K
    C = gram_stack(bundle) if grams is None else grams
    stack = np.zeros((K, p, p))
    total = 0.0
    for j in range(p):
        S = np.flatnonzero(order < order[j])
        sub = np.ascontiguousarray(C[:, S[:, None], S[None, :]])
        targets = C[:, S, j]
        const = 0.5 * C[:, j, j]
        fit = solve_column_group_lasso(sub, targets, const, lam,
                                       tol=tol, max_iter=max_iter)
        stack[:, S, j] = fit.coef
        total += fit.objective
    return FixedOrderFit(stack, total)


def _column_problem(C, order, j):
    S = np.flatnonzero(order < order[j])
    sub = np.ascontiguousarray(C[:, S[:, None], S[None, :]])
    return S, sub, C[:, S, j], 0.5 * C[:, j, j]


def refine_order_adjacent(C, order, lam, tol=1e-6, max_iter=800, max_passes=8):
    """Descent over adjacent rank transpositions of the fixed-order objective.

    Swapping two neighbouring ranks changes only those two columns'
    subproblems, so each candidate costs two warm-started column solves.
    Deterministic: ranks are swept in ascending order, improvements taken
    greedily.  Returns the refined rank vector.
    """
    order = check_permutation(order).copy()
    p = order.shape[0]
    K = C.shape[0]

    def solve(j, ord_vec, warm):
        S, sub, targets, const = _column_problem(C, ord_vec, j)
        init = None
        if warm is not None:
            w_S, w_coef = warm
            init = np.zeros((K, S.size))
            pos = {i: t for t, i in enumerate(S)}
            for t, i in enumerate(w_S):
                if i in pos:
                    init[:, pos[i]] = w_coef[:, t]
        fit = solve_column_group_lasso(sub, targets, const, lam,
                                       tol=tol, max_iter=max_iter, init=init)
        return S, fit.coef, fit.objective

    cache = {}
    col_obj = np.empty(p)
    for j in range(p):
        S, coef, col_obj[j] = solve(j, order, None)
        cache[j] = (S, coef)
    nodes_at = list(np.argsort(order))
    for _ in range(max_passes):
        improved = False
        for r in range(p - 1):
            a, b = nodes_at[r], nodes_at[r + 1]
            trial = order.copy()
            trial[a], trial[b] = order[b], order[a]
            Sa, ca, oa = solve(a, trial, cache[a])
            Sb, cb, ob = solve(b, trial, cache[b])
            if oa + ob < col_obj[a] + col_obj[b] - 1e-12:
                order = trial
                col_obj[a], col_obj[b] = oa, ob
                cache[a], cache[b] = (Sa, ca), (Sb, cb)
                nodes_at[r], nodes_at[r + 1] = b, a
                improved = True
        if not improved:
            break
    return order


def ols_refit(bundle, supports, ridge=1e-10):
    """Per task, per column least squares restricted to the given parents.

    supports: boolean array (K, p, p); zeros everywhere else.  Raises
    RankDeficient when a restricted Gram solve fails beyond the ridge.
    """
    supports = np.asarray(supports, dtype=bool)
    K, p = bundle.K, bundle.p
    if supports.shape != (K, p, p):
        raise ValueError(f"supports must have shape {(K, p, p)}")
    C = gram_stack(bundle)
    stack = np.zeros((K, p, p))
    for k in range(K):
        n_k = bundle.data[k].shape[0]
        for j in range(p):
            par = np.flatnonzero(supports[k, :, j])
            if par.size == 0:
                continue
            if par.size >= n_k:
                raise RankDeficient(
                    f"task {k} column {j}: {par.size} parents with {n_k} samples")
            A = C[k][np.ix_(par, par)] + ridge * np.eye(par.size)
            b = C[k][par, j]
            try:
                coef = np.linalg.solve(A, b)
            except np.linalg.LinAlgError as exc:
                raise RankDeficient(f"task {k} column {j}: singular Gram") from exc
            if not np.all(np.isfinite(coef)):
                raise RankDeficient(f"task {k} column {j}: non-finite solve")
            stack[k, par, j] = coef
    return stack
