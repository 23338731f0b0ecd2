"""Independent reference implementations used only to check the library.

Everything here is deliberately naive (series sums, exhaustive scans,
1-D searches, coordinate descent) so that agreement with the fast paths
is meaningful.
"""

import numpy as np


def taylor_expm_trace(M, tol=1e-16, max_terms=200):
    """Trace of exp(M) by direct Taylor summation."""
    p = M.shape[0]
    term = np.eye(p)
    total = np.trace(term)
    for k in range(1, max_terms):
        term = term @ M / k
        inc = np.trace(term)
        total += inc
        if np.abs(term).max() < tol:
            break
    return total


def has_cycle_dfs(pattern):
    """Cycle detection by recursive DFS over the boolean adjacency pattern."""
    p = pattern.shape[0]
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * p

    def visit(u):
        color[u] = GRAY
        for v in range(p):
            if u != v and pattern[u, v]:
                if color[v] == GRAY:
                    return True
                if color[v] == WHITE and visit(v):
                    return True
        color[u] = BLACK
        return False

    return any(color[u] == WHITE and visit(u) for u in range(p))


def central_difference(fun, x, step=1e-5):
    """Central finite-difference gradient of a scalar function of an array."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xm = x.copy()
        xp[idx] += step
        xm[idx] -= step
        grad[idx] = (fun(xp) - fun(xm)) / (2 * step)
        it.iternext()
    return grad


def max_rel_error(a, b):
    """Worst entrywise |a-b| / max(|a|, |b|, 1)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    return float(np.max(np.abs(a - b) / denom))


def golden_section(fun, lo, hi, tol=1e-12, max_iter=200):
    """Scalar minimizer of a unimodal function on [lo, hi]."""
    invphi = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return (a + b) / 2


def prox_group_1d(v, c):
    """Prox of c*||.||_2 at the vector v via golden section on the radius."""
    norm_v = float(np.linalg.norm(v))
    if norm_v == 0.0:
        return np.zeros_like(v)

    def radial(r):
        return 0.5 * (r - norm_v) ** 2 + c * r

    r_star = golden_section(radial, 0.0, norm_v + c + 1.0)
    r_star = max(r_star, 0.0)
    return v / norm_v * r_star


def lasso_cd(X, y, lam, max_iter=20000, tol=1e-14):
    """l1-penalized least squares, (1/2n)||y - Xb||^2 + lam*||b||_1, by
    cyclic coordinate descent."""
    n, m = X.shape
    b = np.zeros(m)
    col_sq = (X * X).sum(axis=0) / n
    r = y.copy()
    for _ in range(max_iter):
        delta = 0.0
        for j in range(m):
            if col_sq[j] == 0.0:
                continue
            rho = X[:, j] @ r / n + col_sq[j] * b[j]
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / col_sq[j]
            if new != b[j]:
                r -= X[:, j] * (new - b[j])
                delta = max(delta, abs(new - b[j]))
                b[j] = new
        if delta < tol:
            break
    return b


def lasso_objective(X, y, b, lam):
    n = X.shape[0]
    return 0.5 / n * np.sum((y - X @ b) ** 2) + lam * np.abs(b).sum()
