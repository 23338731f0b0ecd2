"""Permutations, permutation masks, and smooth acyclicity functions.

A causal order over p nodes is stored as a rank vector: ``order[i]`` is the
position of node i, so an edge i -> j is admissible iff order[i] < order[j].
The binary masks encoding full orders (dense DAGs) have exactly one entry of
{0,1} per off-diagonal pair and row sums forming the multiset {0,...,p-1}.
"""

import heapq

import numpy as np
import scipy.linalg


class RoundingAmbiguous(ValueError):
    """A mask entry sits too close to the 0.5 rounding boundary."""


class NotPermutationMask(ValueError):
    """A rounded mask does not encode a full causal order."""


def check_permutation(order):
    """Validate and return a rank vector as an int array."""
    order = np.asarray(order, dtype=int)
    p = order.shape[0]
    if order.ndim != 1 or not np.array_equal(np.sort(order), np.arange(p)):
        raise ValueError("order must be a bijection over [0, p)")
    return order


def _square(T):
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {T.shape}")
    return T


def _offdiag_squared(T):
    # diagonal is structurally zero: self-loops are never counted
    M = T * T
    np.fill_diagonal(M, 0.0)
    return M


def h_expm(T):
    """trace(exp(T*T)) - p; zero exactly on acyclic patterns, positive otherwise."""
    T = _square(T)
    M = _offdiag_squared(T)
    val = np.trace(scipy.linalg.expm(M)) - T.shape[0]
    return max(float(val), 0.0)


def h_poly(T):
    """trace((I + T*T)^p) - p; polynomial variant of the acyclicity function."""
    T = _square(T)
    p = T.shape[0]
    M = np.eye(p) + _offdiag_squared(T)
    val = np.trace(np.linalg.matrix_power(M, p)) - p
    return max(float(val), 0.0)


def grad_h(T, variant="expm"):
    """Gradient of the acyclicity function at T (diagonal entries are zero)."""
    T = _square(T)
    p = T.shape[0]
    M = _offdiag_squared(T)
    if variant == "expm":
        E = scipy.linalg.expm(M)
        G = 2.0 * E.T * T
    elif variant == "poly":
        E = np.linalg.matrix_power(np.eye(p) + M, p - 1)
        G = 2.0 * p * E.T * T
    else:
        raise ValueError(f"unknown acyclicity variant {variant!r}")
    np.fill_diagonal(G, 0.0)
    return G


def acyclicity(T, variant="expm"):
    """Dispatch to h_expm or h_poly by name."""
    if variant == "expm":
        return h_expm(T)
    if variant == "poly":
        return h_poly(T)
    raise ValueError(f"unknown acyclicity variant {variant!r}")


def acyclicity_and_grad(T, variant="expm"):
    """Value and gradient of the acyclicity function in one pass."""
    T = _square(T)
    p = T.shape[0]
    M = _offdiag_squared(T)
    if variant == "expm":
        E = scipy.linalg.expm(M)
        val = np.trace(E) - p
        G = 2.0 * E.T * T
    elif variant == "poly":
        B = np.eye(p) + M
        E = np.linalg.matrix_power(B, p - 1)
        val = np.trace(E @ B) - p
        G = 2.0 * p * E.T * T
    else:
        raise ValueError(f"unknown acyclicity variant {variant!r}")
    np.fill_diagonal(G, 0.0)
    return max(float(val), 0.0), G


def mask_from_permutation(order):
    """Binary mask with T_ij = 1 exactly when order[i] < order[j]."""
    order = check_permutation(order)
    return (order[:, None] < order[None, :]).astype(float)


def permutation_from_mask(T, tol=1e-3):
    """Recover the rank vector encoded by a near-binary mask.

    Entries are rounded at 0.5; an off-diagonal entry within tol of 0.5 raises
    RoundingAmbiguous (the solver has not committed to an order).  The rounded
    matrix must reproduce exactly from the returned permutation, otherwise
    NotPermutationMask is raised.
    """
    T = _square(T)
    p = T.shape[0]
    off = ~np.eye(p, dtype=bool)
    if np.any(np.abs(T[off] - 0.5) <= tol):
        raise RoundingAmbiguous(f"mask entry within {tol} of 0.5")
    R = (T > 0.5) & off
    row_sums = R.sum(axis=1)
    if not np.array_equal(np.sort(row_sums), np.arange(p)):
        raise NotPermutationMask("row sums do not form {0,...,p-1}")
    # a node preceding r others has rank p-1-r
    order = p - 1 - row_sums
    if not np.array_equal(mask_from_permutation(order), R.astype(float)):
        raise NotPermutationMask("row-sum signature holds but pattern is not an order mask")
    return order


def is_consistent(G, order):
    """True iff every nonzero entry (i, j) of G satisfies order[i] < order[j]."""
    G = np.asarray(G, dtype=float)
    order = check_permutation(order)
    i, j = np.nonzero(G)
    return bool(np.all(order[i] < order[j]))


def is_acyclic(A):
    """Kahn's algorithm on the nonzero pattern of A."""
    A = _square(A)
    adj = A != 0
    np.fill_diagonal(adj, False)
    indeg = adj.sum(axis=0)
    stack = list(np.flatnonzero(indeg == 0))
    seen = 0
    while stack:
        u = stack.pop()
        seen += 1
        for v in np.flatnonzero(adj[u]):
            adj[u, v] = False
            indeg[v] -= 1
            if indeg[v] == 0:
                stack.append(v)
    return seen == A.shape[0]


def topological_order(A):
    """A rank vector consistent with the DAG A; raises on cyclic input.

    Deterministic: among ready nodes the smallest index is placed first.
    """
    A = _square(A)
    p = A.shape[0]
    adj = A != 0
    np.fill_diagonal(adj, False)
    indeg = adj.sum(axis=0)
    order = np.empty(p, dtype=int)
    ready = [int(v) for v in np.flatnonzero(indeg == 0)]
    heapq.heapify(ready)
    rank = 0
    while ready:
        u = heapq.heappop(ready)
        order[u] = rank
        rank += 1
        for v in np.flatnonzero(adj[u]):
            adj[u, v] = False
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, int(v))
    if rank != p:
        raise ValueError("graph contains a cycle")
    return order
