"""Brute-force joint estimator: enumerate every causal order on tiny problems.

Ground truth for the continuous solver.  Hard-capped at p <= 6 (720 orders,
each costing p group-Lasso solves); refuse rather than run for hours.
"""

import itertools
from typing import NamedTuple

import numpy as np

from .graph_core import check_permutation, is_consistent
from .group_lasso import fit_fixed_order, gram_stack, group_norm


class DimensionTooLarge(ValueError):
    """Problem exceeds the oracle's permutation-enumeration cap."""


class InconsistentStack(ValueError):
    """A weight stack violates the causal order it is scored under."""


class ExhaustiveFit(NamedTuple):
    order: np.ndarray
    weights: np.ndarray
    objective: float


def objective_at(bundle, order, stack, lam):
    """Joint objective of a stack that must be consistent with the order."""
    order = check_permutation(order)
    stack = np.asarray(stack, dtype=float)
    for k in range(bundle.K):
        if not is_consistent(stack[k], order):
            raise InconsistentStack(f"task {k} violates the order")
    total = 0.0
    for k, X in enumerate(bundle.data):
        R = X - X @ stack[k]
        total += 0.5 / X.shape[0] * float(np.sum(R * R))
    return total + lam * group_norm(stack)


def fit_exhaustive(bundle, lam, max_p=6, tol=1e-8, max_iter=5000):
    """Minimize the joint objective over all p! orders.

    Orders are scanned in lexicographic rank-vector order and only strict
    improvements are kept, so ties resolve to the smallest order sequence.
    """
    p = bundle.p
    if p > max_p:
        raise DimensionTooLarge(f"p={p} exceeds the oracle cap {max_p}")
    grams = gram_stack(bundle)
    best = None
    for perm in itertools.permutations(range(p)):
        order = np.array(perm, dtype=int)
        fit = fit_fixed_order(bundle, order, lam, tol=tol, max_iter=max_iter,
                              grams=grams)
        if best is None or fit.objective < best.objective:
            best = ExhaustiveFit(order, fit.weights, fit.objective)
    return best
