"""Structure and order evaluation metrics, plus the sample-complexity theta.

Predicted edges are classified against the ground-truth pattern as true
positive (same direction), reverse (opposite direction present), or false
positive (absent in both directions); a ground-truth edge predicted in
neither direction is a false negative.
"""

import math
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .graph_core import is_consistent


class EdgeCounts(NamedTuple):
    true_positive: int
    reverse: int
    false_positive: int
    false_negative: int


class StructureMetrics(NamedTuple):
    fdr: float
    tpr: float
    fpr: float
    shd: int
    nnz: int


def classify_edges(est, truth):
    """Count edge classifications between two binary patterns."""
    est = np.asarray(est) != 0
    truth = np.asarray(truth) != 0
    if est.shape != truth.shape:
        raise ValueError("estimate and truth dimensions differ")
    est = est.copy()
    truth_b = truth.copy()
    np.fill_diagonal(est, False)
    np.fill_diagonal(truth_b, False)
    tp = int(np.sum(est & truth_b))
    rev = int(np.sum(est & ~truth_b & truth_b.T))
    fp = int(np.sum(est & ~truth_b & ~truth_b.T))
    fn = int(np.sum(truth_b & ~est & ~est.T))
    return EdgeCounts(tp, rev, fp, fn)


def structure_metrics(est, truth):
    """FDR/TPR/FPR/SHD/NNZ; FDR of an empty prediction set is 0, and the
    FPR denominator is the ground-truth positive count."""
    tp, rev, fp, fn = classify_edges(est, truth)
    nnz = tp + rev + fp
    gt = int(np.sum(np.asarray(truth) != 0))
    fdr = (rev + fp) / nnz if nnz > 0 else 0.0
    tpr = tp / gt if gt > 0 else 0.0
    fpr = fp / gt if gt > 0 else 0.0
    shd = fn + rev + fp
    return StructureMetrics(fdr, tpr, fpr, shd, nnz)


def order_success(order, truths):
    """True iff the order is consistent with every ground-truth DAG."""
    return all(is_consistent(G, order) for G in truths)


def theta(n, K, K_ident, p, s):
    """Sample-complexity parameter (p/s) * sqrt(n/(p log p) * K'^2/K)."""
    if min(n, K, K_ident, s) <= 0 or p < 2:
        raise ValueError("need positive arguments and p >= 2")
    return (p / s) * math.sqrt(n / (p * math.log(p)) * K_ident ** 2 / K)


def frob_error(est, truth):
    """Mean over tasks of the squared Frobenius distance."""
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ValueError("stack shapes differ")
    K = est.shape[0]
    return float(np.sum((est - truth) ** 2) / K)


@dataclass
class MetricsReport:
    """One evaluated task (or aggregate) with its experiment context."""

    fdr: float
    tpr: float
    fpr: float
    shd: float
    nnz: float
    order_success: bool
    frob_err: float
    theta: float
    p: int
    s: int
    K: int
    Kp: int
    n: int
    lam: float
    seed: int

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}
