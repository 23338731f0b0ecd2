"""Ground-truth generators for multi-task linear SEM families.

A family is K linear SEMs x = G^T x + w sharing one causal order and one
sparse union support; the first n_identifiable tasks have unit noise
variance on every node (identifiable), the rest get heteroscedastic noise.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .graph_core import check_permutation, is_consistent


@dataclass(frozen=True)
class SemModel:
    """One linear SEM: connection strengths, noise variances, causal order."""

    weights: np.ndarray     # (p, p), acyclic, consistent with order
    noise_vars: np.ndarray  # (p,) positive
    order: np.ndarray       # rank vector

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "noise_vars", np.asarray(self.noise_vars, dtype=float))
        object.__setattr__(self, "order", check_permutation(self.order))
        if np.any(self.noise_vars <= 0):
            raise ValueError("noise variances must be positive")
        if not is_consistent(self.weights, self.order):
            raise ValueError("weights are not consistent with the causal order")

    @property
    def p(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class SemFamily:
    """K models sharing a causal order and a union support."""

    models: tuple
    shared_order: np.ndarray
    union_support: tuple    # sorted tuple of (i, j) pairs
    n_identifiable: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "shared_order", check_permutation(self.shared_order))
        object.__setattr__(self, "models", tuple(self.models))
        support = {tuple(e) for e in self.union_support}
        object.__setattr__(self, "union_support", tuple(sorted(support)))
        if not 0 < self.n_identifiable <= len(self.models):
            raise ValueError("n_identifiable must be in (0, K]")
        for m in self.models:
            if not is_consistent(m.weights, self.shared_order):
                raise ValueError("model inconsistent with the shared order")
            extra = {tuple(e) for e in zip(*np.nonzero(m.weights))} - support
            if extra:
                raise ValueError(f"model has edges outside the union support: {extra}")

    @property
    def p(self):
        return self.models[0].p

    @property
    def K(self):
        return len(self.models)

    def weight_stack(self):
        """True connection strengths as a (K, p, p) array."""
        return np.stack([m.weights for m in self.models])


@dataclass(frozen=True)
class TaskBundle:
    """K observation matrices, matrix k of shape (n_k, p)."""

    data: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(X, dtype=float) for X in self.data)
        object.__setattr__(self, "data", mats)
        if not mats:
            raise ValueError("bundle needs at least one task")
        p = mats[0].shape[1]
        for X in mats:
            if X.ndim != 2 or X.shape[1] != p:
                raise ValueError("all tasks must share the same column count")
            if X.shape[0] < 1:
                raise ValueError("every task needs at least one sample")

    @property
    def p(self):
        return self.data[0].shape[1]

    @property
    def K(self):
        return len(self.data)

    @property
    def n_list(self):
        return tuple(X.shape[0] for X in self.data)


def generate_family(p, s, K, n_identifiable, weight_range=(0.5, 2.0),
                    keep_prob=0.9, seed=0):
    """Draw a random SEM family: shared order, union support of size s,
    per-task supports kept from the union with probability keep_prob,
    weights uniform on +/-[lo, hi].

    Tasks 0..n_identifiable-1 get unit noise variance on every node; the
    remaining tasks get per-node variances uniform on [0.5, 2.0].
    """
    lo, hi = weight_range
    if not (0 < lo < hi):
        raise ValueError("weight range must satisfy 0 < lo < hi")
    if not 0 < n_identifiable <= K:
        raise ValueError("need 0 < n_identifiable <= K")
    if not 0 < keep_prob <= 1:
        raise ValueError("keep_prob must be in (0, 1]")
    max_edges = p * (p - 1) // 2
    if not 0 < s <= max_edges:
        raise ValueError(f"s must be in (0, {max_edges}] for p={p}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(p)
    pairs = [(i, j) for i in range(p) for j in range(p)
             if i != j and order[i] < order[j]]
    chosen = rng.choice(len(pairs), size=s, replace=False)
    support = [pairs[c] for c in chosen]

    models = []
    for k in range(K):
        W = np.zeros((p, p))
        keep = rng.random(s) < keep_prob
        mags = rng.uniform(lo, hi, size=s)
        signs = rng.choice([-1.0, 1.0], size=s)
        for (i, j), kept, mag, sign in zip(support, keep, mags, signs):
            if kept:
                W[i, j] = sign * mag
        if k < n_identifiable:
            variances = np.ones(p)
        else:
            variances = rng.uniform(0.5, 2.0, size=p)
        models.append(SemModel(W, variances, order))

    params = {"p": p, "s": s, "K": K, "n_identifiable": n_identifiable,
              "weight_range": [lo, hi], "keep_prob": keep_prob, "seed": seed}
    return SemFamily(models, order, support, n_identifiable, params)


def covariance(model):
    """Exact model covariance (I-G)^{-T} Omega (I-G)^{-1}."""
    A = np.eye(model.p) - model.weights
    Ainv = np.linalg.inv(A)
    return Ainv.T @ np.diag(model.noise_vars) @ Ainv


def _sample_task(model, n, rng):
    p = model.p
    W = rng.standard_normal((n, p)) * np.sqrt(model.noise_vars)
    X = np.zeros((n, p))
    # ancestral sampling: parents are finalized before their children
    for j in np.argsort(model.order):
        parents = np.flatnonzero(model.weights[:, j])
        X[:, j] = W[:, j]
        if parents.size:
            X[:, j] += X[:, parents] @ model.weights[parents, j]
    return X


def sample_data(family, n, seed=0):
    """Sample n rows per task; per-task streams are seed XOR task index."""
    if n < 1:
        raise ValueError("need n >= 1")
    data = []
    for k, model in enumerate(family.models):
        rng = np.random.default_rng(seed ^ k)
        data.append(_sample_task(model, n, rng))
    return TaskBundle(tuple(data))


def family_to_dict(family):
    return {
        "p": family.p,
        "K": family.K,
        "n_identifiable": family.n_identifiable,
        "shared_order": [int(r) for r in family.shared_order],
        "union_support": [[int(i), int(j)] for i, j in family.union_support],
        "tasks": [
            {
                "edges": [[int(i), int(j), float(m.weights[i, j])]
                          for i, j in zip(*np.nonzero(m.weights))],
                "noise_vars": [float(v) for v in m.noise_vars],
            }
            for m in family.models
        ],
        "params": family.params,
    }


def family_from_dict(d):
    order = np.asarray(d["shared_order"], dtype=int)
    p = d["p"]
    models = []
    for task in d["tasks"]:
        W = np.zeros((p, p))
        for i, j, w in task["edges"]:
            W[int(i), int(j)] = w
        models.append(SemModel(W, np.asarray(task["noise_vars"]), order))
    return SemFamily(models, order, [tuple(e) for e in d["union_support"]],
                     d["n_identifiable"], d.get("params", {}))


def save_family(family, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(family_to_dict(family), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_family(path):
    with open(path, encoding="utf-8") as fh:
        return family_from_dict(json.load(fh))
