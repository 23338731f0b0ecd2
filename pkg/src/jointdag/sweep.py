"""Seeded experiment sweeps over (p, s, K, K', n) grids.

Each (cell, replicate) simulates a family, fits it, and appends one row per
task.  Cell seeds come from stable hashing, so adding grid points never
changes existing cells, and the results file is resumable: completed
(cell, replicate) groups are skipped, torn groups are dropped and redone.
"""

import hashlib
import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataio import DataError, fmt, read_csv_rows
from .joint_solver import Hyperparams, fit_joint, theory_lambda
from .metrics import frob_error, order_success, structure_metrics, theta
from .sem_sim import generate_family, sample_data

RESULT_FIELDS = ("p", "s", "K", "Kp", "n", "seed", "task", "theta",
                 "order_success", "fdr", "tpr", "fpr", "shd", "nnz",
                 "frob_err", "runtime_s", "status")

ENV_JOBS = "JOINTDAG_JOBS"


@dataclass
class SweepConfig:
    p: list
    s: list
    K: list
    n: list
    Kp: list | None = None          # None: K' = K per cell
    pair_ps: bool = False           # zip p with s instead of crossing
    replicates: int = 64
    base_seed: int = 0
    keep_prob: float = 0.9
    weight_lo: float = 0.5
    weight_hi: float = 2.0
    lam_rule: dict = field(default_factory=lambda: {"rule": "theory", "c": 0.1})
    struct_rule: str = "per_task"   # "per_task": struct lam = lam*sqrt(K); "same"
    hyper: dict = field(default_factory=dict)
    jobs: int | None = None

    def __post_init__(self):
        for name in ("p", "s", "K", "n"):
            if not getattr(self, name):
                raise ValueError(f"grid {name} must be non-empty")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.pair_ps and len(self.p) != len(self.s):
            raise ValueError("pair_ps requires p and s grids of equal length")
        rule = self.lam_rule.get("rule")
        if rule not in ("theory", "fixed"):
            raise ValueError(f"unknown lam rule {rule!r}")
        if self.struct_rule not in ("per_task", "same"):
            raise ValueError(f"unknown struct rule {self.struct_rule!r}")
        if rule == "fixed" and "value" not in self.lam_rule:
            raise ValueError("fixed lam rule needs a value")

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown sweep config keys: {sorted(extra)}")
        return cls(**d)

    def cells(self):
        ps = list(zip(self.p, self.s)) if self.pair_ps else list(
            itertools.product(self.p, self.s))
        out = []
        for (p, s), K, n in itertools.product(ps, self.K, self.n):
            Kps = self.Kp if self.Kp is not None else [K]
            for Kp in Kps:
                if Kp <= K:
                    out.append((p, s, K, Kp, n))
        return out

    def lam_for(self, p, n):
        if self.lam_rule["rule"] == "fixed":
            return float(self.lam_rule["value"])
        return theory_lambda(p, n, self.lam_rule.get("c", 0.1))


def cell_seed(base_seed, p, s, K, Kp, n, replicate):
    """Stable 63-bit seed from the cell coordinates and replicate index."""
    key = f"p={p},s={s},K={K},Kp={Kp},n={n},rep={replicate}".encode()
    digest = hashlib.sha256(key).digest()
    h = int.from_bytes(digest[:8], "big")
    return (base_seed ^ h) & ((1 << 63) - 1)


def run_cell(args):
    """One (cell, replicate): simulate, fit, evaluate.  Returns row dicts."""
    (p, s, K, Kp, n, seed, lam, keep_prob, weight_lo, weight_hi, hyper_kw) = args
    base = {"p": p, "s": s, "K": K, "Kp": Kp, "n": n, "seed": seed}
    try:
        fam = generate_family(p=p, s=s, K=K, n_identifiable=Kp,
                              weight_range=(weight_lo, weight_hi),
                              keep_prob=keep_prob, seed=seed)
        bundle = sample_data(fam, n=n, seed=seed + 1)
        hyper = Hyperparams.from_dict({**hyper_kw, "lam": lam, "seed": seed + 2})
        start = time.perf_counter()
        res = fit_joint(bundle, hyper)
        runtime = time.perf_counter() - start
        truths = fam.weight_stack()
        th = theta(n, K, Kp, p, s)
        succ = res.order is not None and order_success(res.order, list(truths))
        rows = []
        for k in range(K):
            m = structure_metrics(res.per_task_adjacency[k], truths[k])
            rows.append({**base, "task": k, "theta": th, "order_success": succ,
                         "fdr": m.fdr, "tpr": m.tpr, "fpr": m.fpr,
                         "shd": m.shd, "nnz": m.nnz,
                         "frob_err": frob_error(res.per_task_adjacency[k][None],
                                                truths[k][None]),
                         "runtime_s": runtime, "status": "ok"})
        return rows
    except Exception as exc:  # a failed cell must not abort the sweep
        label = f"error:{type(exc).__name__}"
        return [{**base, "task": k, "theta": "nan", "order_success": False,
                 "fdr": "nan", "tpr": "nan", "fpr": "nan", "shd": "nan",
                 "nnz": "nan", "frob_err": "nan", "runtime_s": "nan",
                 "status": label} for k in range(K)]


def _format_row(row):
    out = []
    for name in RESULT_FIELDS:
        v = row[name]
        if isinstance(v, str):
            out.append(v)
        elif isinstance(v, (bool, np.bool_, int, np.integer)):
            out.append(fmt(v))
        else:
            out.append(fmt(float(v)))
    return ",".join(out) + "\n"


def _load_completed(path):
    """Group keys with a full set of task rows; rewrites the file if any
    torn groups are found so the remainder is consistent."""
    if not os.path.exists(path):
        return set(), False
    rows = read_csv_rows(path)
    groups = {}
    for row in rows:
        key = (row["p"], row["s"], row["K"], row["Kp"], row["n"], row["seed"])
        groups.setdefault(key, []).append(row)
    complete = {k for k, v in groups.items() if len(v) == int(k[2])}
    torn = set(groups) - complete
    if torn:
        kept = [r for r in rows
                if (r["p"], r["s"], r["K"], r["Kp"], r["n"], r["seed"]) in complete]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(RESULT_FIELDS) + "\n")
            for r in kept:
                fh.write(",".join(r[name] for name in RESULT_FIELDS) + "\n")
    return complete, True


def run_sweep(config, out_path, resume=False, jobs=None, progress=None):
    """Execute the sweep, appending rows in deterministic order.

    Returns the number of (cell, replicate) groups executed.  With resume,
    groups already present in the results file are skipped.
    """
    jobs = jobs or config.jobs or int(os.environ.get(ENV_JOBS, "1"))
    completed = set()
    have_file = False
    if resume:
        completed, have_file = _load_completed(out_path)
    if not have_file:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(RESULT_FIELDS) + "\n")

    tasks = []
    for (p, s, K, Kp, n) in config.cells():
        lam = config.lam_for(p, n)
        for rep in range(config.replicates):
            seed = cell_seed(config.base_seed, p, s, K, Kp, n, rep)
            key = (str(p), str(s), str(K), str(Kp), str(n), str(seed))
            if key in completed:
                continue
            hyper_kw = dict(config.hyper)
            if config.struct_rule == "per_task":
                hyper_kw.setdefault("struct_lam", lam * np.sqrt(K))
            tasks.append((p, s, K, Kp, n, seed, lam, config.keep_prob,
                          config.weight_lo, config.weight_hi, hyper_kw))

    done = 0
    with open(out_path, "a", encoding="utf-8", newline="\n") as fh:
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for rows in pool.map(run_cell, tasks, chunksize=1):
                    fh.writelines(_format_row(r) for r in rows)
                    fh.flush()
                    done += 1
                    if progress:
                        progress(done, len(tasks))
        else:
            for args in tasks:
                rows = run_cell(args)
                fh.writelines(_format_row(r) for r in rows)
                fh.flush()
                done += 1
                if progress:
                    progress(done, len(tasks))
    return done


def _run_groups(rows):
    """Collapse task rows to one record per (cell, replicate)."""
    seen = {}
    for row in rows:
        key = (row["p"], row["s"], row["K"], row["Kp"], row["n"], row["seed"])
        if key not in seen:
            seen[key] = row
    return list(seen.values())


def aggregate_transition(rows, bin_width=0.25):
    """Success probability per (log-theta bin, p)."""
    ok = [r for r in rows if r["status"] == "ok"]
    runs = _run_groups(ok)
    buckets = {}
    for r in runs:
        lt = np.log(float(r["theta"]))
        b = np.floor(lt / bin_width) * bin_width
        key = (round(b, 10), int(r["p"]))
        succ, cnt = buckets.get(key, (0, 0))
        buckets[key] = (succ + (r["order_success"] == "1"), cnt + 1)
    out = []
    for (b, p), (succ, cnt) in sorted(buckets.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        out.append({"log_theta_bin": b, "p": p,
                    "success_prob": succ / cnt, "count": cnt})
    return out


def aggregate_heatmap(rows):
    """Success probability per (p, s, n, K) cell."""
    ok = [r for r in rows if r["status"] == "ok"]
    runs = _run_groups(ok)
    buckets = {}
    for r in runs:
        key = (int(r["p"]), int(r["s"]), int(r["n"]), int(r["K"]))
        succ, cnt = buckets.get(key, (0, 0))
        buckets[key] = (succ + (r["order_success"] == "1"), cnt + 1)
    return [{"p": p, "s": s, "n": n, "K": K,
             "success_prob": succ / cnt, "count": cnt}
            for (p, s, n, K), (succ, cnt) in sorted(buckets.items())]


def aggregate_table(rows):
    """Mean and standard deviation of SHD per (p, n, K) over task rows."""
    ok = [r for r in rows if r["status"] == "ok"]
    buckets = {}
    for r in ok:
        key = (int(r["p"]), int(r["n"]), int(r["K"]))
        buckets.setdefault(key, []).append(float(r["shd"]))
    return [{"p": p, "n": n, "K": K,
             "shd_mean": float(np.mean(v)), "shd_std": float(np.std(v)),
             "count": len(v)}
            for (p, n, K), v in sorted(buckets.items())]
