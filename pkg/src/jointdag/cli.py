"""Command-line surface: simulate | fit | oracle | eval | sweep | aggregate.

A single JSON config file can provide defaults for any subcommand (top-level
sections "simulate", "hyper", "fit", "sweep"); explicit flags override
config values.  Exit codes: 0 success, 1 usage error, 2 data error,
3 numeric failure.
"""

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import sweep as sweep_mod
from .dataio import (DataError, dump_json, load_json, read_bundle,
                     read_csv_rows, read_edge_list, read_order,
                     write_bundle, write_csv_rows, write_diagnostics,
                     write_edge_list, write_order)
from .exhaustive import DimensionTooLarge, fit_exhaustive, objective_at
from .graph_core import NotPermutationMask, RoundingAmbiguous
from .group_lasso import RankDeficient, fit_fixed_order, ols_refit
from .joint_solver import Hyperparams, NonFinite, fit_joint, theory_lambda
from .metrics import frob_error, order_success, structure_metrics, theta
from .sem_sim import generate_family, load_family, sample_data, save_family

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _section(config_path, name):
    if not config_path:
        return {}
    cfg = load_json(config_path)
    sect = cfg.get(name, {})
    if not isinstance(sect, dict):
        raise DataError(f"{config_path}: section {name!r} must be an object")
    return sect


def _merged(defaults, args, keys):
    """Config defaults overridden by any explicitly passed flags."""
    out = dict(defaults)
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


def _build_hyper(args):
    d = _section(args.config, "hyper")
    overrides = {}
    for name in ("rho", "lam", "lam_scale", "struct_lam", "alpha0", "beta0",
                 "step", "delta", "tau", "outer_iters", "inner_iters",
                 "h_variant", "tol_h", "optimizer", "adam_lr",
                 "edge_threshold", "refine_passes", "seed"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    d.update(overrides)
    try:
        return Hyperparams.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad hyperparameters: {exc}") from None


def cmd_simulate(args):
    cfg = _merged(_section(args.config, "simulate"), args,
                  ("p", "s", "K", "Kp", "n", "keep_prob", "weight_lo",
                   "weight_hi", "seed"))
    for req in ("p", "s", "K", "n", "seed"):
        if req not in cfg:
            raise UsageError(f"simulate requires --{req.replace('_', '-')}")
    p, s, K, n = cfg["p"], cfg["s"], cfg["K"], cfg["n"]
    Kp = cfg.get("Kp", K)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        family = generate_family(p=p, s=s, K=K, n_identifiable=Kp,
                                 weight_range=(cfg.get("weight_lo", 0.5),
                                               cfg.get("weight_hi", 2.0)),
                                 keep_prob=cfg.get("keep_prob", 0.9),
                                 seed=cfg["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    bundle = sample_data(family, n=n, seed=cfg["seed"])
    family_path = out / "family.json"
    save_family(family, family_path)
    data_paths = [out / f"task_{k:02d}.csv" for k in range(K)]
    write_bundle(bundle, data_paths)
    manifest = {
        "family": family_path.name,
        "data": [p.name for p in data_paths],
        "params": {"p": p, "s": s, "K": K, "Kp": Kp, "n": n,
                   "keep_prob": cfg.get("keep_prob", 0.9),
                   "weight_lo": cfg.get("weight_lo", 0.5),
                   "weight_hi": cfg.get("weight_hi", 2.0),
                   "seed": cfg["seed"]},
    }
    manifest_path = out / "manifest.json"
    dump_json(manifest, manifest_path)
    print(manifest_path)
    return EXIT_OK


def _resolve_lam(args, bundle):
    if args.lam is not None:
        return args.lam
    rule = args.lam_rule or "theory"
    if rule == "theory":
        n_mean = sum(bundle.n_list) / bundle.K
        return theory_lambda(bundle.p, n_mean, args.lam_c if args.lam_c is not None else 0.1)
    raise UsageError(f"unknown lam rule {rule!r}")


def _load_fit_inputs(args):
    if args.manifest:
        manifest = load_json(args.manifest)
        base = Path(args.manifest).parent
        paths = [base / name for name in manifest["data"]]
    elif args.data:
        paths = args.data
    else:
        raise UsageError("fit needs data CSVs or --manifest")
    return read_bundle(paths)


def cmd_fit(args, force_oracle=False):
    bundle = _load_fit_inputs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lam = _resolve_lam(args, bundle)
    use_oracle = force_oracle or args.oracle
    start = time.perf_counter()
    if use_oracle:
        fit = fit_exhaustive(bundle, lam)
        order = fit.order
        omega = args.edge_threshold if args.edge_threshold is not None else 0.3
        weights = fit.weights * (np.abs(fit.weights) > omega)
        if args.refit:
            weights = ols_refit(bundle, weights != 0)
        summary = {"mode": "oracle", "objective": fit.objective,
                   "h": 0.0, "converged": True}
        diagnostics = {"objective": [], "h": [], "beta": [], "alpha": []}
    else:
        hyper = _build_hyper(args).with_overrides(lam=lam)
        if hyper.struct_lam is None and (args.struct_rule or "per_task") == "per_task":
            hyper = hyper.with_overrides(struct_lam=lam * math.sqrt(bundle.K))
        res = fit_joint(bundle, hyper)
        order = res.order
        weights = res.per_task_adjacency
        if args.refit and order is not None:
            weights = ols_refit(bundle, weights != 0)
        h_last = float(res.diagnostics["h"][-1]) if len(res.diagnostics["h"]) else float("nan")
        summary = {"mode": "joint", "objective": res.objective,
                   "h": h_last, "converged": bool(res.converged),
                   "hyper": hyper.as_dict()}
        diagnostics = res.diagnostics
    wall = time.perf_counter() - start
    write_edge_list(weights, out / "estimate.csv")
    if order is not None:
        write_order(order, out / "order.csv")
    write_diagnostics(diagnostics, out / "diagnostics.csv")
    summary.update({"p": bundle.p, "K": bundle.K, "n_list": list(bundle.n_list),
                    "lam": lam, "wall_time_s": wall})
    dump_json(summary, out / "summary.json")
    print(out / "summary.json")
    return EXIT_OK


def cmd_eval(args):
    family = load_family(args.family)
    summary = load_json(args.summary) if args.summary else {}
    p, K = family.p, family.K
    est = read_edge_list(args.estimate, p, K)
    order = read_order(args.order) if args.order else None
    truths = family.weight_stack()
    params = family.params or {}
    n = summary.get("n_list", [params.get("n", 0)])[0] if summary else params.get("n", 0)
    lam = summary.get("lam", float("nan"))
    seed = params.get("seed", 0)
    s = params.get("s", len(family.union_support))
    Kp = family.n_identifiable
    th = theta(n, K, Kp, p, s) if n and p >= 2 else float("nan")
    succ = bool(order is not None and order_success(order, list(truths)))
    fields = ("task", "p", "s", "K", "Kp", "n", "lam", "seed", "theta",
              "order_success", "fdr", "tpr", "fpr", "shd", "nnz", "frob_err")
    rows = []
    for k in range(K):
        m = structure_metrics(est[k], truths[k])
        rows.append({"task": k, "p": p, "s": s, "K": K, "Kp": Kp, "n": n,
                     "lam": lam, "seed": seed, "theta": th,
                     "order_success": succ, "fdr": m.fdr, "tpr": m.tpr,
                     "fpr": m.fpr, "shd": m.shd, "nnz": m.nnz,
                     "frob_err": frob_error(est[k][None], truths[k][None])})
    mean_row = {"task": "mean", "p": p, "s": s, "K": K, "Kp": Kp, "n": n,
                "lam": lam, "seed": seed, "theta": th, "order_success": succ}
    for key in ("fdr", "tpr", "fpr", "shd", "nnz", "frob_err"):
        mean_row[key] = float(np.mean([r[key] for r in rows]))
    rows.append(mean_row)
    write_csv_rows(args.out, fields, rows)
    print(args.out)
    return EXIT_OK


def cmd_sweep(args):
    cfg_dict = _section(args.config, "sweep")
    if not cfg_dict:
        raise UsageError("sweep requires a config file with a 'sweep' section")
    try:
        config = sweep_mod.SweepConfig.from_dict(cfg_dict)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad sweep config: {exc}") from None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    def progress(done, total):
        if args.verbose:
            print(f"\r{done}/{total} runs", end="", file=sys.stderr, flush=True)

    done = sweep_mod.run_sweep(config, str(out), resume=args.resume,
                               jobs=args.jobs, progress=progress)
    if args.verbose and done:
        print(file=sys.stderr)
    print(out)
    return EXIT_OK


def cmd_aggregate(args):
    rows = read_csv_rows(args.results)
    if not rows:
        raise DataError(f"{args.results}: empty results file")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wrote = []
    if args.mode == "transition":
        agg = sweep_mod.aggregate_transition(rows, bin_width=args.bin_width)
        path = out / "transition.csv"
        write_csv_rows(path, ("log_theta_bin", "p", "success_prob", "count"), agg)
        wrote.append(path)
        if not args.no_plot:
            from . import plots
            plots.plot_transition(agg, out / "transition.png")
            wrote.append(out / "transition.png")
    elif args.mode == "heatmap":
        agg = sweep_mod.aggregate_heatmap(rows)
        path = out / "heatmap.csv"
        write_csv_rows(path, ("p", "s", "n", "K", "success_prob", "count"), agg)
        wrote.append(path)
        if not args.no_plot:
            from . import plots
            wrote.extend(plots.plot_heatmaps(agg, str(out)))
    elif args.mode == "table":
        agg = sweep_mod.aggregate_table(rows)
        path = out / "table.csv"
        write_csv_rows(path, ("p", "n", "K", "shd_mean", "shd_std", "count"), agg)
        wrote.append(path)
        if not args.no_plot:
            from . import plots
            plots.plot_table(agg, out / "table.png")
            wrote.append(out / "table.png")
    else:
        raise UsageError(f"unknown aggregate mode {args.mode!r}")
    for path in wrote:
        print(path)
    return EXIT_OK


def make_parser():
    parser = _Parser(prog="jointdag",
                     description="Joint estimation of multiple Gaussian DAGs "
                                 "sharing a causal order")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a family and sample data")
    sim.add_argument("--config")
    sim.add_argument("--p", type=int)
    sim.add_argument("--s", type=int)
    sim.add_argument("--K", type=int)
    sim.add_argument("--Kp", type=int)
    sim.add_argument("--n", type=int)
    sim.add_argument("--keep-prob", dest="keep_prob", type=float)
    sim.add_argument("--weight-lo", dest="weight_lo", type=float)
    sim.add_argument("--weight-hi", dest="weight_hi", type=float)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", required=True)

    def add_fit_args(p_, oracle_flag):
        p_.add_argument("data", nargs="*", help="task CSV files")
        p_.add_argument("--manifest")
        p_.add_argument("--config")
        p_.add_argument("--out", required=True)
        p_.add_argument("--lam", type=float)
        p_.add_argument("--lam-rule", dest="lam_rule", choices=["theory"])
        p_.add_argument("--lam-c", dest="lam_c", type=float)
        p_.add_argument("--struct-rule", dest="struct_rule",
                        choices=["per_task", "same"])
        p_.add_argument("--refit", action="store_true")
        if oracle_flag:
            p_.add_argument("--oracle", action="store_true")
        p_.add_argument("--seed", type=int)
        p_.add_argument("--rho", type=float)
        p_.add_argument("--struct-lam", dest="struct_lam", type=float)
        p_.add_argument("--alpha0", type=float)
        p_.add_argument("--beta0", type=float)
        p_.add_argument("--step", type=float)
        p_.add_argument("--delta", type=float)
        p_.add_argument("--tau", type=float)
        p_.add_argument("--outer-iters", dest="outer_iters", type=int)
        p_.add_argument("--inner-iters", dest="inner_iters", type=int)
        p_.add_argument("--h-variant", dest="h_variant", choices=["expm", "poly"])
        p_.add_argument("--optimizer", choices=["adam", "gd"])
        p_.add_argument("--adam-lr", dest="adam_lr", type=float)
        p_.add_argument("--edge-threshold", dest="edge_threshold", type=float)
        p_.add_argument("--refine-passes", dest="refine_passes", type=int)

    fit = sub.add_parser("fit", help="fit the joint estimator on data CSVs")
    add_fit_args(fit, oracle_flag=True)
    oracle = sub.add_parser("oracle", help="exhaustive small-p estimator")
    add_fit_args(oracle, oracle_flag=False)

    ev = sub.add_parser("eval", help="score an estimate against ground truth")
    ev.add_argument("--estimate", required=True)
    ev.add_argument("--order")
    ev.add_argument("--family", required=True)
    ev.add_argument("--summary")
    ev.add_argument("--out", required=True)

    sw = sub.add_parser("sweep", help="run a seeded experiment grid")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", required=True)
    sw.add_argument("--resume", action="store_true")
    sw.add_argument("--jobs", type=int)
    sw.add_argument("--verbose", action="store_true")

    ag = sub.add_parser("aggregate", help="summarize sweep results")
    ag.add_argument("--results", required=True)
    ag.add_argument("--mode", required=True,
                    choices=["transition", "heatmap", "table"])
    ag.add_argument("--out", required=True)
    ag.add_argument("--bin-width", dest="bin_width", type=float, default=0.25)
    ag.add_argument("--no-plot", dest="no_plot", action="store_true")
    return parser


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "oracle":
            args.oracle = True
            return cmd_fit(args, force_oracle=True)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "aggregate":
            return cmd_aggregate(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, DimensionTooLarge) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFinite, RankDeficient, RoundingAmbiguous,
            NotPermutationMask) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
