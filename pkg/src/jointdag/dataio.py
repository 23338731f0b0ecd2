"""CSV and JSON artifacts: task data, edge lists, orders, diagnostics.

Every float is written with 17 significant digits so files round-trip
losslessly through the package's own readers.  Data CSVs carry a header
x1..xp, comma separators, LF line endings, UTF-8.
"""

import csv
import json

import numpy as np

from .sem_sim import TaskBundle


class DataError(ValueError):
    """Malformed or inconsistent input data; message names file and line."""


def fmt(v):
    """Canonical text form: 17 significant digits for floats."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_task_csv(X, path):
    X = np.asarray(X, dtype=float)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(f"x{j + 1}" for j in range(X.shape[1])) + "\n")
        for row in X:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_task_csv(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        cols = header.split(",")
        p = len(cols)
        if cols != [f"x{j + 1}" for j in range(p)]:
            raise DataError(f"{path}:1: expected header x1..x{p}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != p:
                raise DataError(f"{path}:{lineno}: expected {p} fields, got {len(parts)}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.asarray(rows)


def read_bundle(paths):
    mats = [read_task_csv(p) for p in paths]
    widths = {m.shape[1] for m in mats}
    if len(widths) > 1:
        raise DataError(f"tasks disagree on column count: {sorted(widths)} in {list(paths)}")
    return TaskBundle(tuple(mats))


def write_bundle(bundle, paths):
    for X, path in zip(bundle.data, paths):
        write_task_csv(X, path)


def write_edge_list(stack, path):
    """Nonzero entries of a (K, p, p) stack as src,dst,weight,task rows."""
    stack = np.asarray(stack, dtype=float)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("src,dst,weight,task\n")
        for k in range(stack.shape[0]):
            for i, j in zip(*np.nonzero(stack[k])):
                fh.write(f"{i},{j},{fmt(stack[k, i, j])},{k}\n")


def read_edge_list(path, p, K):
    stack = np.zeros((K, p, p))
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "src,dst,weight,task":
            raise DataError(f"{path}:1: expected header src,dst,weight,task")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields")
            try:
                i, j, w, k = int(parts[0]), int(parts[1]), float(parts[2]), int(parts[3])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not (0 <= i < p and 0 <= j < p and 0 <= k < K):
                raise DataError(f"{path}:{lineno}: index out of range for p={p}, K={K}")
            stack[k, i, j] = w
    return stack


def write_order(order, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("node,rank\n")
        for node, rank in enumerate(order):
            fh.write(f"{node},{int(rank)}\n")


def read_order(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "node,rank":
            raise DataError(f"{path}:1: expected header node,rank")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                node, rank = (int(v) for v in line.split(","))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            pairs.append((node, rank))
    order = np.empty(len(pairs), dtype=int)
    for node, rank in pairs:
        if not 0 <= node < len(pairs):
            raise DataError(f"{path}: node {node} out of range")
        order[node] = rank
    return order


def write_diagnostics(diagnostics, path):
    """Per-outer-round traces as iteration,objective,h,beta,alpha rows."""
    keys = ("objective", "h", "beta", "alpha")
    n = len(diagnostics.get("objective", ()))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration,objective,h,beta,alpha\n")
        for i in range(n):
            vals = ",".join(fmt(diagnostics[k][i]) for k in keys)
            fh.write(f"{i + 1},{vals}\n")


def write_csv_rows(path, fieldnames, rows, mode="w"):
    with open(path, mode, encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        if mode == "w":
            writer.writeheader()
        for row in rows:
            writer.writerow({k: fmt(v) if isinstance(v, (float, np.floating, bool, np.bool_))
                             else v for k, v in row.items()})
        fh.flush()


def read_csv_rows(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None


def dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
