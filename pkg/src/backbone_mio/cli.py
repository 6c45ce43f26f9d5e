"""Command-line entry point: ``backbone-mio <subcommand> [flags]``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 solver-scale or
infeasibility error, 5 time budget exhausted (the incumbent is still written).
"""

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .bench import ExperimentSpec, run_benchmark
from .clustering import BackboneClustering, ClusterAssignment, silhouette_score
from .exceptions import BackboneError, InfeasibleError, InvalidInputError, SolverError, SolverScaleError
from .regression import BackboneSparseRegression, RegressionModel, predict_regression, r_squared
from .trees import BackboneDecisionTree, TreeModel, apply_binarization, auc

SCHEMA_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER, EXIT_BUDGET = 0, 2, 3, 4, 5


class DataError(Exception):
    pass


def load_csv(path):
    """Numeric matrix from a CSV file; a non-numeric first line is taken as a header."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"--input file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"--input file is empty: {path}")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    if not rows:
        raise DataError(f"--input file has a header but no data: {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DataError(f"--input rows have differing numbers of columns: {path}")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise DataError(f"--input contains a non-numeric value ({exc}): {path}") from exc
    if not np.all(np.isfinite(data)):
        raise DataError(f"--input contains non-finite values: {path}")
    return data


def _split_xy(data, path):
    if data.shape[1] < 2:
        raise DataError(f"--input needs at least one feature column plus the label column: {path}")
    return data[:, :-1], data[:, -1]


def _write_json(doc, path):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def load_model(path):
    """Read a model file written by a fit subcommand.

    Returns the document with ``"model"`` turned back into its model object.
    """
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported schema_version {doc.get('schema_version')!r}")
    kind = doc["kind"]
    if kind == "regression":
        doc["model"] = RegressionModel.from_dict(doc["model"])
    elif kind == "tree":
        doc["model"] = TreeModel.from_dict(doc["model"])
    elif kind == "cluster":
        doc["model"] = ClusterAssignment.from_dict(doc["model"])
    else:
        raise InvalidInputError(f"unknown model kind {kind!r}")
    return doc


def evaluate_model(doc, data):
    """Recompute the summary metric of a loaded model on a data matrix laid out like the input CSV."""
    model = doc["model"]
    if doc["kind"] == "regression":
        X, y = data[:, :-1], data[:, -1]
        return r_squared(y, predict_regression(model, X))
    if doc["kind"] == "tree":
        X, y = data[:, :-1], data[:, -1]
        classes = np.asarray(doc["classes"], dtype=float)
        labels = (y == classes[1]).astype(int)
        return auc(labels, model.predict_proba(apply_binarization(X, model.binarization_map)))
    return silhouette_score(data, model.assignment)


def _fit_regression(args, data):
    X, y = _split_xy(data, args.input)
    est = BackboneSparseRegression(alpha=args.alpha, beta=args.beta, num_subproblems=args.num_subproblems,
                                   max_backbone_size=args.max_backbone_size, lambda_2=args.lambda2,
                                   max_nonzeros=args.max_nonzeros, time_budget=args.time_budget,
                                   random_state=args.seed)
    est.fit(X, y)
    doc = {"kind": "regression", "model": est.model_.to_dict(), "backbone": [int(j) for j in est.backbone_]}
    timed_out = bool(est.result_.model.extra.get("timed_out", False))
    return doc, "r2", r_squared(y, est.predict(X)), len(est.backbone_), timed_out


def _fit_tree(args, data):
    X, y = _split_xy(data, args.input)
    classes = np.unique(y)
    if classes.size != 2:
        raise DataError(f"--input label column must hold exactly two classes, found {classes.size}")
    est = BackboneDecisionTree(alpha=args.alpha, beta=args.beta, num_subproblems=args.num_subproblems,
                               max_backbone_size=args.max_backbone_size, depth=args.depth,
                               bins_per_feature=args.bins_per_feature, time_budget=args.time_budget,
                               random_state=args.seed)
    est.fit(X, y)
    labels = (y == classes[1]).astype(int)
    doc = {"kind": "tree", "model": est.model_.to_dict(), "backbone": [int(j) for j in est.backbone_],
           "classes": [float(c) for c in classes]}
    return doc, "auc", auc(labels, est.decision_function(X)), len(est.backbone_), False


def _fit_cluster(args, data):
    n = data.shape[0]
    if args.clusters * args.min_cluster_size > n:
        raise InfeasibleError(
            f"size constraint violated: --clusters {args.clusters} x --min-cluster-size "
            f"{args.min_cluster_size} exceeds the {n} points in --input")
    est = BackboneClustering(n_clusters=args.clusters, min_cluster_size=args.min_cluster_size,
                             beta=args.beta, num_subproblems=args.num_subproblems,
                             gap_tolerance=args.gap, time_budget=args.time_budget,
                             max_backbone_size=args.max_backbone_size, random_state=args.seed)
    est.fit(data)
    doc = {"kind": "cluster", "model": est.model_.to_dict(),
           "backbone": [[int(i), int(j)] for i, j in est.backbone_]}
    return doc, "silhouette", silhouette_score(data, est.labels_), len(est.backbone_), est.model_.timed_out


def _run_fit(args, fitter):
    data = load_csv(args.input)
    start = time.perf_counter()
    doc, metric, value, size, timed_out = fitter(args, data)
    elapsed = time.perf_counter() - start
    doc["schema_version"] = SCHEMA_VERSION
    doc["metric"] = {"name": metric, "value": float(value)}
    doc["params"] = {k: v for k, v in sorted(vars(args).items())
                     if k not in ("command", "input", "output", "verbose", "handler")}
    doc["timed_out"] = bool(timed_out)
    _write_json(doc, args.output)
    print(f"{metric}={float(value)!r} time={elapsed:.3f}s backbone_size={size}"
          + (" (time budget exhausted, incumbent written)" if timed_out else ""))
    return EXIT_BUDGET if timed_out else EXIT_OK


def _run_benchmark(args):
    path = Path(args.input)
    if not path.is_file():
        raise DataError(f"--input file not found: {path}")
    try:
        spec = ExperimentSpec.from_dict(json.loads(path.read_text()))
    except (ValueError, TypeError) as exc:
        raise DataError(f"--input is not a valid experiment spec: {exc}") from exc
    if args.time_budget is not None:
        spec.time_budget = args.time_budget
    report = run_benchmark(spec, args.output or ".")
    for r in report.rows:
        acc = "-" if r["accuracy"] is None else repr(r["accuracy"])
        size = "-" if r["backbone_size"] is None else r["backbone_size"]
        print(f"{r['problem']} {r['method']} M={r['M']} alpha={r['alpha']} beta={r['beta']} "
              f"accuracy={acc} time={r['time_sec']:.3f}s backbone_size={size}")
    return EXIT_OK


def _fraction(text):
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _nonneg_float(text):
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="backbone-mio",
                                     description="Backbone methods for sparse regression, trees and clustering.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, clustering=False):
        p.add_argument("--input", required=True, help="CSV data file (benchmark: JSON experiment spec)")
        p.add_argument("--output", help="where to write the JSON model (default: stdout)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--time-budget", type=_positive_float, default=None, help="seconds")
        p.add_argument("--verbose", action="store_true", help="print one line per backbone iteration")
        p.add_argument("--num-subproblems", type=_positive_int, default=5)
        p.add_argument("--beta", type=_fraction, default=1.0 if clustering else 0.5)
        if not clustering:
            p.add_argument("--alpha", type=_fraction, default=0.5)

    p = sub.add_parser("fit-regression", help="sparse linear regression")
    common(p)
    p.add_argument("--max-backbone-size", type=_positive_int, default=50)
    p.add_argument("--max-nonzeros", type=_positive_int, default=10)
    p.add_argument("--lambda2", type=_nonneg_float, default=0.001)
    p.set_defaults(handler=lambda a: _run_fit(a, _fit_regression))

    p = sub.add_parser("fit-tree", help="depth-limited classification tree")
    common(p)
    p.add_argument("--max-backbone-size", type=_positive_int, default=20)
    p.add_argument("--depth", type=_positive_int, default=2)
    p.add_argument("--bins-per-feature", type=_positive_int, default=5)
    p.set_defaults(handler=lambda a: _run_fit(a, _fit_tree))

    p = sub.add_parser("fit-cluster", help="clique-partitioning clustering")
    common(p, clustering=True)
    p.add_argument("--max-backbone-size", type=_positive_int, default=None)
    p.add_argument("--clusters", type=_positive_int, default=3)
    p.add_argument("--min-cluster-size", type=_positive_int, default=1)
    p.add_argument("--gap", type=_nonneg_float, default=0.01)
    p.set_defaults(handler=lambda a: _run_fit(a, _fit_cluster))

    p = sub.add_parser("benchmark", help="run an experiment spec and write JSON/CSV reports")
    p.add_argument("--input", required=True, help="JSON experiment spec")
    p.add_argument("--output", help="report directory (default: current directory)")
    p.add_argument("--time-budget", type=_positive_float, default=None, help="per-method seconds")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(handler=_run_benchmark)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    # --verbose surfaces the engine's per-iteration trace lines
    logger = logging.getLogger("backbone_mio")
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.INFO if args.verbose else logging.WARNING)
    propagate, logger.propagate = logger.propagate, False
    try:
        return _dispatch(args)
    finally:
        logger.removeHandler(handler)
        logger.propagate = propagate


def _dispatch(args):
    try:
        return args.handler(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverScaleError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except InvalidInputError as exc:
        print(f"error: invalid data in --input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BackboneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
