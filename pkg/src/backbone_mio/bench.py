"""Benchmark harness comparing baselines with backbone methods on synthetic data."""

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .clustering import BackboneClustering, KMeansClustering, fit_exact_clustering, silhouette_score
from .core import derive_seed
from .datagen import gen_classification, gen_cluster_blobs, gen_sparse_regression
from .exceptions import BackboneError, InvalidInputError
from .regression import BackboneSparseRegression, SparseRegression, r_squared
from .trees import BackboneDecisionTree, DecisionTree, auc

logger = logging.getLogger(__name__)

PROBLEMS = ("sparse_regression", "decision_tree", "clustering")
CSV_HEADER = ["problem", "method", "M", "alpha", "beta", "accuracy", "time_sec", "backbone_size"]


@dataclass
class ExperimentSpec:
    """What to run.

    ``methods`` holds dicts such as ``{"name": "heuristic_baseline"}``,
    ``{"name": "exact_baseline"}`` or
    ``{"name": "backbone", "M": 5, "alpha": 0.5, "beta": 0.5}``. For
    clustering ``p`` is the point dimension, ``k`` the number of generating
    blobs and ``target_k`` the number of clusters fitted.
    """

    problem: str
    n: int
    p: int
    k: int
    methods: list = field(default_factory=lambda: [{"name": "heuristic_baseline"},
                                                   {"name": "backbone", "M": 5, "alpha": 0.5, "beta": 0.5}])
    repetitions: int = 1
    seed: int = 0
    time_budget: float = 60.0
    snr: float = 5.0
    noise_rate: float = 0.1
    spread: float = 0.1
    target_k: int = None
    lambda_2: float = 0.001
    max_nonzeros: int = None
    max_backbone_size: int = None
    depth: int = 2
    bins_per_feature: int = 5
    min_cluster_size: int = 1
    gap_tolerance: float = 0.01

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise InvalidInputError(f"problem must be one of {PROBLEMS}")
        if self.repetitions < 1:
            raise InvalidInputError("repetitions must be at least 1")
        if self.time_budget is not None and self.time_budget <= 0:
            raise InvalidInputError("time_budget must be positive")
        for m in self.methods:
            if m.get("name") not in ("heuristic_baseline", "exact_baseline", "backbone"):
                raise InvalidInputError(f"unknown method {m.get('name')!r}")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    rows: list
    raw: list

    def to_dict(self, timing=True):
        def strip(r):
            return r if timing else {k: v for k, v in r.items() if k != "time_sec"}
        return {"spec": asdict(self.spec), "rows": [strip(r) for r in self.rows],
                "raw": [strip(r) for r in self.raw]}

    def write(self, directory, stem="report", timing=True):
        """Write ``<stem>.json`` and ``<stem>.csv``; returns both paths."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        json_path = directory / f"{stem}.json"
        csv_path = directory / f"{stem}.csv"
        json_path.write_text(json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n")
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in self.rows:
                writer.writerow(["" if r.get(c) is None else (r[c] if c != "time_sec" or timing else "")
                                 for c in CSV_HEADER])
        return json_path, csv_path


def _label(method):
    if method["name"] != "backbone":
        return method["name"], None, None, None
    return "backbone", method.get("M", 5), method.get("alpha", 0.5), method.get("beta", 0.5)


def _generate(spec, seed):
    if spec.problem == "sparse_regression":
        X, y, _ = gen_sparse_regression(2 * spec.n, spec.p, spec.k, spec.snr, seed)
    elif spec.problem == "decision_tree":
        X, y, _ = gen_classification(2 * spec.n, spec.p, spec.k, spec.noise_rate, seed)
    else:
        points, _, target = gen_cluster_blobs(spec.n, spec.p, spec.k, spec.target_k or spec.k,
                                              spec.spread, seed)
        return points, None, None, None
    return X[:spec.n], y[:spec.n], X[spec.n:], y[spec.n:]


def _run_method(spec, method, data, seed):
    """Fit one method; returns (accuracy, backbone size)."""
    Xtr, ytr, Xte, yte = data
    name = method["name"]
    M, alpha, beta = method.get("M", 5), method.get("alpha", 0.5), method.get("beta", 0.5)
    if spec.problem == "sparse_regression":
        k = spec.max_nonzeros or spec.k
        if name == "backbone":
            est = BackboneSparseRegression(alpha=alpha, beta=beta, num_subproblems=M, lambda_2=spec.lambda_2,
                                           max_nonzeros=k, max_backbone_size=spec.max_backbone_size or 50,
                                           time_budget=spec.time_budget, random_state=seed)
        else:
            solver = "heuristic" if name == "heuristic_baseline" else "exact"
            est = SparseRegression(solver, lambda_2=spec.lambda_2, max_nonzeros=k,
                                   time_budget=spec.time_budget, random_state=seed)
        est.fit(Xtr, ytr)
        return r_squared(yte, est.predict(Xte)), len(getattr(est, "backbone_", [])) or None
    if spec.problem == "decision_tree":
        if name == "backbone":
            est = BackboneDecisionTree(alpha=alpha, beta=beta, num_subproblems=M, depth=spec.depth,
                                       max_backbone_size=spec.max_backbone_size or 20,
                                       bins_per_feature=spec.bins_per_feature, random_state=seed)
        else:
            solver = "greedy" if name == "heuristic_baseline" else "exact"
            est = DecisionTree(solver, depth=spec.depth, bins_per_feature=spec.bins_per_feature)
        est.fit(Xtr, ytr)
        return auc(yte, est.decision_function(Xte)), len(getattr(est, "backbone_", [])) or None
    k = spec.target_k or spec.k
    if name == "backbone":
        est = BackboneClustering(n_clusters=k, min_cluster_size=spec.min_cluster_size, beta=beta,
                                 num_subproblems=M, gap_tolerance=spec.gap_tolerance,
                                 time_budget=spec.time_budget, random_state=seed).fit(Xtr)
        return silhouette_score(Xtr, est.labels_), len(est.backbone_)
    if name == "heuristic_baseline":
        est = KMeansClustering(k, random_state=seed).fit(Xtr)
        return silhouette_score(Xtr, est.labels_), None
    n = Xtr.shape[0]
    everything = [(i, j) for i in range(n) for j in range(i + 1, n)]
    model = fit_exact_clustering(Xtr, everything, k, spec.min_cluster_size, spec.gap_tolerance,
                                 spec.time_budget)
    return silhouette_score(Xtr, model.assignment), None


def run_benchmark(spec, output_dir=None, timing=True):
    """Run every method on every repetition and aggregate.

    Methods that fail (scale caps, exhausted budgets without an incumbent,
    infeasibility) get a null accuracy; the run continues.
    """
    if isinstance(spec, dict):
        spec = ExperimentSpec.from_dict(spec)
    raw = []
    for rep in range(spec.repetitions):
        seed = derive_seed(spec.seed, rep)
        data = _generate(spec, seed)
        for method in spec.methods:
            name, M, alpha, beta = _label(method)
            start = time.perf_counter()
            try:
                accuracy, size = _run_method(spec, method, data, seed % (2 ** 32))
                error = None
            except BackboneError as exc:
                accuracy, size, error = None, None, str(exc)
                logger.warning("%s failed on repetition %d: %s", name, rep, exc)
            raw.append({"repetition": rep, "problem": spec.problem, "method": name, "M": M,
                        "alpha": alpha, "beta": beta, "accuracy": accuracy,
                        "time_sec": time.perf_counter() - start, "backbone_size": size, "error": error})
    rows = []
    for method in spec.methods:
        name, M, alpha, beta = _label(method)
        recs = [r for r in raw if (r["method"], r["M"], r["alpha"], r["beta"]) == (name, M, alpha, beta)]
        acc = [r["accuracy"] for r in recs if r["accuracy"] is not None]
        sizes = [r["backbone_size"] for r in recs if r["backbone_size"] is not None]
        rows.append({"problem": spec.problem, "method": name, "M": M, "alpha": alpha, "beta": beta,
                     "accuracy": float(np.mean(acc)) if acc else None,
                     "time_sec": float(np.mean([r["time_sec"] for r in recs])),
                     "backbone_size": float(np.mean(sizes)) if sizes else None,
                     "valid_repetitions": len(acc)})
    report = ExperimentReport(spec, rows, raw)
    if output_dir is not None:
        report.write(output_dir, timing=timing)
    return report
