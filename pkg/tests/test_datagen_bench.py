import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from backbone_mio.bench import CSV_HEADER, ExperimentSpec, run_benchmark
from backbone_mio.clustering import kmeans_fit, silhouette_score
from backbone_mio.datagen import gen_classification, gen_cluster_blobs, gen_sparse_regression
from backbone_mio.exceptions import InvalidInputError
from backbone_mio.regression import r_squared
from backbone_mio.trees import BinaryClassificationDataset, fit_tree_exact


# --------------------------------------------------------------------------
# generators

def test_noiseless_regression_is_fit_exactly():
    X, y, support = gen_sparse_regression(100, 20, 4, 1e9, seed=0)
    assert len(support) == 4
    coef, *_ = np.linalg.lstsq(X[:, support], y, rcond=None)
    assert r_squared(y, X[:, support] @ coef) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("snr", [0.5, 5.0])
def test_realised_snr(snr):
    X, y, support = gen_sparse_regression(10000, 10, 3, snr, seed=1)
    signal = X[:, support].sum(axis=1)
    realised = np.var(signal) / np.var(y - signal)
    assert abs(realised / snr - 1) <= 0.1


@given(st.integers(1, 50), st.integers(1, 50), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30)
def test_regression_support_shape(p, k, seed):
    if k > p:
        with pytest.raises(InvalidInputError):
            gen_sparse_regression(10, p, k, 1.0, seed)
        return
    X, y, support = gen_sparse_regression(10, p, k, 1.0, seed)
    assert len(set(support)) == k and max(support) < p
    assert X.shape == (10, p) and y.shape == (10,)


@pytest.mark.parametrize("k", [2, 3])
def test_separable_classification_needs_shallow_tree(k):
    X, y, informative = gen_classification(300, 8, k, noise_rate=0.0, seed=k, class_sep=5.0, cluster_std=0.3)
    data = BinaryClassificationDataset((X[:, informative] > 0).astype(int), y)
    depth = int(np.ceil(np.log2(2 * k)))
    assert fit_tree_exact(data, range(k), depth).misclassification_count == 0


@given(st.integers(1, 301), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30)
def test_class_counts_balanced(n, seed):
    _, y, _ = gen_classification(n, 6, 3, noise_rate=0.0, seed=seed)
    assert abs(int(y.sum()) - (n - int(y.sum()))) <= 1


@pytest.mark.parametrize("rate", [0.05, 0.2])
def test_flip_rate_within_three_sigma(rate):
    n = 5000
    clean = gen_classification(n, 5, 2, noise_rate=0.0, seed=9)[1]
    noisy = gen_classification(n, 5, 2, noise_rate=rate, seed=9)[1]
    flipped = np.mean(clean != noisy)
    assert abs(flipped - rate) <= 3 * np.sqrt(rate * (1 - rate) / n)


def test_blob_sizes_and_degenerate_silhouette():
    pts, labels, target = gen_cluster_blobs(41, 2, 3, 5, spread=0.0, seed=0)
    assert target == 5
    sizes = np.bincount(labels)
    assert sizes.max() - sizes.min() <= 1
    assert silhouette_score(pts, labels) == 1.0


@pytest.mark.parametrize("seed", range(3))
def test_kmeans_recovers_small_spread_blobs(seed):
    pts, labels, _ = gen_cluster_blobs(40, 2, 3, 3, spread=0.05, seed=seed)
    found = kmeans_fit(pts, range(40), 3, seed).assignment
    assert adjusted_rand_score(labels, found) == 1.0


def test_generators_are_deterministic():
    for gen, args in ((gen_sparse_regression, (30, 8, 2, 3.0, 5)),
                      (gen_classification, (30, 8, 2, 0.1, 5)),
                      (gen_cluster_blobs, (30, 2, 3, 4, 0.2, 5))):
        a, b = gen(*args), gen(*args)
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u, v)


def test_generators_reject_bad_sizes():
    with pytest.raises(InvalidInputError):
        gen_sparse_regression(0, 5, 1, 1.0, 0)
    with pytest.raises(InvalidInputError):
        gen_classification(10, 2, 3)
    with pytest.raises(InvalidInputError):
        gen_cluster_blobs(4, 2, 3, 5)


# --------------------------------------------------------------------------
# benchmark harness

def _check_consistency(report):
    for row in report.rows:
        recs = [r for r in report.raw if (r["method"], r["M"], r["alpha"], r["beta"])
                == (row["method"], row["M"], row["alpha"], row["beta"])]
        acc = [r["accuracy"] for r in recs if r["accuracy"] is not None]
        if acc:
            assert row["accuracy"] == pytest.approx(np.mean(acc), abs=1e-9)
        assert row["time_sec"] == pytest.approx(np.mean([r["time_sec"] for r in recs]), abs=1e-9)
        assert all(r["time_sec"] >= 0 for r in recs)
        if row["method"] != "backbone":
            assert row["backbone_size"] is None


@pytest.mark.parametrize("problem,n,p,k", [("sparse_regression", 40, 30, 3),
                                           ("decision_tree", 60, 6, 2),
                                           ("clustering", 15, 2, 3)])
def test_benchmark_runs_each_problem(tmp_path, problem, n, p, k):
    methods = [{"name": "heuristic_baseline"}, {"name": "exact_baseline"},
               {"name": "backbone", "M": 3, "alpha": 0.5, "beta": 0.5}]
    spec = ExperimentSpec(problem, n, p, k, methods=methods, repetitions=2, seed=3, time_budget=30.0,
                          spread=0.05)
    report = run_benchmark(spec, tmp_path)
    assert [r["method"] for r in report.rows] == ["heuristic_baseline", "exact_baseline", "backbone"]
    assert len(report.raw) == 6
    _check_consistency(report)
    rows = list(csv.reader(open(tmp_path / "report.csv")))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 4
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["spec"]["problem"] == problem


def test_benchmark_reports_are_reproducible(tmp_path):
    spec = {"problem": "sparse_regression", "n": 30, "p": 20, "k": 2, "repetitions": 2, "seed": 11}
    run_benchmark(spec, tmp_path / "a", timing=False)
    run_benchmark(spec, tmp_path / "b", timing=False)
    for name in ("report.json", "report.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_failed_method_gets_null_accuracy():
    # 3 clusters of at least 11 points cannot be formed from 30 points
    methods = [{"name": "heuristic_baseline"}, {"name": "exact_baseline"}]
    spec = ExperimentSpec("clustering", 30, 2, 3, methods=methods, min_cluster_size=11, spread=0.05)
    report = run_benchmark(spec)
    baseline, exact = report.rows
    assert baseline["accuracy"] is not None
    assert exact["accuracy"] is None and exact["valid_repetitions"] == 0
    assert "size constraint" in report.raw[1]["error"]


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        ExperimentSpec("ranking", 10, 2, 1)
    with pytest.raises(InvalidInputError):
        ExperimentSpec("clustering", 10, 2, 1, repetitions=0)
    with pytest.raises(InvalidInputError):
        ExperimentSpec("clustering", 10, 2, 1, methods=[{"name": "magic"}])
