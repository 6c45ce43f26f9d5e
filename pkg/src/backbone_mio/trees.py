"""Depth-limited classification trees on binary features.

Trees are stored as complete binary trees in breadth-first order: internal node
``i`` has children ``2i + 1`` (feature value 0) and ``2i + 2`` (feature value 1).
A split feature of ``-1`` marks a no-op split that sends every sample left;
its right child repeats the parent's leaf value.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import BackboneConfig, BackboneSolver, run_backbone
from .exceptions import InvalidInputError, SolverScaleError, UndefinedMetricError

MAX_EXACT_DEPTH = 3
EXACT_CAP = 24
NOOP = -1


@dataclass
class BinaryClassificationDataset:
    features: np.ndarray
    labels: np.ndarray
    binarization_map: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features)
        self.labels = np.asarray(self.labels).ravel()
        if self.features.ndim != 2 or self.features.size == 0:
            raise InvalidInputError("features must be a non-empty 2-D array")
        if self.labels.size != self.features.shape[0]:
            raise InvalidInputError("features and labels disagree in the number of samples")
        if not np.isin(self.features, (0, 1)).all():
            raise InvalidInputError("features must be 0/1")
        if not np.isin(self.labels, (0, 1)).all():
            raise InvalidInputError("labels must be 0/1")
        self.features = self.features.astype(np.int8)
        self.labels = self.labels.astype(np.int8)


@dataclass
class TreeModel:
    depth: int
    split_feature: np.ndarray
    leaf_positive_fraction: np.ndarray
    misclassification_count: int
    binarization_map: list = field(default_factory=list)

    def __post_init__(self):
        self.split_feature = np.asarray(self.split_feature, dtype=int)
        self.leaf_positive_fraction = np.asarray(self.leaf_positive_fraction, dtype=float)
        if self.split_feature.size != 2 ** self.depth - 1 or self.leaf_positive_fraction.size != 2 ** self.depth:
            raise InvalidInputError("node arrays do not match the tree depth")

    def leaves(self, features):
        """Leaf index (0 .. 2**depth - 1) reached by each row of ``features``."""
        node = np.zeros(features.shape[0], dtype=int)
        rows = np.arange(features.shape[0])
        for _ in range(self.depth):
            f = self.split_feature[node]
            go_right = np.where(f >= 0, features[rows, np.maximum(f, 0)] == 1, False)
            node = 2 * node + 1 + go_right
        return node - (2 ** self.depth - 1)

    def predict_proba(self, features):
        return self.leaf_positive_fraction[self.leaves(np.asarray(features))]

    def predict(self, features):
        return (self.predict_proba(features) > 0.5).astype(int)

    def to_dict(self):
        return {
            "depth": int(self.depth),
            "split_feature": [int(f) for f in self.split_feature],
            "leaf_positive_fraction": [float(v) for v in self.leaf_positive_fraction],
            "misclassification_count": int(self.misclassification_count),
            "binarization_map": [[int(s), float(t)] for s, t in self.binarization_map],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["depth"]), d["split_feature"], d["leaf_positive_fraction"],
                   int(d["misclassification_count"]),
                   [(int(s), float(t)) for s, t in d.get("binarization_map", [])])


def binarize(raw, bins_per_feature, labels=None):
    """Threshold each raw column at ``bins_per_feature`` evenly spaced quantiles.

    Column ``q`` of feature ``j`` is 1 where the value exceeds the
    ``(q + 1) / (bins_per_feature + 1)`` quantile of that feature.
    ``labels`` defaults to zeros when only the features are needed.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.size == 0:
        raise InvalidInputError("raw matrix must be non-empty and 2-D")
    if int(bins_per_feature) < 1:
        raise InvalidInputError("bins_per_feature must be at least 1")
    qs = np.arange(1, bins_per_feature + 1) / (bins_per_feature + 1)
    cuts = np.quantile(raw, qs, axis=0)  # (bins, p)
    bmap = [(j, float(cuts[q, j])) for j in range(raw.shape[1]) for q in range(bins_per_feature)]
    features = apply_binarization(raw, bmap)
    if labels is None:
        labels = np.zeros(raw.shape[0], dtype=int)
    return BinaryClassificationDataset(features, labels, bmap)


def apply_binarization(raw, binarization_map):
    raw = np.asarray(raw, dtype=float)
    if not binarization_map:
        return raw.astype(np.int8)
    src = np.array([s for s, _ in binarization_map], dtype=int)
    cut = np.array([t for _, t in binarization_map], dtype=float)
    if src.max() >= raw.shape[1]:
        raise InvalidInputError(f"expected at least {src.max() + 1} raw columns, got {raw.shape[1]}")
    return (raw[:, src] > cut).astype(np.int8)


def gini_impurity(positives, total):
    if total == 0:
        return 0.0
    q = positives / total
    return 2.0 * q * (1.0 - q)


def _gini(pos, tot):
    # vectorized, zero where tot == 0
    q = np.divide(pos, tot, out=np.zeros(np.shape(pos), dtype=float), where=np.asarray(tot) > 0)
    return 2.0 * q * (1.0 - q)


def _split_decrease(F, y, cols):
    """Weighted Gini decrease of a single split on each column of ``cols`` (node-local)."""
    n = y.size
    if n == 0:
        return np.zeros(len(cols))
    sub = F[:, cols]
    n1 = sub.sum(axis=0, dtype=float)
    p1 = y.astype(float) @ sub
    n0 = n - n1
    p0 = float(y.sum()) - p1
    parent = gini_impurity(float(y.sum()), n)
    return parent - (n0 / n) * _gini(p0, n0) - (n1 / n) * _gini(p1, n1)


def gini_utilities(data):
    """Screening utility: Gini decrease of a root split on each feature."""
    return _split_decrease(data.features, data.labels, np.arange(data.features.shape[1]))


def _leaf_stats(model, data):
    leaves = model.leaves(data.features)
    size = 2 ** model.depth
    tot = np.bincount(leaves, minlength=size).astype(float)
    pos = np.bincount(leaves, weights=data.labels.astype(float), minlength=size)
    return pos, tot


def _fill_leaves(split_feature, depth, data):
    """Leaf fractions and error for a fixed layout; empty leaves copy their nearest non-empty ancestor."""
    model = TreeModel(depth, split_feature, np.zeros(2 ** depth), 0)
    pos, tot = _leaf_stats(model, data)
    # node-level totals bottom-up, to find ancestors' fractions
    n_nodes = 2 ** (depth + 1) - 1
    npos = np.zeros(n_nodes)
    ntot = np.zeros(n_nodes)
    first_leaf = 2 ** depth - 1
    npos[first_leaf:] = pos
    ntot[first_leaf:] = tot
    for i in range(first_leaf - 1, -1, -1):
        npos[i] = npos[2 * i + 1] + npos[2 * i + 2]
        ntot[i] = ntot[2 * i + 1] + ntot[2 * i + 2]
    frac = np.zeros(n_nodes)
    frac[0] = npos[0] / ntot[0] if ntot[0] > 0 else 0.0
    for i in range(1, n_nodes):
        frac[i] = npos[i] / ntot[i] if ntot[i] > 0 else frac[(i - 1) // 2]
    model.leaf_positive_fraction = frac[first_leaf:]
    model.misclassification_count = int(np.minimum(pos, tot - pos).sum())
    return model


def fit_tree_greedy(data, subset, depth):
    """CART-style tree restricted to the columns in ``subset``.

    Each node takes the column with the largest weighted Gini decrease (lowest
    index on ties); pure nodes and nodes without an improving split get no-op
    splits below them.
    """
    if depth < 1:
        raise InvalidInputError("depth must be at least 1")
    cols = np.array(sorted(set(int(j) for j in subset)), dtype=int)
    if cols.size == 0:
        raise InvalidInputError("subset must be non-empty")
    F, y = data.features, data.labels
    split = np.full(2 ** depth - 1, NOOP, dtype=int)

    def grow(node, rows, level):
        if level == depth:
            return
        yr = y[rows]
        if rows.size == 0 or yr.min() == yr.max():
            return
        dec = _split_decrease(F[rows], yr, cols)
        best = int(np.argmax(dec))
        if dec[best] <= 1e-12:
            return
        f = int(cols[best])
        split[node] = f
        right = F[rows, f] == 1
        grow(2 * node + 1, rows[~right], level + 1)
        grow(2 * node + 2, rows[right], level + 1)

    grow(0, np.arange(y.size), 0)
    return _fill_leaves(split, depth, data)


def tree_feature_importance(model, data):
    """Gini decrease per feature weighted by node share, normalised to sum to 1 (or all zero)."""
    p = data.features.shape[1]
    imp = np.zeros(p)
    n = data.labels.size
    node = np.zeros(n, dtype=int)
    rows = np.arange(n)
    for level in range(model.depth):
        for i in range(2 ** level - 1, 2 ** (level + 1) - 1):
            f = model.split_feature[i]
            here = rows[node == i]
            if f >= 0 and here.size:
                dec = _split_decrease(data.features[here], data.labels[here], [f])[0]
                imp[f] += here.size / n * max(dec, 0.0)
        f = model.split_feature[node]
        go_right = np.where(f >= 0, data.features[rows, np.maximum(f, 0)] == 1, False)
        node = 2 * node + 1 + go_right
    total = imp.sum()
    return imp / total if total > 0 else imp


def extract_split_features(model, data, importance_floor=0.0):
    """Features used in some split whose normalised importance is at least ``importance_floor``."""
    if importance_floor < 0:
        raise InvalidInputError("importance_floor must be non-negative")
    imp = tree_feature_importance(model, data)
    used = {int(f) for f in model.split_feature if f >= 0}
    return {f for f in used if imp[f] >= importance_floor}


def fit_tree_exact(data, backbone, depth, max_depth=MAX_EXACT_DEPTH, max_features=EXACT_CAP):
    """Tree of the given depth with the fewest training errors, splits drawn from ``backbone``.

    Exhaustive search with memoisation on (remaining depth, sample set). Among
    optimal trees the one with the lexicographically smallest preorder
    sequence of split features is returned.
    """
    if depth < 1:
        raise InvalidInputError("depth must be at least 1")
    if depth > max_depth:
        raise SolverScaleError(f"depth {depth} exceeds the exact-tree cap of {max_depth}")
    cols = np.array(sorted(set(int(j) for j in backbone)), dtype=int)
    if cols.size == 0:
        raise InvalidInputError("backbone must be non-empty")
    if cols.size > max_features:
        raise SolverScaleError(
            f"backbone of {cols.size} features exceeds the exact-tree cap of {max_features}; "
            "lower max_backbone_size")
    F = data.features[:, cols].astype(bool)
    y = data.labels.astype(bool)
    memo = {}

    def solve(rows, levels):
        # returns (errors, preorder sequence of local column positions)
        key = (levels, rows.tobytes())
        if key in memo:
            return memo[key]
        Fr, yr = F[rows], y[rows]
        npos = int(yr.sum())
        if levels == 1:
            n1 = Fr.sum(axis=0)
            p1 = yr.astype(np.int64) @ Fr
            n0 = rows.size - n1
            p0 = npos - p1
            err = np.minimum(p0, n0 - p0) + np.minimum(p1, n1 - p1)
            j = int(np.argmin(err))
            out = (int(err[j]), (j,))
        elif min(npos, rows.size - npos) == 0:
            # pure (or empty): every tree is perfect, smallest sequence is all column 0
            out = (0, (0,) * (2 ** levels - 1))
        else:
            out = None
            for j in range(cols.size):
                right = Fr[:, j]
                left_err, left_seq = solve(rows[~right], levels - 1)
                if out is not None and left_err >= out[0]:
                    continue
                right_err, right_seq = solve(rows[right], levels - 1)
                total = left_err + right_err
                if out is None or total < out[0]:
                    out = (total, (j,) + left_seq + right_seq)
                    if total == 0:
                        break
        memo[key] = out
        return out

    err, seq = solve(np.arange(y.size), depth)
    split = _preorder_to_bfs([int(cols[j]) for j in seq], depth)
    model = _fill_leaves(split, depth, data)
    if model.misclassification_count != err:
        raise AssertionError("exact tree bookkeeping mismatch")
    return model


def _preorder_to_bfs(seq, depth):
    split = np.empty(2 ** depth - 1, dtype=int)
    it = iter(seq)

    def walk(node, level):
        if level == depth:
            return
        split[node] = next(it)
        walk(2 * node + 1, level + 1)
        walk(2 * node + 2, level + 1)

    walk(0, 0)
    return split


def auc(labels, scores):
    """Probability that a random positive outscores a random negative, ties counting one half."""
    labels = np.asarray(labels).ravel()
    scores = np.asarray(scores, dtype=float).ravel()
    if labels.size != scores.size:
        raise InvalidInputError("labels and scores differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


class TreeSolver(BackboneSolver):
    """Gini screening, greedy subproblem trees, exhaustive reduced tree."""

    def __init__(self, depth, importance_floor=0.0, exact_cap=EXACT_CAP):
        self.depth = depth
        self.importance_floor = importance_floor
        self.exact_cap = exact_cap
        self._data = None

    def prepare(self, data):
        # importances are measured on the full training data
        self._data = data

    def universe_size(self, data):
        return data.features.shape[1]

    def calculate_utilities(self, data):
        return gini_utilities(data)

    def fit_subproblem(self, data, subset, seed):
        return fit_tree_greedy(data, subset, self.depth)

    def get_relevant(self, model, subset):
        return extract_split_features(model, self._data, self.importance_floor)

    def fit(self, data, backbone):
        return fit_tree_exact(data, backbone, self.depth, max_features=self.exact_cap)

    def predict(self, model, X):
        return model.predict_proba(X)


class _TreeBase(ClassifierMixin, BaseEstimator):
    def _prepare(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        self.classes_, yi = np.unique(y, return_inverse=True)
        if self.classes_.size != 2:
            raise InvalidInputError("exactly two classes are required")
        if self.depth < 1:
            raise InvalidInputError("depth must be at least 1")
        self.n_features_in_ = X.shape[1]
        if self.bins_per_feature is None:
            return BinaryClassificationDataset(X, yi)
        return binarize(X, self.bins_per_feature, yi)

    def _features(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return apply_binarization(X, self.model_.binarization_map)

    def predict_proba(self, X):
        p = self.model_.predict_proba(self._features(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self.predict_proba(X)[:, 1] > 0.5).astype(int)]

    def decision_function(self, X):
        return self.predict_proba(X)[:, 1]


class BackboneDecisionTree(_TreeBase):
    """Optimal classification tree over a backbone of greedy-tree split features.

    Parameters
    ----------
    alpha, beta : float
        Screening and subproblem fractions over the binary features.
    num_subproblems : int
    max_backbone_size : int
        Must not exceed ``exact_cap``.
    depth : int
    bins_per_feature : int or None
        Quantile thresholds per raw column; ``None`` means ``X`` is already 0/1.
    importance_floor : float
        Minimum normalised importance for a split feature to count as relevant.
    """

    def __init__(self, alpha=0.5, beta=0.5, num_subproblems=5, max_backbone_size=20,
                 max_iterations=10, depth=2, bins_per_feature=5, importance_floor=0.0,
                 exact_cap=EXACT_CAP, time_budget=None, random_state=0, n_jobs=1):
        self.alpha = alpha
        self.beta = beta
        self.num_subproblems = num_subproblems
        self.max_backbone_size = max_backbone_size
        self.max_iterations = max_iterations
        self.depth = depth
        self.bins_per_feature = bins_per_feature
        self.importance_floor = importance_floor
        self.exact_cap = exact_cap
        self.time_budget = time_budget
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y, on_iteration=None):
        data = self._prepare(X, y)
        config = BackboneConfig(self.num_subproblems, self.alpha, self.beta, self.max_backbone_size,
                                self.max_iterations, int(self.random_state or 0), self.time_budget)
        solver = TreeSolver(self.depth, self.importance_floor, self.exact_cap)
        solver.prepare(data)
        self.result_ = run_backbone(data, solver, config, self.n_jobs, on_iteration)
        self.model_ = self.result_.model
        self.model_.binarization_map = list(data.binarization_map)
        self.backbone_ = list(self.result_.backbone)
        self.trace_ = list(self.result_.trace)
        return self


class DecisionTree(_TreeBase):
    """Greedy (CART-style) or exact tree over every binary feature."""

    def __init__(self, solver="greedy", depth=2, bins_per_feature=5, exact_cap=EXACT_CAP):
        self.solver = solver
        self.depth = depth
        self.bins_per_feature = bins_per_feature
        self.exact_cap = exact_cap

    def fit(self, X, y):
        data = self._prepare(X, y)
        cols = range(data.features.shape[1])
        if self.solver == "greedy":
            model = fit_tree_greedy(data, cols, self.depth)
        elif self.solver == "exact":
            model = fit_tree_exact(data, cols, self.depth, max_features=self.exact_cap)
        else:
            raise InvalidInputError(f"unknown solver {self.solver!r}")
        model.binarization_map = list(data.binarization_map)
        self.model_ = model
        return self
