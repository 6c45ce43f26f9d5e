import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backbone_mio.exceptions import InvalidInputError, SolverScaleError, UndefinedMetricError
from backbone_mio.trees import (NOOP, BackboneDecisionTree, BinaryClassificationDataset, DecisionTree, TreeModel,
                                auc, binarize, extract_split_features, fit_tree_exact, fit_tree_greedy,
                                gini_impurity, gini_utilities, tree_feature_importance)


def random_binary(rng, n=40, p=6, flip=0.2):
    F = rng.integers(0, 2, (n, p))
    y = (F[:, 0] ^ F[:, 1]) if rng.random() < 0.5 else F[:, 2]
    y = np.where(rng.random(n) < flip, 1 - y, y)
    return BinaryClassificationDataset(F, y)


def brute_force_depth2(data, cols):
    """(errors, (root, left, right)) minimised in that lexicographic order over all len(cols)^3 trees."""
    F, y = data.features, data.labels
    best = None
    for r, a, b in itertools.product(cols, repeat=3):
        err = 0
        for side, child in ((0, a), (1, b)):
            rows = F[:, r] == side
            for v in (0, 1):
                leaf = y[rows & (F[:, child] == v)]
                err += min(int(leaf.sum()), int(leaf.size - leaf.sum()))
        if best is None or err < best[0]:
            best = (err, (r, a, b))
    return best


# --------------------------------------------------------------------------
# binarization

def test_binarize_single_bin_cuts_at_median():
    data = binarize(np.array([[1.0], [2.0], [3.0], [4.0]]), 1)
    np.testing.assert_array_equal(data.features[:, 0], [0, 0, 1, 1])
    assert data.binarization_map == [(0, 2.5)]


def test_binarize_constant_column_is_zero():
    data = binarize(np.full((5, 1), 7.0), 3)
    assert not data.features.any()


def test_binarize_quantile_coverage(rng):
    data = binarize(rng.normal(size=(100, 3)), 4)
    assert data.features.shape == (100, 12)
    means = data.features.mean(axis=0)
    assert np.all((means >= 0.1) & (means <= 0.9))


def test_binarize_rejects_empty():
    with pytest.raises(InvalidInputError):
        binarize(np.zeros((0, 3)), 2)


def test_dataset_rejects_non_binary():
    with pytest.raises(InvalidInputError):
        BinaryClassificationDataset(np.array([[2, 0]]), np.array([1]))
    with pytest.raises(InvalidInputError):
        BinaryClassificationDataset(np.array([[1, 0]]), np.array([3]))


# --------------------------------------------------------------------------
# gini and greedy trees

@pytest.mark.parametrize("pos,tot,expected", [(0, 10, 0.0), (5, 10, 0.5), (3, 10, 0.42), (0, 0, 0.0)])
def test_gini_examples(pos, tot, expected):
    assert gini_impurity(pos, tot) == pytest.approx(expected)


def test_greedy_perfect_split():
    F = np.array([[0, 1], [1, 0], [0, 1], [1, 1], [0, 0]])
    data = BinaryClassificationDataset(F, F[:, 0])
    model = fit_tree_greedy(data, [0, 1], 1)
    assert model.split_feature.tolist() == [0]
    assert model.misclassification_count == 0


def test_greedy_constant_labels_is_one_leaf(rng):
    data = BinaryClassificationDataset(rng.integers(0, 2, (20, 4)), np.ones(20, dtype=int))
    model = fit_tree_greedy(data, range(4), 2)
    assert model.split_feature.tolist() == [NOOP] * 3
    assert model.misclassification_count == 0
    np.testing.assert_array_equal(model.leaf_positive_fraction, np.ones(4))


def test_greedy_picks_largest_gini_decrease(rng):
    data = random_binary(rng, n=60)
    model = fit_tree_greedy(data, range(6), 1)
    assert model.split_feature[0] == int(np.argmax(gini_utilities(data)))


# --------------------------------------------------------------------------
# importance and extraction

def test_importance_of_perfect_split():
    F = np.array([[0, 1], [1, 0], [0, 0], [1, 1]])
    data = BinaryClassificationDataset(F, F[:, 1])
    model = fit_tree_greedy(data, [0, 1], 1)
    np.testing.assert_allclose(tree_feature_importance(model, data), [0.0, 1.0])
    assert extract_split_features(model, data) == {1}


def test_importance_of_noop_tree_is_zero(rng):
    data = random_binary(rng)
    model = TreeModel(2, [NOOP] * 3, np.full(4, 0.5), 0)
    assert not tree_feature_importance(model, data).any()
    assert extract_split_features(model, data) == set()


def test_floor_above_max_importance_gives_empty_set(rng):
    data = random_binary(rng)
    model = fit_tree_greedy(data, range(6), 2)
    imp = tree_feature_importance(model, data)
    assert extract_split_features(model, data, importance_floor=imp.max() + 1e-9) == set()


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30)
def test_importance_support_matches_extracted_set(seed):
    rng = np.random.default_rng(seed)
    data = random_binary(rng, n=50, p=8)
    subset = sorted(rng.choice(8, size=5, replace=False))
    model = fit_tree_greedy(data, subset, 2)
    imp = tree_feature_importance(model, data)
    extracted = extract_split_features(model, data)
    assert extracted == set(int(j) for j in np.flatnonzero(imp > 0))
    assert extracted <= set(int(j) for j in subset)
    assert imp.sum() == pytest.approx(1.0) or not imp.any()


# --------------------------------------------------------------------------
# exact trees

def test_exact_finds_perfect_feature(rng):
    F = rng.integers(0, 2, (30, 5))
    data = BinaryClassificationDataset(F, F[:, 3])
    model = fit_tree_exact(data, [1, 3, 4], 1)
    assert model.split_feature.tolist() == [3]
    assert model.misclassification_count == 0


def test_exact_constant_labels(rng):
    data = BinaryClassificationDataset(rng.integers(0, 2, (20, 4)), np.zeros(20, dtype=int))
    assert fit_tree_exact(data, range(4), 2).misclassification_count == 0


@pytest.mark.parametrize("seed", range(30))
def test_exact_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    data = random_binary(rng, n=40, p=8)
    backbone = sorted(int(j) for j in rng.choice(8, size=6, replace=False))
    model = fit_tree_exact(data, backbone, 2)
    err, seq = brute_force_depth2(data, backbone)
    assert model.misclassification_count == err
    assert tuple(model.split_feature) == seq


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3))
@settings(max_examples=25)
def test_exact_never_worse_than_greedy(seed, depth):
    rng = np.random.default_rng(seed)
    data = random_binary(rng, n=50, p=7, flip=0.3)
    assert (fit_tree_exact(data, range(7), depth).misclassification_count
            <= fit_tree_greedy(data, range(7), depth).misclassification_count)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=20)
def test_deeper_exact_trees_never_hurt(seed):
    data = random_binary(np.random.default_rng(seed), n=50, p=6, flip=0.3)
    errs = [fit_tree_exact(data, range(6), d).misclassification_count for d in (1, 2, 3)]
    assert errs[0] >= errs[1] >= errs[2]


def test_exact_caps(rng):
    data = random_binary(rng, p=30)
    with pytest.raises(SolverScaleError):
        fit_tree_exact(data, range(30), 2)
    with pytest.raises(SolverScaleError):
        fit_tree_exact(data, range(5), 4)


def test_tree_round_trip(rng):
    data = random_binary(rng)
    model = fit_tree_exact(data, range(6), 2)
    model.binarization_map = [(0, 0.5)] * 6
    back = TreeModel.from_dict(model.to_dict())
    np.testing.assert_array_equal(back.predict_proba(data.features), model.predict_proba(data.features))
    assert back.binarization_map == model.binarization_map


# --------------------------------------------------------------------------
# AUC

def test_auc_examples():
    assert auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert auc([0, 1, 0, 1], [0.3] * 4) == 0.5
    with pytest.raises(UndefinedMetricError):
        auc([1, 1, 1], [0.1, 0.2, 0.3])


def _auc_oracle(labels, scores):
    pos = [s for l, s in zip(labels, scores) if l == 1]
    neg = [s for l, s in zip(labels, scores) if l == 0]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


@given(st.integers(0, 2 ** 32 - 1))
def test_auc_matches_pairwise_oracle(seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, 30)
    labels[:2] = [0, 1]
    scores = rng.integers(0, 6, 30) / 5.0  # plenty of ties
    assert auc(labels, scores) == pytest.approx(_auc_oracle(labels, scores), abs=1e-12)
    assert auc(labels, np.exp(3 * scores) + 1) == pytest.approx(auc(labels, scores), abs=1e-12)


# --------------------------------------------------------------------------
# estimators

def _tree_data(rng, n=200):
    X = rng.normal(size=(n, 6))
    y = np.where((X[:, 1] > 0.3) & (X[:, 4] < 0.0), "yes", "no")
    return X, y


def test_backbone_tree_finds_interaction(rng):
    X, y = _tree_data(rng)
    est = BackboneDecisionTree(alpha=1.0, beta=0.5, num_subproblems=4, depth=2).fit(X, y)
    assert est.score(X, y) > 0.9
    raw_used = {est.model_.binarization_map[f][0] for f in est.model_.split_feature if f >= 0}
    assert raw_used == {1, 4}
    proba = est.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert set(est.predict(X)) <= {"yes", "no"}


def test_exact_tree_estimator_beats_greedy_on_train(rng):
    X, y = _tree_data(rng, 120)
    greedy = DecisionTree("greedy", depth=2, bins_per_feature=3).fit(X, y)
    exact = DecisionTree("exact", depth=2, bins_per_feature=3).fit(X, y)
    assert exact.model_.misclassification_count <= greedy.model_.misclassification_count
    with pytest.raises(InvalidInputError):
        DecisionTree("magic").fit(X, y)
    with pytest.raises(InvalidInputError):
        DecisionTree().fit(X, np.zeros(len(y)))
