"""Regression forest: CART splits, bagging, OOB error, prediction."""
import numpy as np
import pytest

from switchadjust.errors import ConfigError, FeatureMismatch, InsufficientTraining
from switchadjust.forest import (
    ForestConfig,
    RegressionForest,
    forest_fit,
    forest_predict,
)


def test_config_validation():
    with pytest.raises(ConfigError):
        ForestConfig(n_trees=0)
    with pytest.raises(ConfigError):
        ForestConfig(min_leaf=0)
    with pytest.raises(ConfigError):
        ForestConfig(mtry=0)
    with pytest.raises(ConfigError):
        ForestConfig(max_depth=0)
    assert ForestConfig().resolved_mtry(4) == 2  # ceil(4/3)
    assert ForestConfig().resolved_mtry(1) == 1
    assert ForestConfig(mtry=3).resolved_mtry(9) == 3


def test_constant_target_predicts_exactly():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    y = np.full(40, 7.25)
    f = forest_fit(X, y, ForestConfig(n_trees=25, seed=1))
    pred = forest_predict(f, rng.normal(size=(10, 3)))
    assert np.all(pred == 7.25)


def test_learns_identity_on_one_feature():
    rng = np.random.default_rng(3)
    x = np.sort(rng.uniform(0.0, 100.0, 400))
    X = x.reshape(-1, 1)
    y = x.copy()
    f = forest_fit(X, y, ForestConfig(n_trees=100, min_leaf=1, seed=2))
    pred = forest_predict(f, X)
    mse = float(np.mean((pred - y) ** 2))
    assert mse < 1e-2 * float(np.var(y))


def test_predictions_bounded_by_training_targets():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(120, 4))
    y = rng.uniform(10.0, 20.0, 120)
    f = forest_fit(X, y, ForestConfig(n_trees=60, seed=4))
    assert f.target_range == (float(y.min()), float(y.max()))
    queries = rng.normal(scale=50.0, size=(200, 4))  # far outside training hull
    pred = forest_predict(f, queries)
    assert np.all(pred >= y.min() - 1e-12)
    assert np.all(pred <= y.max() + 1e-12)


def _tree_predict_reference(f: RegressionForest, k: int, row: np.ndarray) -> float:
    """Walk tree k of the stored flat arrays directly."""
    node = 0
    while f.features[k, node] >= 0:
        if row[f.features[k, node]] <= f.thresholds[k, node]:
            node = f.lefts[k, node]
        else:
            node = f.rights[k, node]
    return float(f.values[k, node])


def test_single_tree_prediction_matches_manual_traversal():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(60, 2))
    y = X[:, 0] * 2.0 + rng.normal(scale=0.1, size=60)
    f = forest_fit(X, y, ForestConfig(n_trees=1, min_leaf=3, seed=6))
    for row in rng.normal(size=(25, 2)):
        assert forest_predict(f, row) == pytest.approx(
            _tree_predict_reference(f, 0, row), abs=1e-12
        )


def test_forest_mean_matches_per_tree_average():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(80, 3))
    y = X[:, 1] - X[:, 2] ** 2
    f = forest_fit(X, y, ForestConfig(n_trees=15, seed=9))
    row = rng.normal(size=3)
    per_tree = [_tree_predict_reference(f, k, row) for k in range(f.n_trees)]
    assert forest_predict(f, row) == pytest.approx(float(np.mean(per_tree)), abs=1e-10)


def test_hand_built_stump_oracle():
    # one stump: go left when feature0 <= 5 (value 10), right otherwise (20)
    f = RegressionForest(
        features=np.array([[0, -1, -1]], dtype=np.int64),
        thresholds=np.array([[5.0, 0.0, 0.0]]),
        lefts=np.array([[1, -1, -1]], dtype=np.int64),
        rights=np.array([[2, -1, -1]], dtype=np.int64),
        values=np.array([[0.0, 10.0, 20.0]]),
        node_counts=np.array([[10, 5, 5]], dtype=np.int64),
        n_features=1,
        target_range=(10.0, 20.0),
        oob_mse=float("nan"),
    )
    assert forest_predict(f, [3.0]) == 10.0
    assert forest_predict(f, [5.0]) == 10.0  # boundary goes left
    assert forest_predict(f, [7.0]) == 20.0
    assert forest_predict(f, np.array([[3.0], [7.0]])).tolist() == [10.0, 20.0]


def test_duplicated_trees_leave_predictions_unchanged():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(50, 2))
    y = X[:, 0] + X[:, 1]
    f = forest_fit(X, y, ForestConfig(n_trees=10, seed=3))
    doubled = RegressionForest(
        features=np.concatenate([f.features, f.features]),
        thresholds=np.concatenate([f.thresholds, f.thresholds]),
        lefts=np.concatenate([f.lefts, f.lefts]),
        rights=np.concatenate([f.rights, f.rights]),
        values=np.concatenate([f.values, f.values]),
        node_counts=np.concatenate([f.node_counts, f.node_counts]),
        n_features=f.n_features,
        target_range=f.target_range,
        oob_mse=f.oob_mse,
    )
    q = rng.normal(size=(30, 2))
    assert np.allclose(forest_predict(f, q), forest_predict(doubled, q), atol=1e-12)


def test_same_seed_is_bitwise_deterministic():
    rng = np.random.default_rng(17)
    X = rng.normal(size=(70, 3))
    y = rng.normal(size=70)
    a = forest_fit(X, y, ForestConfig(n_trees=20, seed=42))
    b = forest_fit(X, y, ForestConfig(n_trees=20, seed=42))
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.thresholds, b.thresholds)
    assert np.array_equal(a.values, b.values)
    assert a.oob_mse == b.oob_mse
    c = forest_fit(X, y, ForestConfig(n_trees=20, seed=43))
    assert not np.array_equal(a.thresholds, c.thresholds)


def test_oob_error_present_and_sane():
    rng = np.random.default_rng(19)
    X = rng.normal(size=(200, 2))
    y = 3.0 * X[:, 0] + rng.normal(scale=0.2, size=200)
    f = forest_fit(X, y, ForestConfig(n_trees=60, seed=5))
    assert np.isfinite(f.oob_mse)
    assert f.oob_mse < float(np.var(y))  # better than predicting the mean


def test_insufficient_training_raised():
    X = np.ones((6, 2))
    y = np.ones(6)
    with pytest.raises(InsufficientTraining):
        forest_fit(X, y, ForestConfig(min_leaf=5))
    with pytest.raises(InsufficientTraining):
        forest_fit(np.ones((12, 2)), np.full(12, -1.0), ForestConfig(min_leaf=5))


def test_feature_mismatch_raised():
    rng = np.random.default_rng(23)
    f = forest_fit(rng.normal(size=(30, 3)), rng.uniform(1, 2, 30), ForestConfig(n_trees=5))
    with pytest.raises(FeatureMismatch):
        forest_predict(f, [1.0, 2.0])
    with pytest.raises(FeatureMismatch):
        forest_predict(f, np.ones((4, 2)))
