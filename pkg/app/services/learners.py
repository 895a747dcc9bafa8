"""Bagged and boosted regression-tree ensembles.

Trees are grown with scikit-learn and then flattened into plain arrays, so a
model predicts identically before and after a trip through the registry.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Literal, Tuple

import numpy as np
from sklearn.model_selection import KFold
from sklearn.tree import DecisionTreeRegressor

from app.errors import (ArityMismatch, DegenerateInput, InternalInvariantError, LengthMismatch,
                        TooFewRows)
from app.schemas import LearnerSpec
from app.services.evaluation import mse

logger = logging.getLogger(__name__)

PAYLOAD_FORMAT = "simreuse-model/1"


@dataclass(frozen=True, eq=False)
class FlatTree:
    """A fitted regression tree as parallel node arrays; leaves have left == -1."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @classmethod
    def from_estimator(cls, estimator: DecisionTreeRegressor) -> "FlatTree":
        tree = estimator.tree_
        return cls(
            feature=tree.feature.astype(np.int64),
            threshold=tree.threshold.astype(float),
            left=tree.children_left.astype(np.int64),
            right=tree.children_right.astype(np.int64),
            value=tree.value[:, 0, 0].astype(float),
        )

    @property
    def node_count(self) -> int:
        return int(self.value.shape[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        # Split decisions are made on float32 features, as during fitting
        X = np.asarray(X, dtype=np.float32)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            rows = np.flatnonzero(self.left[node] >= 0)
            if rows.size == 0:
                return self.value[node]
            current = node[rows]
            go_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FlatTree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=float),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=float),
        )


@dataclass(frozen=True, eq=False)
class TrainedModel:
    spec: LearnerSpec
    trees: Tuple[FlatTree, ...]
    base_value: float
    n_features: int
    trained_on_window: int
    trained_at: datetime
    train_time_seconds: float


def _check_training_data(X, y) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise DegenerateInput(f"Feature matrix must be 2-D, got shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
    if y.shape[0] < 2:
        raise DegenerateInput(f"Training needs at least 2 rows, got {y.shape[0]}")
    if X.shape[1] == 0:
        raise DegenerateInput("Training needs at least one feature column")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DegenerateInput("Training data contains non-finite values")
    return X, y


def _grow_tree(spec: LearnerSpec, X, y, random_state: int) -> FlatTree:
    estimator = DecisionTreeRegressor(
        max_depth=spec.max_depth,
        min_samples_leaf=spec.min_samples_leaf,
        random_state=random_state,
    )
    return FlatTree.from_estimator(estimator.fit(X, y))


def _fit_bagged(spec: LearnerSpec, X, y) -> Tuple[Tuple[FlatTree, ...], float]:
    n = y.shape[0]
    trees = []
    # One independent stream per tree keeps the ensemble reproducible per seed
    for child in np.random.SeedSequence(spec.seed).spawn(spec.n_estimators):
        rng = np.random.default_rng(child)
        sample = rng.integers(0, n, size=n)
        trees.append(_grow_tree(spec, X[sample], y[sample], int(rng.integers(2**31 - 1))))
    return tuple(trees), 0.0


def _fit_boosted(spec: LearnerSpec, X, y) -> Tuple[Tuple[FlatTree, ...], float]:
    base_value = float(np.mean(y))
    prediction = np.full(y.shape[0], base_value)
    loss = mse(y, prediction)
    rng = np.random.default_rng(spec.seed)
    trees = []
    for stage in range(spec.n_estimators):
        tree = _grow_tree(spec, X, y - prediction, int(rng.integers(2**31 - 1)))
        prediction = prediction + spec.learning_rate * tree.predict(X)
        stage_loss = mse(y, prediction)
        if stage_loss > loss + 1e-12 * max(1.0, loss):
            raise InternalInvariantError(
                f"Boosting stage {stage} raised training loss from {loss:.12g} to {stage_loss:.12g}"
            )
        loss = stage_loss
        trees.append(tree)
    return tuple(trees), base_value


def fit(spec: LearnerSpec, X, y, trained_on_window: int = -1) -> TrainedModel:
    X, y = _check_training_data(X, y)
    started = time.perf_counter()
    if spec.kind == "bagged_trees":
        trees, base_value = _fit_bagged(spec, X, y)
    else:
        trees, base_value = _fit_boosted(spec, X, y)
    elapsed = time.perf_counter() - started
    logger.debug(f"Fitted {spec.short_name} ensemble of {len(trees)} trees on {y.shape[0]} rows in {elapsed:.3f}s")
    return TrainedModel(
        spec=spec,
        trees=trees,
        base_value=base_value,
        n_features=X.shape[1],
        trained_on_window=trained_on_window,
        trained_at=datetime.now(timezone.utc),
        train_time_seconds=elapsed,
    )


def predict(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ArityMismatch(f"Model expects {model.n_features} features, got shape {X.shape}")
    outputs = np.stack([tree.predict(X) for tree in model.trees])
    if model.spec.kind == "bagged_trees":
        return outputs.mean(axis=0)
    return model.base_value + model.spec.learning_rate * outputs.sum(axis=0)


def cross_validate(
    spec: LearnerSpec,
    X,
    y,
    k: int = 5,
    mode: Literal["shuffled", "temporal"] = "shuffled",
) -> float:
    """Mean fold MSE of k-fold cross-validation.

    `shuffled` uses a seeded shuffle of the rows; `temporal` keeps contiguous
    folds in time order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if k < 2:
        raise ValueError("k must be >= 2")
    if y.shape[0] < k:
        raise TooFewRows(f"{k}-fold cross-validation needs at least {k} rows, got {y.shape[0]}")

    folds = KFold(n_splits=k, shuffle=mode == "shuffled", random_state=spec.seed if mode == "shuffled" else None)
    scores = []
    for train_rows, test_rows in folds.split(X):
        model = fit(spec, X[train_rows], y[train_rows])
        scores.append(mse(y[test_rows], predict(model, X[test_rows])))
    return float(np.mean(scores))


def to_payload(model: TrainedModel) -> str:
    """Serialize to the versioned JSON registry format."""
    return json.dumps(
        {
            "format": PAYLOAD_FORMAT,
            "spec": model.spec.model_dump(),
            "base_value": model.base_value,
            "n_features": model.n_features,
            "trained_on_window": model.trained_on_window,
            "trained_at": model.trained_at.isoformat(),
            "train_time_seconds": model.train_time_seconds,
            "trees": [tree.to_dict() for tree in model.trees],
        }
    )


def from_payload(text: str) -> TrainedModel:
    data = json.loads(text)
    if data.get("format") != PAYLOAD_FORMAT:
        raise ValueError(f"Unsupported model payload format '{data.get('format')}'")
    return TrainedModel(
        spec=LearnerSpec.model_validate(data["spec"]),
        trees=tuple(FlatTree.from_dict(tree) for tree in data["trees"]),
        base_value=float(data["base_value"]),
        n_features=int(data["n_features"]),
        trained_on_window=int(data["trained_on_window"]),
        trained_at=datetime.fromisoformat(data["trained_at"]),
        train_time_seconds=float(data["train_time_seconds"]),
    )
