"""Estimator-style facade over the motion models and PCA.

X rows are flat input vectors [tactile (nodes*3) | joints (16) | labels
(6)] in the same layout the CSV interchange uses; y rows are the
16-dimensional joint targets.
"""
from __future__ import annotations

import numpy as np

from .base import BaseEstimator, check_array, check_X_y
from .dataset import JOINT_DIM, LABEL_DIM
from .models import ModelSpec, build_from_spec, forward_batch, model_spec
from .optim import AdamConfig
from .pca import pca
from .tensor import Tensor, no_grad
from .topology import HandTopology
from .training import TrainConfig, fit_pairs


class _ArrayPairs:
    """PairSet-compatible view over column-split X/y arrays."""

    def __init__(self, x: np.ndarray, y: np.ndarray, n_nodes: int):
        self.tactile = x[:, :3 * n_nodes].reshape(len(x), n_nodes, 3)
        self._aux = x[:, 3 * n_nodes:]
        self.targets = y

    def __len__(self) -> int:
        return self.tactile.shape[0]

    def aux(self) -> np.ndarray:
        return self._aux


class MotionRegressor(BaseEstimator):
    """Supervised joint-target regressor with a fit/predict surface."""

    def __init__(self, topology: HandTopology | None = None, model: str = "III",
                 spec: ModelSpec | None = None, epochs: int = 200, batch_size: int = 100,
                 learning_rate: float = 1e-5, seed: int = 0):
        self.topology = topology
        self.model = model
        self.spec = spec
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def _resolved_spec(self) -> ModelSpec:
        return self.spec if self.spec is not None else model_spec(self.model)

    def _split_width(self, x: np.ndarray) -> int:
        if self.topology is None:
            raise ValueError("MotionRegressor needs a topology (the sensor graph)")
        expected = 3 * self.topology.n + JOINT_DIM + LABEL_DIM
        if x.shape[1] != expected:
            raise ValueError(f"X has {x.shape[1]} columns; topology with {self.topology.n} "
                             f"nodes needs {expected} (tactile|joints|labels)")
        return self.topology.n

    def fit(self, X, y) -> "MotionRegressor":
        x, y = check_X_y(X, y)
        if y.shape[1] != JOINT_DIM:
            raise ValueError(f"y must have {JOINT_DIM} columns, got {y.shape[1]}")
        n_nodes = self._split_width(x)
        pairs = _ArrayPairs(x, y, n_nodes)
        cfg = TrainConfig(model=self.model, spec=self.spec, epochs=self.epochs,
                          batch_size=self.batch_size, seed=self.seed,
                          adam=AdamConfig(learning_rate=self.learning_rate))
        params = build_from_spec(self._resolved_spec(), self.topology, self.seed)
        report = fit_pairs(params, pairs, val_set=None, cfg=cfg)
        self.params_ = params
        self.train_losses_ = report.train_losses
        self.n_features_in_ = x.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        self._check_fitted("params_")
        x = check_array(X, "X")
        n_nodes = self._split_width(x)
        pairs = _ArrayPairs(x, np.zeros((len(x), JOINT_DIM)), n_nodes)
        with no_grad():
            out = forward_batch(self.params_, Tensor(pairs.tactile), Tensor(pairs.aux()))
        return out.data.copy()

    def score(self, X, y) -> float:
        """Coefficient of determination (R^2), uniform average over outputs."""
        x, y = check_X_y(X, y)
        pred = self.predict(x)
        residual = ((y - pred) ** 2).sum(axis=0)
        total = ((y - y.mean(axis=0)) ** 2).sum(axis=0)
        total = np.where(total == 0, 1.0, total)
        return float((1.0 - residual / total).mean())


class PrincipalComponents(BaseEstimator):
    """PCA with the fit/transform surface."""

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit(self, X, y=None) -> "PrincipalComponents":
        x = check_array(X, "X", min_samples=2)
        components, projected, variances = pca(x, self.n_components)
        self.mean_ = x.mean(axis=0)
        self.components_ = components
        self.explained_variance_ = np.array(variances)
        self.n_features_in_ = x.shape[1]
        self._fit_projection = projected
        return self

    def transform(self, X) -> np.ndarray:
        self._check_fitted("components_")
        x = check_array(X, "X")
        if x.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {x.shape[1]} features, fit saw {self.n_features_in_}")
        return (x - self.mean_) @ self.components_.T

    def fit_transform(self, X, y=None) -> np.ndarray:
        self.fit(X)
        return self._fit_projection.copy()
