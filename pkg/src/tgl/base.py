"""Estimator plumbing: parameter introspection and input validation."""
from __future__ import annotations

import inspect

import numpy as np


class NotFittedError(RuntimeError):
    """Estimator used before fit()."""


def check_array(x, name: str = "X", ndim: int = 2, min_samples: int = 1) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if arr.shape[0] < min_samples:
        raise ValueError(f"{name} needs at least {min_samples} samples, got {arr.shape[0]}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty (shape {arr.shape})")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_X_y(x, y, y_ndim: int = 2) -> tuple[np.ndarray, np.ndarray]:
    x = check_array(x, "X")
    y = check_array(y, "y", ndim=y_ndim)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"X and y disagree on sample count: {x.shape[0]} vs {y.shape[0]}")
    return x, y


class BaseEstimator:
    """get_params/set_params over __init__ keyword arguments."""

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [p.name for p in sig.parameters.values()
                if p.name != "self" and p.kind in (p.POSITIONAL_OR_KEYWORD, p.KEYWORD_ONLY)]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "BaseEstimator":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}; "
                                 f"valid parameters: {sorted(valid)}")
            setattr(self, key, value)
        return self

    def _check_fitted(self, *attrs: str) -> None:
        missing = [a for a in attrs if not hasattr(self, a)]
        if missing:
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit() first")
