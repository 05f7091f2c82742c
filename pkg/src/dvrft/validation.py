"""Input validation helpers shared by the estimator facade and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .network import NetworkSpec, load_spec

__all__ = ["ensure_time_series", "ensure_spec", "ensure_same_horizon"]


def ensure_time_series(X, n_channels=None, min_samples=2, name="X") -> np.ndarray:
    """Finite float array of shape (n_samples, n_channels); 1-D promotes to one channel."""
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=min_samples)
    if n_channels is not None and X.shape[1] != n_channels:
        raise ValueError(f"{name} has {X.shape[1]} channels, expected {n_channels}")
    return X


def ensure_spec(spec) -> NetworkSpec:
    if spec is None:
        raise ValueError("a network spec (object, dict, or path) is required")
    return load_spec(spec)


def ensure_same_horizon(*arrays):
    horizons = {np.asarray(a).shape[0] for a in arrays}
    if len(horizons) != 1:
        raise ValueError(f"signals disagree on horizon: {sorted(horizons)}")
    return horizons.pop()
