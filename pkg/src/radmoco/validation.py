"""Input-validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError

from .simulate import ProjectionSet, RadialKSpace

__all__ = [
    "NotFittedError",
    "check_dataset",
    "check_image",
    "check_is_fitted",
    "check_option",
]


def check_dataset(X):
    """Require a RadialKSpace or ProjectionSet with at least one view."""
    if not isinstance(X, (RadialKSpace, ProjectionSet)):
        raise TypeError(
            "X must be a RadialKSpace or ProjectionSet, "
            f"got {type(X).__name__}"
        )
    if X.n_views < 1:
        raise ValueError("dataset has no views")
    return X


def check_image(X, name: str = "image") -> np.ndarray:
    """Require a finite 2D array; returns it as complex128."""
    arr = np.asarray(X)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise ValueError(f"{name} contains non-finite values")
    return arr.astype(np.complex128)


def check_option(value, options, name: str):
    """Require value to be one of the allowed options."""
    if value not in options:
        raise ValueError(f"{name} must be one of {sorted(options)}, got {value!r}")
    return value


def check_is_fitted(estimator, attributes=("state_",)):
    """Raise NotFittedError unless all fitted attributes are present."""
    missing = [a for a in attributes if not hasattr(estimator, a)]
    if missing:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; "
            "call fit() before using this method"
        )
    return estimator
