"""Input validation helpers used at estimator and library boundaries."""

import numpy as np

from .exceptions import ConfigError, ShapeError


def as_float_matrix(x, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite values."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite values")
    return arr


def as_logits(z, name: str = "z") -> np.ndarray:
    """Coerce logits to float64. Accepts a single vector or a batch of rows.

    The class axis is the last one and must have at least 2 entries.
    """
    arr = np.asarray(z, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise ShapeError(f"{name} must be 1-D or 2-D, got ndim={arr.ndim}")
    if arr.shape[-1] < 2:
        raise ShapeError(f"{name} needs at least 2 classes, got {arr.shape[-1]}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite values")
    return arr


def as_prob_vector(p, name: str = "p", tol: float = 1e-12) -> np.ndarray:
    """Validate a probability vector (or batch of rows): entries in [0, 1], rows sum to 1."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise ShapeError(f"{name} must be 1-D or 2-D, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ShapeError(f"{name} is empty")
    if np.any(arr < 0) or np.any(arr > 1):
        raise ShapeError(f"{name} has entries outside [0, 1]")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise ShapeError(f"{name} rows must sum to 1 within {tol}")
    return arr


def as_labels(y, n_classes: int | None = None, name: str = "y") -> np.ndarray:
    """Coerce integer class labels to int64; optionally range-check against n_classes."""
    arr = np.asarray(y)
    if arr.ndim > 1:
        raise ShapeError(f"{name} must be scalar or 1-D, got ndim={arr.ndim}")
    if not np.issubdtype(arr.dtype, np.integer):
        cast = arr.astype(np.int64)
        if arr.size and not np.array_equal(cast, arr):
            raise ShapeError(f"{name} must hold integer class indices")
        arr = cast
    arr = arr.astype(np.int64)
    if n_classes is not None and arr.size:
        if arr.min() < 0 or arr.max() >= n_classes:
            raise ShapeError(f"{name} has labels outside [0, {n_classes})")
    return arr


def check_same_last_dim(a: np.ndarray, b: np.ndarray, names: str = "arguments") -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(
            f"{names} disagree on class count: {a.shape[-1]} vs {b.shape[-1]}"
        )


def check_positive(value: float, name: str) -> float:
    if not (value > 0):
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return float(value)


def check_nonnegative(value: float, name: str) -> float:
    if value < 0:
        raise ConfigError(f"{name} must be nonnegative, got {value!r}")
    return float(value)
