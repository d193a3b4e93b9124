"""Input validation helpers shared by the public constructors."""

import numbers

import numpy as np


def check_probability(value, name, *, open_low=False, open_high=False):
    """Return ``value`` as a float after checking it lies in [0, 1].

    ``open_low`` / ``open_high`` exclude the corresponding endpoint.
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    low_ok = value > 0.0 if open_low else value >= 0.0
    high_ok = value < 1.0 if open_high else value <= 1.0
    if not (low_ok and high_ok):
        lo = "(" if open_low else "["
        hi = ")" if open_high else "]"
        raise ValueError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return value


def check_count(value, name, *, minimum=0, maximum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ValueError(f"{name} must be <= {maximum}, got {value}")
    return value


def check_distribution(vector, name, size, atol=1e-9):
    """Validate a probability vector of the given length."""
    arr = np.asarray(vector, dtype=float)
    if arr.shape != (size,):
        raise ValueError(f"{name} must have shape ({size},), got {arr.shape}")
    if np.any(arr < -atol) or abs(arr.sum() - 1.0) > atol:
        raise ValueError(f"{name} must be a probability vector, got {arr}")
    return np.clip(arr, 0.0, 1.0)


def check_square(matrix, name):
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_thresholds(X):
    """Flatten ``X`` (scalar, 1-D, or single-column 2-D) to nonnegative int thresholds."""
    arr = np.asarray(X)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    arr = np.atleast_1d(arr)
    if arr.ndim != 1:
        raise ValueError(f"thresholds must be 1-D or a single column, got shape {arr.shape}")
    if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError("thresholds must be integers")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError("thresholds must be nonnegative")
    return arr
