"""Input validation helpers shared across the package."""

import math

import numpy as np
from sklearn.utils.validation import check_array


def check_price(value, name="price"):
    """Return ``value`` as float, raising ``ValueError`` unless finite and > 0."""
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be finite and positive, got {value!r}")
    return value


def check_nonnegative(value, name):
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise ValueError(f"{name} must be finite and non-negative, got {value!r}")
    return value


def check_alpha(alpha):
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= 1.0:
        raise ValueError(f"alpha must be > 1 so that [Z/alpha, alpha*Z] is a range, got {alpha!r}")
    return alpha


def check_dt(dt):
    dt = float(dt)
    if not math.isfinite(dt) or dt <= 0.0:
        raise ValueError(f"dt must be finite and positive, got {dt!r}")
    return dt


def check_price_series(series, name="series", min_length=3):
    """Validate a 1-d series of positive prices and return it as float64."""
    arr = check_array(series, ensure_2d=False, dtype=np.float64, input_name=name)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise ValueError(f"{name} needs at least {min_length} observations, got {arr.shape[0]}")
    if np.any(arr <= 0.0):
        bad = int(np.flatnonzero(arr <= 0.0)[0])
        raise ValueError(f"{name} must be positive; index {bad} is {arr[bad]!r}")
    return arr


def check_paired_prices(X, min_length=3):
    """Validate an ``(n, 2)`` array whose columns are (P, Z)."""
    arr = check_array(X, dtype=np.float64, input_name="X")
    if arr.shape[1] != 2:
        raise ValueError(f"X must have two columns (P, Z), got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise ValueError(f"X needs at least {min_length} rows, got {arr.shape[0]}")
    if np.any(arr <= 0.0):
        row = int(np.flatnonzero(np.any(arr <= 0.0, axis=1))[0])
        raise ValueError(f"prices must be positive; row {row} is {arr[row].tolist()}")
    return arr
