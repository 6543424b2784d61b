"""Input validation helpers shared by the data, estimator and simulation layers."""

from __future__ import annotations

import numbers

import numpy as np


class ValidationError(ValueError):
    """Raised when user-supplied data or configuration is malformed."""


class InvariantError(ValueError):
    """Raised when a structure violates one of its own invariants."""


def check_arm(z) -> int:
    if isinstance(z, (bool, np.bool_)) or not isinstance(z, numbers.Integral) or z not in (0, 1):
        raise ValidationError(f"arm must be 0 or 1, got {z!r}")
    return int(z)


def check_binary_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional")
    if arr.size and not np.all(np.isin(arr, (0, 1))):
        bad = arr[~np.isin(arr, (0, 1))][0]
        raise ValidationError(f"{name} must be binary (0/1), found {bad!r}")
    return arr.astype(np.int8)


def check_probability(p, name: str) -> float:
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number, got {p!r}") from None
    if not 0.0 <= p <= 1.0 or np.isnan(p):
        raise ValidationError(f"{name} must lie in [0, 1], got {p}")
    return p


def check_probability_array(values, name: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be numeric") from None
    if np.isnan(arr).any() or (arr < 0).any() or (arr > 1).any():
        idx = tuple(int(k) for k in np.argwhere(~((arr >= 0) & (arr <= 1)))[0])
        raise ValidationError(f"{name}{list(idx)} must lie in [0, 1], got {arr[idx]}")
    return arr


def check_increasing(times, name: str = "times") -> np.ndarray:
    arr = np.asarray(times, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise ValidationError(f"{name} must be strictly increasing")
    return arr
