"""Input validation helpers shared by estimators and library functions."""

import numpy as np


def as_matrix(a, name="matrix"):
    """Coerce to a finite 2-D float array."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_vector(x, length=None, name="vector"):
    """Coerce to a finite 1-D float array, optionally of fixed length."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        arr = np.ravel(arr)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {arr.shape[0]}")
    return arr


def check_positive(value, name):
    """Require a finite scalar > 0 and return it as float."""
    v = float(value)
    if not np.isfinite(v) or v <= 0.0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return v


def check_exponent(q):
    """Require q in (0, 1]."""
    q = float(q)
    if not (0.0 < q <= 1.0):
        raise ValueError(f"exponent q must lie in (0, 1], got {q!r}")
    return q


def check_support(support, n_cols, name="support"):
    """Validate a set of column indices; returns a sorted unique int array."""
    idx = np.unique(np.asarray(support, dtype=int))
    if idx.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if idx.min() < 0 or idx.max() >= n_cols:
        raise ValueError(f"{name} indices must lie in [0, {n_cols})")
    return idx
