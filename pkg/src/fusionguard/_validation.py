"""Input validation helpers shared by the functional and estimator APIs."""
from __future__ import annotations

import numpy as np


def check_measurements(values) -> np.ndarray:
    """Coerce one instant's readings to a finite float64 vector of shape (n,)."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d measurement vector, got shape {arr.shape}")
    if arr.size < 1:
        raise ValueError("measurement vector must contain at least one reading")
    if not np.all(np.isfinite(arr)):
        raise ValueError("measurement vector contains non-finite values")
    return arr


def check_measurement_matrix(X) -> np.ndarray:
    """Coerce a batch of readings to shape (n_samples, n_sensors), all finite."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d measurement matrix, got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise ValueError("measurement matrix must have at least one sensor column")
    if not np.all(np.isfinite(arr)):
        raise ValueError("measurement matrix contains non-finite values")
    return arr


def check_subset(subset, n_sensors: int) -> tuple[int, ...]:
    """Validate a 1-based sensor index set; returns it sorted."""
    items = tuple(subset)
    if len(items) == 0:
        raise ValueError("subset must not be empty")
    out = []
    for s in items:
        i = int(s)
        if i != s:
            raise ValueError(f"sensor index {s!r} is not an integer")
        if not 1 <= i <= n_sensors:
            raise ValueError(f"sensor index {i} out of range 1..{n_sensors}")
        out.append(i)
    if len(set(out)) != len(out):
        raise ValueError(f"subset {items!r} contains duplicate sensor indices")
    return tuple(sorted(out))


def check_noise_bounds(bounds) -> np.ndarray:
    """Per-sensor noise sup bounds: finite, nonnegative, shape (n,)."""
    arr = np.asarray(bounds, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("noise bounds must be a 1-d sequence with one entry per sensor")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("noise bounds must be finite and nonnegative")
    return arr
