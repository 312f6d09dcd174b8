"""Input checks shared by the estimators and public functions."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length


def check_frequency_targets(frequencies, values, fs: float):
    f = check_array(np.asarray(frequencies, dtype=float).reshape(-1, 1), ensure_min_samples=1).ravel()
    v = check_array(np.asarray(values, dtype=float).reshape(-1, 1), ensure_min_samples=1).ravel()
    check_consistent_length(f, v)
    if len(f) < 2:
        raise ValueError("need at least two target frequencies")
    if np.any(f <= 0) or np.any(f > fs / 2):
        raise ValueError("target frequencies must lie in (0, fs/2]")
    if np.any(v < 0) or np.any(v > 1):
        raise ValueError("absorption targets must lie in [0, 1]")
    return f, v


def check_knp(X) -> np.ndarray:
    """Validate a design table with columns (K, N, P)."""
    X = check_array(X, dtype=float)
    if X.shape[1] != 3:
        raise ValueError(f"expected columns (K, N, P), got {X.shape[1]} columns")
    if np.any(X < 1):
        raise ValueError("K, N and P must be >= 1")
    return X


def check_block(block, n_channels: int | None = None) -> np.ndarray:
    b = np.asarray(block, dtype=float)
    if n_channels is not None and (b.ndim != 2 or b.shape[0] != n_channels):
        raise ValueError(f"expected {n_channels} channels, got array of shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("audio block contains non-finite samples")
    return b
