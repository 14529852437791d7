"""Input validation helpers used across the estimator and functional APIs."""

from __future__ import annotations

import math
from numbers import Integral, Real

import numpy as np

from .exceptions import ConfigurationError, InvalidSpecError, ShapeError


def check_positive(value, name, *, integer=False, error=InvalidSpecError):
    if integer:
        if isinstance(value, bool) or not isinstance(value, Integral):
            raise error(f"{name} must be an integer, got {value!r}")
    elif isinstance(value, bool) or not isinstance(value, Real):
        raise error(f"{name} must be a real number, got {value!r}")
    if not math.isfinite(value) or value <= 0:
        raise error(f"{name} must be positive and finite, got {value!r}")
    return int(value) if integer else float(value)


def check_nonnegative(value, name, *, error=InvalidSpecError):
    if isinstance(value, bool) or not isinstance(value, Real):
        raise error(f"{name} must be a real number, got {value!r}")
    if not math.isfinite(value) or value < 0:
        raise error(f"{name} must be nonnegative and finite, got {value!r}")
    return float(value)


def check_layer(layer, length, name="layer"):
    """Return ``layer`` as a 1-d float array of the given length."""
    arr = np.asarray(layer, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != length:
        raise ShapeError(
            f"{name} must be a 1-d array of length {length}, got shape {arr.shape}"
        )
    return arr


def check_schedule(schedule):
    levels = [check_nonnegative(n, "penalty level") for n in schedule]
    if not levels:
        raise ConfigurationError("penalty schedule is empty")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigurationError(f"penalty schedule must be strictly increasing: {levels}")
    return levels


def check_seed(seed, *, required=True):
    if seed is None:
        if required:
            raise ConfigurationError("a seed is required whenever paths are sampled")
        return None
    if isinstance(seed, bool) or not isinstance(seed, Integral) or seed < 0:
        raise ConfigurationError(f"seed must be a nonnegative integer, got {seed!r}")
    return int(seed)


def broadcast_eval(func, *args, size=None):
    """Evaluate a vectorised callable and broadcast the result to ``size``."""
    out = np.asarray(func(*args), dtype=float)
    if size is not None:
        out = np.broadcast_to(out, (size,)).astype(float, copy=True)
    return out
