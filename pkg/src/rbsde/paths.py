"""Path-wise expectations on the lattice, by exhaustive enumeration or sampling.

Path functionals (running suprema, quadratic variations of ``Z``, pathwise
sums of ``dK``) do not live on the recombining lattice. They are estimated
over all ``2**N`` equally likely paths when that is affordable, otherwise
over uniformly drawn paths from an explicitly seeded generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from ._validation import check_positive, check_seed
from .exceptions import ConfigurationError, ModeError

__all__ = ["PathMode", "resolve_mode", "iter_paths", "path_mean", "path_log_mean"]

DEFAULT_ENUMERATION_CAP = 20
DEFAULT_N_PATHS = 4096
_CHUNK = 1 << 16


@dataclass(frozen=True)
class PathMode:
    """Resolved estimation mode: ``"exact"`` or ``"sampled"``."""

    kind: str
    n_paths: Optional[int] = None
    seed: Optional[int] = None

    def describe(self):
        if self.kind == "exact":
            return {"mode": "exact-enumeration"}
        return {"mode": "path-sampled", "n_paths": self.n_paths, "seed": self.seed}


def resolve_mode(lattice, mode="auto", n_paths=DEFAULT_N_PATHS, seed=None,
                 enumeration_cap=DEFAULT_ENUMERATION_CAP):
    """Turn a user-facing mode request into a PathMode for ``lattice``."""
    if isinstance(mode, PathMode):
        mode, n_paths, seed = mode.kind, mode.n_paths, mode.seed
    if mode == "auto":
        mode = "exact" if lattice.steps <= enumeration_cap else "sampled"
    if mode == "exact":
        if lattice.steps > enumeration_cap:
            raise ModeError(
                f"exact enumeration needs N <= {enumeration_cap}, lattice has N={lattice.steps}"
            )
        return PathMode("exact")
    if mode == "sampled":
        n_paths = check_positive(n_paths, "n_paths", integer=True, error=ConfigurationError)
        return PathMode("sampled", n_paths, check_seed(seed))
    raise ConfigurationError(f"unknown path mode {mode!r}")


def _flat_index(lattice, ups):
    """Flat node indices along paths given their up-move indicators."""
    n = lattice.steps
    j = np.zeros((ups.shape[0], n + 1), dtype=np.int64)
    np.cumsum(ups, axis=1, out=j[:, 1:])
    steps = np.arange(n + 1, dtype=np.int64)
    return steps * (steps + 1) // 2 + j


def iter_paths(lattice, mode, chunk=_CHUNK):
    """Yield ``(flat_idx, weight)`` blocks; ``flat_idx`` has shape ``(m, N+1)``."""
    n = lattice.steps
    if mode.kind == "exact":
        total = 1 << n
        weight = 2.0 ** -n
        bit = np.arange(n, dtype=np.int64)
        for start in range(0, total, chunk):
            k = np.arange(start, min(start + chunk, total), dtype=np.int64)
            ups = ((k[:, None] >> bit) & 1).astype(np.int8)
            yield _flat_index(lattice, ups), weight
    else:
        rng = np.random.default_rng(mode.seed)
        weight = 1.0 / mode.n_paths
        remaining = mode.n_paths
        while remaining > 0:
            m = min(chunk, remaining)
            ups = rng.integers(0, 2, size=(m, n), dtype=np.int8)
            remaining -= m
            yield _flat_index(lattice, ups), weight


def path_mean(lattice, mode, statistic):
    """Estimate ``E[statistic(path)]``; returns ``(mean, standard_error)``.

    ``statistic`` maps a ``(m, N+1)`` flat-index block to ``m`` values.
    """
    total = 0.0
    total_sq = 0.0
    count = 0
    for idx, w in iter_paths(lattice, mode):
        v = np.asarray(statistic(idx), dtype=float)
        total += w * v.sum()
        total_sq += w * np.square(v).sum()
        count += v.size
    if mode.kind == "exact":
        return total, 0.0
    var = max(total_sq - total**2, 0.0) * count / max(count - 1, 1)
    return total, math.sqrt(var / count)


def path_log_mean(lattice, mode, log_statistic):
    """``log E[exp(log_statistic(path))]`` accumulated in log space."""
    acc = -np.inf
    for idx, w in iter_paths(lattice, mode):
        v = np.asarray(log_statistic(idx), dtype=float)
        acc = np.logaddexp(acc, logsumexp(v) + math.log(w))
    return float(acc)
