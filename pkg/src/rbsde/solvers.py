"""Backward-induction solvers on the binomial lattice.

All schemes share one cell: ``Z`` is read off the next layer, the
conditional mean ``c`` is formed, and ``y`` solves the implicit equation
``y = c + h f(t, y, z) + dK``. The schemes differ only in ``dK``:

* plain: ``dK = 0``;
* penalized(n): ``dK = h n (y - L)^-``, folded into the same root find;
* reflected: ``y = max(y_hat, L)`` with ``dK = L - c - h f(t, L, z)`` on
  nodes where the barrier binds, the ``n -> inf`` limit of the penalized cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from ._validation import check_nonnegative
from .drivers import DEFAULT_ROOT_TOL, Driver, solve_cells
from .exceptions import ConfigurationError, DriverEvaluationError, InvalidSpecError, ShapeError
from .lattice import Lattice, NodeField, cond_expect, z_from_martingale

__all__ = [
    "Instance",
    "Solution",
    "solve_plain",
    "solve_penalized",
    "solve_reflected",
    "solve_snell",
    "snell_envelope",
    "accumulate_increments",
]


@dataclass(frozen=True)
class Instance:
    """Problem data: lattice, generator, terminal condition and barrier.

    ``xi(b)`` and ``barrier(t, b)`` are vectorised callables of the Brownian
    node value; ``barrier=None`` means no obstacle.
    """

    lattice: Lattice
    driver: Driver
    xi: Callable
    barrier: Optional[Callable] = None
    label: str = ""

    def __post_init__(self):
        self.driver.check_step_size(self.lattice.h)
        terminal = self.terminal_values
        if not np.all(np.isfinite(terminal)):
            raise InvalidSpecError(f"terminal condition of {self.label!r} is not finite")
        if self.barrier is not None:
            lt = self.barrier_field[self.lattice.steps]
            if np.any(lt > terminal):
                worst = float(np.max(lt - terminal))
                raise InvalidSpecError(
                    f"barrier exceeds terminal condition at maturity by {worst:g}"
                )

    @cached_property
    def terminal_values(self):
        n = self.lattice.steps
        return np.broadcast_to(
            np.asarray(self.xi(self.lattice.nodes[n]), dtype=float), (n + 1,)
        ).copy()

    @cached_property
    def barrier_field(self):
        if self.barrier is None:
            return None
        return self.lattice.evaluate(self.barrier)

    def require_barrier(self):
        if self.barrier is None:
            raise ConfigurationError(f"instance {self.label!r} has no barrier")
        return self.barrier_field


@dataclass(frozen=True)
class Solution:
    """Node-indexed ``(Y, Z, K)`` plus the per-node increments ``dK``.

    ``K`` is cumulative and stored under the conditional-mean convention:
    ``K(i, j)`` is the expected sum of increments along paths arriving at
    ``(i, j)``. ``dK(i, j)`` is the increment charged at node ``(i, j)``
    over the step ``i -> i + 1``.
    """

    lattice: Lattice
    Y: NodeField
    Z: NodeField
    K: NodeField
    dK: NodeField
    method: str
    penalty: Optional[float] = None
    root_tol: float = DEFAULT_ROOT_TOL
    barrier: Optional[NodeField] = field(default=None, repr=False)
    label: str = ""

    @property
    def value(self):
        return float(self.Y[0][0])

    @property
    def method_label(self):
        if self.method == "penalized":
            return f"penalized({self.penalty:g})"
        return self.method

    def metadata(self):
        return {
            "method": self.method,
            "penalty": self.penalty,
            "root_tol": self.root_tol,
            "steps": self.lattice.steps,
            "horizon": self.lattice.horizon,
            "label": self.label,
            "value": self.value,
        }


def accumulate_increments(lattice, dK):
    """Forward-average per-node increments into cumulative ``K``.

    Node ``(i+1, j)`` is reached from ``(i, j)`` with conditional
    probability ``(i+1-j)/(i+1)`` and from ``(i, j-1)`` with ``j/(i+1)``.
    """
    n = lattice.steps
    layers = [np.zeros(1)]
    for i in range(n):
        s = layers[i] + dK[i]
        j = np.arange(i + 1)
        nxt = np.zeros(i + 2)
        nxt[:-1] += s * (i + 1 - j) / (i + 1)
        nxt[1:] += s * (j + 1) / (i + 1)
        layers.append(nxt)
    return NodeField(layers)


def _backward(instance, penalty, reflect, root_tol, max_expand):
    lat = instance.lattice
    driver = instance.driver
    n = lat.steps
    h = lat.h
    barrier = instance.barrier_field
    Y = [None] * (n + 1)
    Z = [None] * n
    dK = [None] * n
    Y[n] = instance.terminal_values
    for i in range(n - 1, -1, -1):
        t = lat.time(i)
        b = lat.nodes[i]
        c = cond_expect(lat, Y[i + 1], i)
        z = z_from_martingale(lat, Y[i + 1], i)
        l = None if barrier is None else barrier[i]
        if reflect:
            y_hat = solve_cells(driver, t, c, z, b, h, root_tol=root_tol, max_expand=max_expand)
            binding = y_hat < l
            y = np.where(binding, l, y_hat)
            # residual of the unconstrained cell at the barrier; >= 0 by monotonicity
            f_l = np.asarray(driver.func(t, l, z, b), dtype=float)
            if not np.all(np.isfinite(f_l[binding])):
                raise DriverEvaluationError(
                    f"driver {driver.name!r} is not finite on the barrier at t={t}"
                )
            push = np.maximum(l - c - h * f_l, 0.0)
            inc = np.where(binding, push, 0.0)
        else:
            y = solve_cells(
                driver, t, c, z, b, h,
                penalty=penalty,
                barrier=l if penalty > 0 else None,
                root_tol=root_tol,
                max_expand=max_expand,
            )
            if penalty > 0 and l is not None:
                inc = h * penalty * np.maximum(l - y, 0.0)
            else:
                inc = np.zeros(i + 1)
        Y[i], Z[i], dK[i] = y, z, inc
    dK = NodeField(dK)
    return NodeField(Y), NodeField(Z), dK, accumulate_increments(lat, dK)


def solve_plain(instance, root_tol=DEFAULT_ROOT_TOL, max_expand=64):
    """Solve the BSDE without reflection (barrier ignored, ``K = 0``)."""
    Y, Z, dK, K = _backward(instance, 0.0, False, root_tol, max_expand)
    return Solution(instance.lattice, Y, Z, K, dK, "plain", None, root_tol,
                    instance.barrier_field, instance.label)


def solve_penalized(instance, penalty, root_tol=DEFAULT_ROOT_TOL, max_expand=64):
    """Solve the penalized BSDE with penalty level ``penalty``."""
    instance.require_barrier()
    penalty = check_nonnegative(penalty, "penalty", error=ConfigurationError)
    Y, Z, dK, K = _backward(instance, penalty, False, root_tol, max_expand)
    return Solution(instance.lattice, Y, Z, K, dK, "penalized", penalty, root_tol,
                    instance.barrier_field, instance.label)


def solve_reflected(instance, root_tol=DEFAULT_ROOT_TOL, max_expand=64):
    """Solve the reflected BSDE by projecting each implicit cell onto the barrier."""
    instance.require_barrier()
    Y, Z, dK, K = _backward(instance, 0.0, True, root_tol, max_expand)
    return Solution(instance.lattice, Y, Z, K, dK, "reflected", None, root_tol,
                    instance.barrier_field, instance.label)


def _as_field(lattice, obj, name):
    if isinstance(obj, NodeField):
        return lattice.check_field(obj, name=name)
    if callable(obj):
        return lattice.evaluate(obj)
    raise ShapeError(f"{name} must be a NodeField or a callable of (t, b)")


def snell_envelope(lattice, barrier, xi=None):
    """Discrete Snell envelope of ``barrier`` with terminal value ``xi``.

    ``barrier`` is a NodeField or a callable ``(t, b)``; ``xi`` is a terminal
    layer, a callable of ``b``, or ``None`` (use the barrier at maturity).
    """
    field_l = _as_field(lattice, barrier, "barrier")
    n = lattice.steps
    if xi is None:
        terminal = np.array(field_l[n])
    elif callable(xi):
        terminal = np.broadcast_to(np.asarray(xi(lattice.nodes[n]), dtype=float), (n + 1,)).copy()
    else:
        terminal = np.asarray(xi, dtype=float)
        if terminal.shape != (n + 1,):
            raise ShapeError(f"terminal layer must have length {n + 1}")
    R = [None] * (n + 1)
    R[n] = terminal
    for i in range(n - 1, -1, -1):
        R[i] = np.maximum(field_l[i], cond_expect(lattice, R[i + 1], i))
    return NodeField(R)


def solve_snell(instance, root_tol=DEFAULT_ROOT_TOL):
    """Snell envelope of the barrier as a Solution (the ``f = 0`` reflected problem).

    ``dK`` is the compensator increment ``R_i - E[R_{i+1} | node]``.
    """
    lat = instance.lattice
    R = snell_envelope(lat, instance.require_barrier(), instance.terminal_values)
    Z = NodeField(z_from_martingale(lat, R[i + 1], i) for i in range(lat.steps))
    dK = NodeField(R[i] - cond_expect(lat, R[i + 1], i) for i in range(lat.steps))
    return Solution(lat, R, Z, accumulate_increments(lat, dK), dK, "snell", None,
                    root_tol, instance.barrier_field, instance.label)
