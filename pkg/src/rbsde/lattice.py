"""Recombining binomial model of one-dimensional Brownian motion.

Node ``(i, j)`` sits at time ``i * h`` with value ``(2j - i) * sqrt(h)``;
moving from ``(i, j)`` to ``(i + 1, j + 1)`` is an up-move and to
``(i + 1, j)`` a down-move, each with probability one half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from ._validation import check_layer, check_positive
from .exceptions import ShapeError

__all__ = [
    "LatticeSpec",
    "Lattice",
    "NodeField",
    "build_lattice",
    "cond_expect",
    "z_from_martingale",
]


@dataclass(frozen=True)
class LatticeSpec:
    """Time horizon and number of steps; the step size is derived."""

    horizon: float
    steps: int

    def __post_init__(self):
        object.__setattr__(self, "horizon", check_positive(self.horizon, "horizon"))
        object.__setattr__(self, "steps", check_positive(self.steps, "steps", integer=True))

    @property
    def step_size(self):
        return self.horizon / self.steps


class NodeField:
    """Immutable layered array holding one real value per lattice node.

    Layer ``i`` has ``i + 1`` entries. A field may have fewer layers than
    the lattice has steps (``Z`` lives on steps ``0..N-1``).
    """

    __slots__ = ("_layers",)

    def __init__(self, layers):
        frozen = []
        for i, layer in enumerate(layers):
            arr = check_layer(layer, i + 1, name=f"layer {i}").copy()
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"layer {i} contains non-finite values")
            arr.flags.writeable = False
            frozen.append(arr)
        if not frozen:
            raise ShapeError("a node field needs at least one layer")
        self._layers = tuple(frozen)

    @classmethod
    def from_flat(cls, flat, n_layers):
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (n_layers * (n_layers + 1) // 2,):
            raise ShapeError(f"flat array of shape {flat.shape} cannot hold {n_layers} layers")
        return cls(flat[_offset(i):_offset(i + 1)] for i in range(n_layers))

    def __len__(self):
        return len(self._layers)

    def __getitem__(self, i):
        return self._layers[i]

    def __iter__(self):
        return iter(self._layers)

    def __repr__(self):
        return f"NodeField(n_layers={len(self)})"

    def flat(self):
        """Concatenate layers; node ``(i, j)`` lands at ``i*(i+1)/2 + j``."""
        return np.concatenate(self._layers)

    def map(self, func):
        return NodeField(func(layer) for layer in self._layers)

    def equals(self, other):
        return len(self) == len(other) and all(
            np.array_equal(a, b) for a, b in zip(self, other)
        )


def _offset(i):
    return i * (i + 1) // 2


@dataclass(frozen=True)
class Lattice:
    spec: LatticeSpec
    nodes: NodeField

    @property
    def steps(self):
        return self.spec.steps

    @property
    def horizon(self):
        return self.spec.horizon

    @property
    def h(self):
        return self.spec.step_size

    @cached_property
    def sqrt_h(self):
        return math.sqrt(self.h)

    @cached_property
    def times(self):
        """Grid times ``t_i = i * h`` with the last point pinned to ``T``."""
        t = np.arange(self.steps + 1) * self.h
        t[-1] = self.horizon
        return t

    def time(self, i):
        return float(self.times[i])

    def evaluate(self, func, n_layers=None):
        """Sample a vectorised ``func(t, b)`` on every node."""
        n_layers = self.steps + 1 if n_layers is None else n_layers
        return NodeField(
            np.broadcast_to(
                np.asarray(func(self.time(i), self.nodes[i]), dtype=float), (i + 1,)
            )
            for i in range(n_layers)
        )

    def probabilities(self, i):
        """Binomial arrival probabilities of the nodes in layer ``i``."""
        j = np.arange(i + 1)
        log_p = gammaln(i + 1) - gammaln(j + 1) - gammaln(i - j + 1) - i * math.log(2.0)
        return np.exp(log_p)

    def log_probabilities(self, i):
        j = np.arange(i + 1)
        return gammaln(i + 1) - gammaln(j + 1) - gammaln(i - j + 1) - i * math.log(2.0)

    def check_field(self, field, n_layers=None, name="field"):
        n_layers = self.steps + 1 if n_layers is None else n_layers
        if len(field) != n_layers:
            raise ShapeError(f"{name} has {len(field)} layers, expected {n_layers}")
        return field


def build_lattice(spec, steps=None):
    """Build the binomial lattice for ``spec``.

    ``build_lattice(T, N)`` is accepted as a shorthand for
    ``build_lattice(LatticeSpec(T, N))``.
    """
    if not isinstance(spec, LatticeSpec):
        spec = LatticeSpec(spec, steps)
    sqrt_h = math.sqrt(spec.step_size)
    nodes = NodeField(
        (2 * np.arange(i + 1) - i) * sqrt_h for i in range(spec.steps + 1)
    )
    return Lattice(spec, nodes)


def _check_step(lattice, nxt, i):
    if not 0 <= i < lattice.steps:
        raise ShapeError(f"step index {i} outside 0..{lattice.steps - 1}")
    return check_layer(nxt, i + 2, name=f"layer {i + 1}")


def cond_expect(lattice, nxt, i):
    """One-step conditional expectation of the step ``i + 1`` layer ``nxt``."""
    nxt = _check_step(lattice, nxt, i)
    return 0.5 * (nxt[1:] + nxt[:-1])


def z_from_martingale(lattice, nxt, i):
    """Martingale-representation density ``E[next * dB | node] / h``."""
    nxt = _check_step(lattice, nxt, i)
    return (nxt[1:] - nxt[:-1]) / (2.0 * lattice.sqrt_h)
