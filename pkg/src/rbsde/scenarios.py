"""Canonical instances: American put oracles and the two divergence counterexamples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from ._validation import check_nonnegative, check_positive
from .analysis import check_H7
from .drivers import counterexample5, counterexample7, driver_from_name, linear, put_discount
from .exceptions import InvalidSpecError, ParameterError
from .expr import compile_expression
from .lattice import LatticeSpec, build_lattice
from .paths import DEFAULT_N_PATHS, path_log_mean, path_mean, resolve_mode
from .solvers import Instance, solve_reflected

__all__ = [
    "SCENARIOS",
    "ScenarioSpec",
    "make_instance",
    "crr_oracle",
    "DivergenceRow",
    "DivergenceTable",
    "divergence_probe",
]

SCENARIOS = {
    "american_put": {
        "defaults": {"r": 0.05, "sigma": 0.2, "strike": 100.0, "S0": 100.0, "T": 1.0,
                     "N": 100, "tree": "crr"},
        "description": "American put as a reflected BSDE; tree='crr' reproduces the "
                       "Cox-Ross-Rubinstein dynamic program, tree='gbm' maps "
                       "S = S0 exp(sigma B + (r - sigma^2/2) t) with f = -r y.",
    },
    "linear_bsde": {
        "defaults": {"a": -0.5, "b": 0.25, "c": 0.1, "T": 1.0, "N": 16, "floor": 0.0},
        "description": "f = a y + b z + c, xi = max(B_T, floor), barrier L = floor "
                       "(floor=null removes the barrier and sets xi = B_T).",
    },
    "counterexample5": {
        "defaults": {"T": 1.0, "N": 8},
        "description": "f = -(y - (T - t))^+ exp(B_t^4), L = T - t, xi = 0: integrable "
                       "solution although f^- along the running-maximum majorant is not integrable.",
    },
    "counterexample7": {
        "defaults": {"T": 1.0, "N": 8},
        "description": "f = -y^+ exp(B_t^4), L = 1, xi = 1: bounded Y with E K_T^q "
                       "infinite for every q > 0.",
    },
    "custom": {
        "defaults": {"T": 1.0, "N": 16, "driver": "linear(0,0,0)", "xi": "0",
                     "barrier": None},
        "description": "Catalogue driver by name with barrier(t, b) and xi(b) given as "
                       "arithmetic expressions.",
    },
}


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    params: dict = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise InvalidSpecError(f"unknown scenario kind {self.kind!r}; "
                                   f"available: {sorted(SCENARIOS)}")
        unknown = set(self.params) - set(SCENARIOS[self.kind]["defaults"])
        if unknown:
            raise InvalidSpecError(f"unknown parameters for {self.kind}: {sorted(unknown)}")

    @property
    def resolved(self):
        return {**SCENARIOS[self.kind]["defaults"], **self.params}


def _lattice(params):
    return build_lattice(LatticeSpec(params["T"], params["N"]))


def _american_put(params):
    r = check_nonnegative(params["r"], "r")
    sigma = check_positive(params["sigma"], "sigma")
    strike = check_positive(params["strike"], "strike")
    s0 = check_positive(params["S0"], "S0")
    lat = _lattice(params)
    h = lat.h
    tree = params["tree"]
    if tree == "crr":
        u = math.exp(sigma * math.sqrt(h))
        d = 1.0 / u
        q = (math.exp(r * h) - d) / (u - d)
        if not 0.0 <= q <= 1.0:
            raise ParameterError(f"risk-neutral probability {q} outside [0, 1]")
        # y e^{rh} = q Y_up + (1-q) Y_down, written as the implicit cell y = c + h f(y, z)
        driver = linear(-math.expm1(r * h) / h, (2.0 * q - 1.0) / math.sqrt(h), 0.0)

        def stock(t, b):
            return s0 * np.exp(sigma * b)
    elif tree == "gbm":
        driver = put_discount(r)

        def stock(t, b):
            return s0 * np.exp(sigma * b + (r - 0.5 * sigma**2) * t)
    else:
        raise InvalidSpecError(f"american_put tree must be 'crr' or 'gbm', got {tree!r}")

    def barrier(t, b):
        return np.maximum(strike - stock(t, b), 0.0)

    def xi(b):
        return barrier(lat.horizon, b)

    return Instance(lat, driver, xi, barrier, label=f"american_put[{tree}]")


def _linear_bsde(params):
    lat = _lattice(params)
    driver = linear(params["a"], params["b"], params["c"])
    floor = params["floor"]
    if floor is None:
        return Instance(lat, driver, lambda b: np.asarray(b, dtype=float), None, "linear_bsde")
    floor = float(floor)
    return Instance(
        lat, driver,
        lambda b: np.maximum(b, floor),
        lambda t, b: np.full(np.shape(b), floor),
        "linear_bsde",
    )


def _counterexample5(params):
    lat = _lattice(params)
    T = lat.horizon
    return Instance(
        lat, counterexample5(T),
        lambda b: np.zeros(np.shape(b)),
        lambda t, b: np.full(np.shape(b), T - t),
        "counterexample5",
    )


def _counterexample7(params):
    lat = _lattice(params)
    return Instance(
        lat, counterexample7(),
        lambda b: np.ones(np.shape(b)),
        lambda t, b: np.ones(np.shape(b)),
        "counterexample7",
    )


def _custom(params):
    lat = _lattice(params)
    driver = driver_from_name(params["driver"], horizon=lat.horizon)
    xi_expr = compile_expression(str(params["xi"]))
    barrier = None
    if params.get("barrier") is not None:
        b_expr = compile_expression(str(params["barrier"]))

        def barrier(t, b):
            return b_expr(t=t, b=b)

    def xi(b):
        return xi_expr(t=lat.horizon, b=b)

    return Instance(lat, driver, xi, barrier, "custom")


_BUILDERS = {
    "american_put": _american_put,
    "linear_bsde": _linear_bsde,
    "counterexample5": _counterexample5,
    "counterexample7": _counterexample7,
    "custom": _custom,
}


def make_instance(spec, **params):
    """Build the Instance for a scenario spec (or kind name plus overrides)."""
    if not isinstance(spec, ScenarioSpec):
        spec = ScenarioSpec(spec, params)
    return _BUILDERS[spec.kind](spec.resolved)


def crr_oracle(r, sigma, strike, S0, T, N):
    """American put price by Cox-Ross-Rubinstein backward induction.

    Kept free of any lattice or solver code so it can serve as an
    independent check on the reflected BSDE solver.
    """
    if sigma <= 0 or strike <= 0 or S0 <= 0 or T <= 0 or int(N) != N or N < 1:
        raise ParameterError("crr_oracle needs sigma, strike, S0, T > 0 and integer N >= 1")
    N = int(N)
    dt = T / N
    u = math.exp(sigma * math.sqrt(dt))
    d = 1.0 / u
    q = (math.exp(r * dt) - d) / (u - d)
    if not 0.0 <= q <= 1.0:
        raise ParameterError(f"risk-neutral probability {q} outside [0, 1]")
    disc = math.exp(-r * dt)
    k = np.arange(N + 1)
    values = np.maximum(strike - S0 * u ** (2 * k - N), 0.0)
    for i in range(N - 1, -1, -1):
        k = np.arange(i + 1)
        cont = disc * (q * values[1:] + (1.0 - q) * values[:-1])
        values = np.maximum(cont, strike - S0 * u ** (2 * k - i))
    return float(values[0])


@dataclass(frozen=True)
class DivergenceRow:
    steps: int
    log_value: float
    log_ratio: Optional[float]
    y_s2: Optional[float] = None

    @property
    def value(self):
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_value))

    def to_dict(self):
        return {"steps": self.steps, "log_value": self.log_value, "value": self.value,
                "log_ratio": self.log_ratio, "y_s2": self.y_s2}


@dataclass(frozen=True)
class DivergenceTable:
    kind: str
    order: float
    rows: tuple
    quantity: str

    @property
    def strictly_increasing(self):
        return all(r.log_ratio > 0 for r in self.rows[1:])

    @property
    def log_growth(self):
        """Log of the end-to-end growth factor (0 for a single row)."""
        return self.rows[-1].log_value - self.rows[0].log_value

    @property
    def growth_flag(self):
        return len(self.rows) > 1 and self.strictly_increasing

    def to_dict(self):
        return {"kind": self.kind, "order": self.order, "quantity": self.quantity,
                "rows": [r.to_dict() for r in self.rows],
                "strictly_increasing": self.strictly_increasing if len(self.rows) > 1 else None,
                "log_growth": self.log_growth, "growth_flag": self.growth_flag}


def divergence_probe(kind, schedule, order=1.0, horizon=1.0, enumeration_cap=24,
                     n_paths=DEFAULT_N_PATHS, seed=None):
    """Refinement sweep for a counterexample.

    * ``counterexample5``: ``E(sum_i f^-(t_i, T, 0) h)^order`` with the
      deterministic majorant ``X = T``.
    * ``counterexample7``: ``E K_T^order`` from the reflected solution, plus
      the S^2 estimate of ``Y``.

    Magnitudes are carried as logarithms throughout.
    """
    schedule = [check_positive(n, "N", integer=True) for n in schedule]
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise InvalidSpecError(f"N schedule must be increasing: {schedule}")
    order = check_positive(order, "order")
    rows = []
    for n in schedule:
        spec = ScenarioSpec(kind, {"T": horizon, "N": n})
        inst = make_instance(spec)
        lat = inst.lattice
        y_s2 = None
        if kind == "counterexample5":
            T = lat.horizon
            rep = check_H7(inst, lambda t, b: np.full(np.shape(b), T), p=order,
                           mode="auto", n_paths=n_paths, seed=seed,
                           enumeration_cap=enumeration_cap)
            log_value = rep.log_moment_estimate
        elif kind == "counterexample7":
            sol = solve_reflected(inst)
            pm = resolve_mode(lat, "auto", n_paths, seed, enumeration_cap)
            with np.errstate(divide="ignore"):
                log_dk = np.log(sol.dK.flat())
            if order == 1.0:
                # linear in the increments: exact from node weights
                log_w = np.concatenate([lat.log_probabilities(i) for i in range(n)])
                log_value = float(logsumexp(log_w + log_dk[: log_w.size]))
            else:
                log_value = path_log_mean(
                    lat, pm, lambda idx: order * logsumexp(log_dk[idx[:, :n]], axis=1)
                )
            y = np.abs(sol.Y.flat())
            y_s2 = math.sqrt(path_mean(lat, pm, lambda idx: y[idx].max(axis=1) ** 2)[0])
        else:
            raise InvalidSpecError(f"divergence probes exist for counterexample5/7, not {kind!r}")
        ratio = None if not rows else log_value - rows[-1].log_value
        rows.append(DivergenceRow(n, float(log_value), ratio, y_s2))
    quantity = ("E(sum f^-(t, T, 0) h)^p" if kind == "counterexample5" else "E K_T^q")
    return DivergenceTable(kind, order, tuple(rows), quantity)
