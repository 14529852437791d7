"""Norm estimates, property checkers and penalization convergence metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .exceptions import PreconditionError, ShapeError
from .lattice import NodeField
from .paths import (
    DEFAULT_ENUMERATION_CAP,
    DEFAULT_N_PATHS,
    path_log_mean,
    path_mean,
    resolve_mode,
)
from .solvers import _as_field, snell_envelope

__all__ = [
    "NormReport",
    "ComparisonReport",
    "SkorokhodReport",
    "AprioriReport",
    "H7Report",
    "ConvergenceRow",
    "ConvergenceReport",
    "norms",
    "class_d_norm",
    "class_d_exhaustive",
    "check_comparison",
    "check_skorokhod",
    "check_apriori",
    "check_H7",
    "convergence_metrics",
]

EXHAUSTIVE_CAP = 4


def _normalize(raw, p):
    return raw ** min(1.0, 1.0 / p)


@dataclass(frozen=True)
class NormReport:
    sp: float
    mp_z: float
    k_moment: float
    class_d: float
    p: float
    mode: dict
    raw: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "p": self.p,
            "sp": self.sp,
            "mp_z": self.mp_z,
            "k_moment": self.k_moment,
            "class_d": self.class_d,
            "estimation": self.mode,
            "raw_moments": self.raw,
            "stderr": self.stderr,
        }


def class_d_norm(lattice, values):
    """``sup_tau E|Y_tau|``: the Snell envelope of ``|Y|`` at the root."""
    values = lattice.check_field(values, name="field")
    return float(snell_envelope(lattice, values.map(np.abs))[0][0])


def class_d_exhaustive(lattice, values, cap=EXHAUSTIVE_CAP):
    """Brute-force ``sup_tau E|Y_tau|`` over every stopping rule on the path tree.

    Each stopping rule either stops at the current node or continues and
    picks an independent rule in both subtrees, so rules are enumerated
    explicitly and the maximum is taken only at the root. Returns
    ``(value, n_rules)``.
    """
    values = lattice.check_field(values, name="field")
    n = lattice.steps
    if n > cap:
        raise PreconditionError(f"exhaustive stopping-time enumeration is capped at N <= {cap}")
    absval = [np.abs(layer) for layer in values]

    @lru_cache(maxsize=None)
    def rules(i, j):
        stop = [float(absval[i][j])]
        if i == n:
            return tuple(stop)
        down, up = rules(i + 1, j), rules(i + 1, j + 1)
        return tuple(stop + [0.5 * (a + b) for a in up for b in down])

    outcomes = rules(0, 0)
    return max(outcomes), len(outcomes)


def norms(solution, p=2.0, mode="auto", n_paths=DEFAULT_N_PATHS, seed=None,
          enumeration_cap=DEFAULT_ENUMERATION_CAP):
    """S^p, M^p, K-moment and class-(D) estimates for a solution."""
    if not p > 0:
        raise PreconditionError(f"norm order must be positive, got {p}")
    lat = solution.lattice
    pm = resolve_mode(lat, mode, n_paths, seed, enumeration_cap)
    n, h = lat.steps, lat.h
    y = np.abs(solution.Y.flat())
    z = solution.Z.flat()
    dk = solution.dK.flat()

    sp, sp_se = path_mean(lat, pm, lambda idx: y[idx].max(axis=1) ** p)
    mz, mz_se = path_mean(lat, pm, lambda idx: (h * np.square(z[idx[:, :n]]).sum(axis=1)) ** (p / 2))
    km, km_se = path_mean(lat, pm, lambda idx: np.abs(dk[idx[:, :n]].sum(axis=1)) ** p)
    return NormReport(
        sp=_normalize(sp, p),
        mp_z=_normalize(mz, p),
        k_moment=_normalize(km, p),
        class_d=class_d_norm(lat, solution.Y),
        p=float(p),
        mode=pm.describe(),
        raw={"sup_y": sp, "z_quadratic": mz, "k_terminal": km},
        stderr={"sup_y": sp_se, "z_quadratic": mz_se, "k_terminal": km_se},
    )


def _same_lattice(a, b):
    if a.steps != b.steps or a.horizon != b.horizon:
        raise ShapeError(
            f"solutions live on different lattices (N={a.steps}, T={a.horizon}) "
            f"vs (N={b.steps}, T={b.horizon})"
        )


@dataclass(frozen=True)
class ComparisonReport:
    n_violations: int
    worst: float
    nodes: tuple = ()

    @property
    def passed(self):
        return self.n_violations == 0

    def to_dict(self):
        return {"n_violations": self.n_violations, "worst": self.worst,
                "nodes": [list(n) for n in self.nodes]}


def check_comparison(sol_a, sol_b, tol=1e-9):
    """Report nodes where ``Y_a > Y_b + tol``."""
    _same_lattice(sol_a.lattice, sol_b.lattice)
    nodes = []
    worst = 0.0
    for i, (ya, yb) in enumerate(zip(sol_a.Y, sol_b.Y)):
        excess = ya - yb
        worst = max(worst, float(excess.max()))
        nodes.extend((i, int(j)) for j in np.flatnonzero(excess > tol))
    return ComparisonReport(len(nodes), worst, tuple(nodes))


@dataclass(frozen=True)
class SkorokhodReport:
    sum: float
    max_node_product: float
    barrier_violation: float
    tol: float

    @property
    def passed(self):
        return self.sum <= self.tol and self.barrier_violation <= self.tol

    def to_dict(self):
        return {"sum": self.sum, "max_node_product": self.max_node_product,
                "barrier_violation": self.barrier_violation, "tol": self.tol,
                "passed": self.passed}


def check_skorokhod(solution, tol=1e-12):
    """Minimality sum ``sum |Y - L| dK`` over nodes and the worst barrier breach."""
    if solution.barrier is None:
        raise PreconditionError("Skorokhod check needs a barrier-bearing solution")
    n = solution.lattice.steps
    total = 0.0
    worst_product = 0.0
    violation = 0.0
    for i in range(n + 1):
        gap = solution.Y[i] - solution.barrier[i]
        violation = max(violation, float(np.max(-gap)))
        if i < n:
            prod = np.abs(gap) * solution.dK[i]
            total += float(prod.sum())
            worst_product = max(worst_product, float(prod.max()))
    return SkorokhodReport(total, worst_product, max(violation, 0.0), tol)


def _driver_layers(instance, y_field, log_neg=False):
    """Evaluate ``f(t_i, y, 0)`` (or ``log f^-``) on layers ``0..N-1``."""
    lat = instance.lattice
    drv = instance.driver
    out = []
    for i in range(lat.steps):
        t, b = lat.time(i), lat.nodes[i]
        y = np.broadcast_to(y_field[i], b.shape)
        if log_neg:
            v = drv.neg_part_log(t, y, np.zeros_like(b), b)
        else:
            v = drv(t, y, np.zeros_like(b), b)
        out.append(np.broadcast_to(np.asarray(v, dtype=float), b.shape))
    return np.concatenate(out)


@dataclass(frozen=True)
class AprioriReport:
    lhs: float
    rhs: float
    ratio: float
    p: float
    terms: dict
    mode: dict

    @property
    def finite(self):
        return math.isfinite(self.ratio)

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "p": self.p,
                "finite": self.finite, "terms": self.terms, "estimation": self.mode}


def check_apriori(solution, instance, majorant, p=2.0, mode="auto", n_paths=DEFAULT_N_PATHS,
                  seed=None, enumeration_cap=DEFAULT_ENUMERATION_CAP):
    """Compare both sides of the a priori estimate for ``Z`` and ``K`` (weights ``a = 0``).

    The constant ``C(p, lambda, T)`` is unknown, so only the ratio
    ``lhs / rhs`` is reported.
    """
    if p < 1:
        raise PreconditionError(f"a priori check needs p >= 1, got {p}")
    lat = solution.lattice
    _same_lattice(lat, instance.lattice)
    x_field = _as_field(lat, majorant, "majorant")
    for i, (x, y) in enumerate(zip(x_field, solution.Y)):
        short = float(np.max(y - x))
        if short > solution.root_tol:
            raise PreconditionError(f"majorant is below Y by {short:g} on layer {i}")

    pm = resolve_mode(lat, mode, n_paths, seed, enumeration_cap)
    n, h = lat.steps, lat.h
    y = np.abs(solution.Y.flat())
    z = solution.Z.flat()
    dk = solution.dK.flat()
    f0 = np.abs(_driver_layers(instance, NodeField([np.zeros(i + 1) for i in range(n)])))
    fneg = np.maximum(-_driver_layers(instance, x_field), 0.0)

    terms = {
        "z_quadratic": path_mean(lat, pm, lambda idx: (h * np.square(z[idx[:, :n]]).sum(axis=1)) ** (p / 2))[0],
        "k_terminal": path_mean(lat, pm, lambda idx: dk[idx[:, :n]].sum(axis=1) ** p)[0],
        "sup_y": path_mean(lat, pm, lambda idx: y[idx].max(axis=1) ** p)[0],
        "f_zero": path_mean(lat, pm, lambda idx: (h * f0[idx[:, :n]].sum(axis=1)) ** p)[0],
        "f_neg_majorant": path_mean(lat, pm, lambda idx: (h * fneg[idx[:, :n]].sum(axis=1)) ** p)[0],
    }
    lhs = terms["z_quadratic"] + terms["k_terminal"]
    rhs = terms["sup_y"] + terms["f_zero"] + terms["f_neg_majorant"]
    if rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs == 0 else math.inf
    terms = {k: float(v) for k, v in terms.items()}
    return AprioriReport(float(lhs), float(rhs), float(ratio), float(p), terms, pm.describe())


@dataclass(frozen=True)
class H7Report:
    moment_estimate: float
    log_moment_estimate: float
    dominates: bool
    p: float
    mode: dict

    def to_dict(self):
        return {"moment_estimate": self.moment_estimate,
                "log_moment_estimate": self.log_moment_estimate,
                "dominates": self.dominates, "p": self.p, "estimation": self.mode}


def check_H7(instance, majorant, p=1.0, mode="auto", n_paths=DEFAULT_N_PATHS, seed=None,
             enumeration_cap=DEFAULT_ENUMERATION_CAP):
    """Majorant test: ``X >= L`` and ``E(sum_i f^-(t_i, X, 0) h)^p`` in log space.

    For ``p = 1`` the expectation is linear in the nodes and is computed
    exactly from the binomial node weights regardless of ``mode``.
    """
    lat = instance.lattice
    x_field = _as_field(lat, majorant, "majorant")
    barrier = instance.barrier_field
    dominates = True
    if barrier is not None:
        dominates = all(bool(np.all(x >= l)) for x, l in zip(x_field, barrier))
    n, log_h = lat.steps, math.log(lat.h)
    log_fneg = _driver_layers(instance, x_field, log_neg=True)

    if p == 1.0:
        log_w = np.concatenate([lat.log_probabilities(i) for i in range(n)])
        log_m = float(logsumexp(log_w + log_fneg)) + log_h
        described = {"mode": "exact-nodewise"}
    else:
        pm = resolve_mode(lat, mode, n_paths, seed, enumeration_cap)
        log_m = path_log_mean(
            lat, pm, lambda idx: p * (logsumexp(log_fneg[idx[:, :n]], axis=1) + log_h)
        )
        described = pm.describe()
    with np.errstate(over="ignore"):
        moment = float(np.exp(log_m))
    return H7Report(moment, log_m, dominates, float(p), described)


@dataclass(frozen=True)
class ConvergenceRow:
    penalty: float
    max_gap_y: float
    max_gap_z: float
    max_gap_k: float
    sup_y: float
    sup_k: float
    z_quadratic: float
    decreased: Optional[bool]

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class ConvergenceReport:
    p: float
    mode: dict
    rows: tuple
    monotone_violations: int
    tol: float

    @property
    def gaps_strictly_decreasing(self):
        return all(r.decreased for r in self.rows[1:])

    def to_dict(self):
        return {
            "p": self.p,
            "estimation": self.mode,
            "rows": [r.to_dict() for r in self.rows],
            "monotone_violations": self.monotone_violations,
            "gaps_strictly_decreasing": self.gaps_strictly_decreasing,
            "tol": self.tol,
        }


def _max_node_gap(a, b):
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))


def convergence_metrics(solutions, reference, p=2.0, mode="auto", n_paths=DEFAULT_N_PATHS,
                        seed=None, enumeration_cap=DEFAULT_ENUMERATION_CAP, tol=1e-9):
    """Per-level gaps between penalized solutions and the reflected reference.

    Path-wise quantities are ``E sup|Y^n - Y|^p``, ``E sup|K^n - K|^p``
    (pathwise cumulative sums of increments) and
    ``E (sum |Z^n - Z|^2 h)^(p/2)``.
    """
    lat = reference.lattice
    for s in solutions:
        _same_lattice(s.lattice, lat)
    pm = resolve_mode(lat, mode, n_paths, seed, enumeration_cap)
    n, h = lat.steps, lat.h
    y_ref, z_ref, dk_ref = reference.Y.flat(), reference.Z.flat(), reference.dK.flat()

    rows = []
    prev_gap = None
    for s in solutions:
        dy = s.Y.flat() - y_ref
        dz = s.Z.flat() - z_ref
        ddk = s.dK.flat() - dk_ref

        def sup_k(idx, ddk=ddk):
            path = np.cumsum(ddk[idx[:, :n]], axis=1)
            return np.abs(path).max(axis=1, initial=0.0) ** p

        gap = _max_node_gap(s.Y, reference.Y)
        rows.append(ConvergenceRow(
            penalty=s.penalty if s.penalty is not None else math.inf,
            max_gap_y=gap,
            max_gap_z=_max_node_gap(s.Z, reference.Z),
            max_gap_k=_max_node_gap(s.K, reference.K),
            sup_y=path_mean(lat, pm, lambda idx, dy=dy: np.abs(dy[idx]).max(axis=1) ** p)[0],
            sup_k=path_mean(lat, pm, sup_k)[0],
            z_quadratic=path_mean(
                lat, pm, lambda idx, dz=dz: (h * np.square(dz[idx[:, :n]]).sum(axis=1)) ** (p / 2)
            )[0],
            decreased=None if prev_gap is None else gap < prev_gap,
        ))
        prev_gap = gap

    violations = 0
    for a, b in zip(solutions, solutions[1:]):
        violations += sum(int(np.sum(ya > yb + tol)) for ya, yb in zip(a.Y, b.Y))
    return ConvergenceReport(float(p), pm.describe(), tuple(rows), violations, tol)
