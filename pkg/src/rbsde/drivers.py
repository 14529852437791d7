"""Generators ``f(t, y, z)`` of the backward equation and the implicit cell solve.

Every driver callable has the signature ``func(t, y, z, b)`` and must accept
numpy arrays for ``y``, ``z`` and ``b`` (``b`` is the Brownian node value, so
drivers may be functionals of ``(t, B_t)``).
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import check_nonnegative, check_positive
from .exceptions import (
    ConfigurationError,
    DriverEvaluationError,
    InvalidSpecError,
    NoRootError,
    PreconditionError,
)

__all__ = [
    "ConditionZ",
    "ConditionA",
    "Driver",
    "StepProblem",
    "ProbeReport",
    "implicit_step",
    "solve_cells",
    "probe_H2",
    "probe_H3",
    "probe_condition_Z",
    "probe_condition_A",
    "DEFAULT_BOX",
    "driver_from_name",
    "linear",
    "put_discount",
    "powerz",
    "counterexample5",
    "counterexample7",
    "DRIVER_CATALOGUE",
]

DEFAULT_ROOT_TOL = 1e-12
DEFAULT_PROBE_TOL = 1e-9
KNOWN_FLAGS = frozenset({"H2", "H3", "H4", "H5", "Z", "A"})


def _zero(t):
    return 0.0


@dataclass(frozen=True)
class ConditionZ:
    """Sublinear z-growth ``|f(t,y,z) - f(t,y,0)| <= gamma (g_t + |y| + |z|)**alpha``."""

    alpha: float
    gamma: float
    g: Callable = _zero

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidSpecError(f"alpha must lie in (0, 1), got {self.alpha}")
        check_nonnegative(self.gamma, "gamma")


@dataclass(frozen=True)
class ConditionA:
    """Sign-weighted growth ``sign(y) f(t,y,z) <= f_t + mu |y| + lam |z|``."""

    mu: float
    lam: float
    bound: Callable = _zero

    def __post_init__(self):
        check_nonnegative(self.lam, "lam")


@dataclass(frozen=True)
class Driver:
    """Generator with its declared structural constants.

    Parameters
    ----------
    func : callable
        Vectorised ``func(t, y, z, b)``.
    mu : float
        One-sided Lipschitz (monotonicity) constant in ``y``.
    lam : float
        Lipschitz constant in ``z``.
    cond_z, cond_a : optional
        Constants of the sublinear-z and sign-growth conditions.
    flags : frozenset of str
        Hypotheses the driver is declared to satisfy.
    log_neg : callable, optional
        ``log f^-(t, y, z, b)`` evaluated without forming ``f``; used by
        divergence probes whose drivers overflow in linear space.
    """

    func: Callable
    mu: float = 0.0
    lam: float = 0.0
    cond_z: Optional[ConditionZ] = None
    cond_a: Optional[ConditionA] = None
    flags: frozenset = frozenset()
    name: str = "custom"
    log_neg: Optional[Callable] = None

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise InvalidSpecError(f"mu must be finite, got {self.mu}")
        check_nonnegative(self.lam, "lam")
        flags = frozenset(self.flags)
        unknown = flags - KNOWN_FLAGS
        if unknown:
            raise InvalidSpecError(f"unknown hypothesis flags {sorted(unknown)}")
        object.__setattr__(self, "flags", flags)

    def __call__(self, t, y, z=0.0, b=0.0):
        return self.func(t, y, z, b)

    def neg_part_log(self, t, y, z=0.0, b=0.0):
        """``log f^-`` at the given points (``-inf`` where ``f >= 0``)."""
        if self.log_neg is not None:
            return np.asarray(self.log_neg(t, y, z, b), dtype=float)
        f = np.asarray(self.func(t, y, z, b), dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(-f, 0.0))

    def check_step_size(self, h):
        """Reject step sizes for which the implicit cell may have several roots."""
        if h * max(self.mu, 0.0) >= 1.0:
            raise PreconditionError(
                f"step size h={h} violates h*max(mu,0) < 1 for mu={self.mu}"
            )


@dataclass(frozen=True)
class StepProblem:
    """One implicit cell: find ``y = c + h f(t,y,z) + h n (y - l)^-``."""

    t: float
    c: float
    z: float
    h: float
    penalty: float = 0.0
    barrier: Optional[float] = None
    b: float = 0.0

    def __post_init__(self):
        check_positive(self.h, "h")
        check_nonnegative(self.penalty, "penalty")


def implicit_step(driver, problem, root_tol=DEFAULT_ROOT_TOL, max_expand=64):
    """Solve a single implicit backward-Euler cell.

    Returns the unique root of
    ``phi(y) = y - h f(t,y,z) - h n (y - l)^- - c``.
    """
    driver.check_step_size(problem.h)
    barrier = None if problem.barrier is None else np.array([problem.barrier], dtype=float)
    root = solve_cells(
        driver,
        problem.t,
        np.array([problem.c], dtype=float),
        np.array([problem.z], dtype=float),
        np.array([problem.b], dtype=float),
        problem.h,
        penalty=problem.penalty,
        barrier=barrier,
        root_tol=root_tol,
        max_expand=max_expand,
    )
    return float(root[0])


# Bisection runs on the total order of IEEE doubles: halving the ordinal
# distance terminates in at most 64 steps even for brackets spanning many
# orders of magnitude (steep drivers push roots towards 1e-250).
_MAGNITUDE = np.int64(0x7FFFFFFFFFFFFFFF)


def _to_ordinal(x):
    bits = np.ascontiguousarray(x, dtype=np.float64).view(np.int64)
    return np.where(bits < 0, -(bits & _MAGNITUDE), bits)


def _from_ordinal(k):
    mag = np.abs(k).astype(np.int64).view(np.float64)
    return np.where(k < 0, -mag, mag)


def _mid_ordinal(lo, hi):
    return lo // 2 + hi // 2 + ((lo % 2) + (hi % 2)) // 2


def solve_cells(
    driver,
    t,
    c,
    z,
    b,
    h,
    penalty=0.0,
    barrier=None,
    root_tol=DEFAULT_ROOT_TOL,
    max_expand=64,
    max_iter=200,
):
    """Vectorised implicit cell solve over a layer of nodes.

    The bracket is grown geometrically around ``c`` and then bisected until
    ``|phi| <= root_tol`` or the bracket collapses onto two adjacent doubles,
    in which case the endpoint with the smaller residual is returned.
    """
    c = np.asarray(c, dtype=float)
    m = c.shape[0]
    z = np.broadcast_to(np.asarray(z, dtype=float), (m,))
    b = np.broadcast_to(np.asarray(b, dtype=float), (m,))
    use_penalty = barrier is not None and penalty > 0
    if use_penalty:
        barrier = np.broadcast_to(np.asarray(barrier, dtype=float), (m,))
    hn = h * penalty

    def phi(y, idx):
        f = np.asarray(driver.func(t, y, z[idx], b[idx]), dtype=float)
        f = np.broadcast_to(f, y.shape)
        if not np.all(np.isfinite(f)):
            bad = int(np.flatnonzero(~np.isfinite(f))[0])
            raise DriverEvaluationError(
                f"driver {driver.name!r} returned {f[bad]} at t={t}, "
                f"y={y[bad]}, z={z[idx][bad]}, b={b[idx][bad]}"
            )
        r = y - h * f - c[idx]
        if use_penalty:
            r = r - hn * np.maximum(barrier[idx] - y, 0.0)
        return r

    if not np.all(np.isfinite(c)):
        raise DriverEvaluationError("non-finite conditional expectation in cell solve")

    all_idx = np.arange(m)
    root = c.copy()
    r0 = phi(root, all_idx)
    open_idx = all_idx[np.abs(r0) > root_tol]
    if open_idx.size == 0:
        return root

    # Bracket: phi is increasing, so the root lies below c iff phi(c) > 0.
    above = r0[open_idx] > 0
    lo = c[open_idx].copy()
    hi = c[open_idx].copy()
    phi_lo = r0[open_idx].copy()
    phi_hi = r0[open_idx].copy()
    delta = np.abs(r0[open_idx])
    bracketed = np.zeros(open_idx.size, dtype=bool)
    for _ in range(max_expand + 1):
        pending = np.flatnonzero(~bracketed)
        if pending.size == 0:
            break
        sgn = np.where(above[pending], -1.0, 1.0)
        trial = c[open_idx[pending]] + sgn * delta[pending]
        if not np.all(np.isfinite(trial)):
            break
        r = phi(trial, open_idx[pending])
        up = above[pending]
        # root below c: trial becomes lo once phi(trial) <= 0
        ok_below = up & (r <= 0)
        ok_above = ~up & (r >= 0)
        still_below = up & (r > 0)
        still_above = ~up & (r < 0)
        sel = pending[ok_below]
        lo[sel], phi_lo[sel] = trial[ok_below], r[ok_below]
        sel = pending[ok_above]
        hi[sel], phi_hi[sel] = trial[ok_above], r[ok_above]
        sel = pending[still_below]
        hi[sel], phi_hi[sel] = trial[still_below], r[still_below]
        sel = pending[still_above]
        lo[sel], phi_lo[sel] = trial[still_above], r[still_above]
        bracketed[pending[ok_below | ok_above]] = True
        delta[pending] *= 2.0
    if not np.all(bracketed):
        bad = open_idx[np.flatnonzero(~bracketed)[0]]
        raise NoRootError(
            f"could not bracket implicit cell root for driver {driver.name!r} at t={t}, "
            f"c={c[bad]} after {max_expand} doublings (mu misdeclared or h too large?)"
        )

    lo_o = _to_ordinal(lo)
    hi_o = _to_ordinal(hi)
    result = np.where(np.abs(phi_lo) <= np.abs(phi_hi), lo, hi)
    live = (np.abs(phi_lo) > root_tol) & (np.abs(phi_hi) > root_tol)
    for _ in range(max_iter):
        act = np.flatnonzero(live & (hi_o - 1 > lo_o))
        if act.size == 0:
            break
        mid_o = _mid_ordinal(lo_o[act], hi_o[act])
        mid = _from_ordinal(mid_o)
        r = phi(mid, open_idx[act])
        hit = np.abs(r) <= root_tol
        result[act[hit]] = mid[hit]
        live[act[hit]] = False
        go_up = r < 0
        sel = act[go_up]
        lo_o[sel], phi_lo[sel] = mid_o[go_up], r[go_up]
        sel = act[~go_up]
        hi_o[sel], phi_hi[sel] = mid_o[~go_up], r[~go_up]
    # collapsed brackets: closest double to the root
    stuck = np.flatnonzero(live)
    if stuck.size:
        lo_v = _from_ordinal(lo_o[stuck])
        hi_v = _from_ordinal(hi_o[stuck])
        result[stuck] = np.where(
            np.abs(phi_lo[stuck]) <= np.abs(phi_hi[stuck]), lo_v, hi_v
        )
    root[open_idx] = result
    return root


# --------------------------------------------------------------------------
# hypothesis probes

DEFAULT_BOX = {"t": (0.0, 1.0), "y": (-5.0, 5.0), "z": (-5.0, 5.0), "b": (-2.0, 2.0)}


@dataclass(frozen=True)
class ProbeReport:
    hypothesis: str
    n_samples: int
    n_violations: int
    worst_excess: float
    worst_ratio: Optional[float]
    violations: tuple = field(default=(), repr=False)

    @property
    def passed(self):
        return self.n_violations == 0

    def to_dict(self):
        return {
            "hypothesis": self.hypothesis,
            "n_samples": self.n_samples,
            "n_violations": self.n_violations,
            "worst_excess": self.worst_excess,
            "worst_ratio": self.worst_ratio,
            "violations": list(self.violations),
        }


def _sample(box, names, n, seed):
    box = {**DEFAULT_BOX, **(box or {})}
    rng = np.random.default_rng(seed)
    out = {}
    for name in names:
        key = name.rstrip("'")
        lo, hi = box[key]
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
            raise PreconditionError(f"probe box for {key!r} must be finite, got {(lo, hi)}")
        out[name] = rng.uniform(lo, hi, size=n)
    return out


def _report(name, samples, excess, ratio, tol_scale, tol):
    bad = excess > tol * tol_scale
    cols = list(samples)
    violations = tuple(
        {**{k: float(samples[k][i]) for k in cols}, "excess": float(excess[i])}
        for i in np.flatnonzero(bad)
    )
    worst_ratio = None
    if ratio is not None:
        finite = ratio[np.isfinite(ratio)]
        worst_ratio = float(finite.max()) if finite.size else None
    return ProbeReport(
        hypothesis=name,
        n_samples=int(excess.size),
        n_violations=int(bad.sum()),
        worst_excess=float(excess.max()) if excess.size else 0.0,
        worst_ratio=worst_ratio,
        violations=violations,
    )


def _ev(driver, t, y, z, b):
    return np.broadcast_to(np.asarray(driver.func(t, y, z, b), dtype=float), y.shape)


def probe_H3(driver, sample_count=10_000, box=None, seed=0, tol=DEFAULT_PROBE_TOL):
    """Sample the monotonicity inequality against the declared ``mu``."""
    s = _sample(box, ["t", "y", "y'", "z", "b"], sample_count, seed)
    dy = s["y"] - s["y'"]
    lhs = (_ev(driver, s["t"], s["y"], s["z"], s["b"])
           - _ev(driver, s["t"], s["y'"], s["z"], s["b"])) * dy
    rhs = driver.mu * dy**2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dy != 0, lhs / dy**2, np.nan)
    return _report("H3", s, lhs - rhs, ratio, 1.0 + np.abs(rhs), tol)


def probe_H2(driver, sample_count=10_000, box=None, seed=0, tol=DEFAULT_PROBE_TOL):
    """Sample the z-Lipschitz bound against the declared ``lam``."""
    s = _sample(box, ["t", "y", "z", "z'", "b"], sample_count, seed)
    dz = np.abs(s["z"] - s["z'"])
    lhs = np.abs(_ev(driver, s["t"], s["y"], s["z"], s["b"])
                 - _ev(driver, s["t"], s["y"], s["z'"], s["b"]))
    rhs = driver.lam * dz
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dz != 0, lhs / dz, np.nan)
    return _report("H2", s, lhs - rhs, ratio, 1.0 + np.abs(rhs), tol)


def probe_condition_Z(driver, sample_count=10_000, box=None, seed=0, tol=DEFAULT_PROBE_TOL):
    if driver.cond_z is None:
        raise ConfigurationError(f"driver {driver.name!r} declares no (Z) constants")
    cz = driver.cond_z
    s = _sample(box, ["t", "y", "z", "b"], sample_count, seed)
    lhs = np.abs(_ev(driver, s["t"], s["y"], s["z"], s["b"])
                 - _ev(driver, s["t"], s["y"], np.zeros_like(s["z"]), s["b"]))
    g = np.broadcast_to(np.asarray(np.vectorize(cz.g)(s["t"]), dtype=float), lhs.shape)
    rhs = cz.gamma * (g + np.abs(s["y"]) + np.abs(s["z"])) ** cz.alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.nan)
    return _report("Z", s, lhs - rhs, ratio, 1.0 + np.abs(rhs), tol)


def probe_condition_A(driver, sample_count=10_000, box=None, seed=0, tol=DEFAULT_PROBE_TOL):
    if driver.cond_a is None:
        raise ConfigurationError(f"driver {driver.name!r} declares no (A) constants")
    ca = driver.cond_a
    s = _sample(box, ["t", "y", "z", "b"], sample_count, seed)
    lhs = np.sign(s["y"]) * _ev(driver, s["t"], s["y"], s["z"], s["b"])
    ft = np.broadcast_to(np.asarray(np.vectorize(ca.bound)(s["t"]), dtype=float), lhs.shape)
    rhs = ft + ca.mu * np.abs(s["y"]) + ca.lam * np.abs(s["z"])
    return _report("A", s, lhs - rhs, None, 1.0 + np.abs(rhs), tol)


PROBES = {"H2": probe_H2, "H3": probe_H3, "Z": probe_condition_Z, "A": probe_condition_A}


# --------------------------------------------------------------------------
# built-in catalogue


def linear(a, b, c):
    """``f = a*y + b*z + c``."""
    a, b, c = float(a), float(b), float(c)

    def func(t, y, z, bm):
        return a * y + b * z + c

    cond_z = ConditionZ(alpha=0.5, gamma=0.0) if b == 0 else None
    return Driver(
        func,
        mu=a,
        lam=abs(b),
        cond_z=cond_z,
        cond_a=ConditionA(mu=a, lam=abs(b), bound=lambda t: abs(c)),
        flags={"H2", "H3", "H4", "H5", "A"} | ({"Z"} if cond_z else set()),
        name=f"linear({a!r},{b!r},{c!r})",
    )


def put_discount(r):
    """Discounting driver ``f = -r*y``."""
    r = float(r)

    def func(t, y, z, bm):
        return -r * y

    return Driver(
        func,
        mu=-r,
        lam=0.0,
        cond_z=ConditionZ(alpha=0.5, gamma=0.0),
        cond_a=ConditionA(mu=-r, lam=0.0),
        flags={"H2", "H3", "H4", "H5", "Z", "A"},
        name=f"put_discount({r!r})",
    )


def powerz(g, c, q):
    """``f = g*y + c*(1 + |z|)**q`` with ``0 <= q <= 1``."""
    g, c, q = float(g), float(c), float(q)
    if not 0.0 <= q <= 1.0:
        raise InvalidSpecError(f"powerz exponent must lie in [0, 1], got {q}")

    def func(t, y, z, bm):
        return g * y + c * (1.0 + np.abs(z)) ** q

    if 0.0 < q < 1.0:
        cond_z = ConditionZ(alpha=q, gamma=abs(c))
    elif q == 0.0:
        cond_z = ConditionZ(alpha=0.5, gamma=0.0)
    else:
        cond_z = None
    return Driver(
        func,
        mu=g,
        lam=abs(c) * q,
        cond_z=cond_z,
        cond_a=ConditionA(mu=g, lam=abs(c) * q, bound=lambda t: abs(c)),
        flags={"H2", "H3", "H4", "H5", "A"} | ({"Z"} if cond_z else set()),
        name=f"powerz({g!r},{c!r},{q!r})",
    )


def _scaled_exp_quartic(weight, b):
    # weight * exp(b**4) formed in log space; zero where weight == 0
    weight = np.asarray(weight, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.exp(np.log(np.where(weight > 0, weight, 1.0)) + np.asarray(b, dtype=float) ** 4)
    return np.where(weight > 0, out, 0.0)


def counterexample5(horizon=1.0):
    """``f(t, y) = -(y - (T - t))^+ exp(B_t^4)``.

    The solution is integrable, yet ``f^-`` along the running-max majorant is not.
    """
    T = float(horizon)

    def func(t, y, z, bm):
        return -_scaled_exp_quartic(np.maximum(y - (T - t), 0.0), bm)

    def log_neg(t, y, z, bm):
        excess = np.maximum(np.asarray(y, dtype=float) - (T - t), 0.0)
        with np.errstate(divide="ignore"):
            return np.log(excess) + np.asarray(bm, dtype=float) ** 4

    return Driver(
        func,
        mu=0.0,
        lam=0.0,
        cond_z=ConditionZ(alpha=0.5, gamma=0.0),
        cond_a=ConditionA(mu=0.0, lam=0.0),
        flags={"H2", "H3", "H4", "H5", "Z", "A"},
        name="counterexample5",
        log_neg=log_neg,
    )


def counterexample7():
    """``f(t, y) = -y^+ exp(B_t^4)``: reflected solution with non-integrable K."""

    def func(t, y, z, bm):
        return -_scaled_exp_quartic(np.maximum(y, 0.0), bm)

    def log_neg(t, y, z, bm):
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(np.asarray(y, dtype=float), 0.0)) + np.asarray(bm, dtype=float) ** 4

    return Driver(
        func,
        mu=0.0,
        lam=0.0,
        cond_z=ConditionZ(alpha=0.5, gamma=0.0),
        cond_a=ConditionA(mu=0.0, lam=0.0),
        flags={"H2", "H3", "H4", "H5", "Z", "A"},
        name="counterexample7",
        log_neg=log_neg,
    )


DRIVER_CATALOGUE = {
    "linear": (linear, 3),
    "put_discount": (put_discount, 1),
    "powerz": (powerz, 3),
    "counterexample5": (counterexample5, 0),
    "counterexample7": (counterexample7, 0),
}


def driver_from_name(text, horizon=1.0):
    """Build a catalogue driver from text such as ``"linear(-1, 0, 0.5)"``."""
    try:
        node = ast.parse(text.strip(), mode="eval").body
    except SyntaxError as exc:
        raise ConfigurationError(f"cannot parse driver {text!r}: {exc.msg}") from None
    if isinstance(node, ast.Name):
        name, args = node.id, []
    elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name = node.func.id
        try:
            args = [float(ast.literal_eval(a)) for a in node.args]
        except (ValueError, TypeError):
            raise ConfigurationError(f"driver arguments must be numbers: {text!r}") from None
    else:
        raise ConfigurationError(f"unrecognised driver expression {text!r}")
    if name not in DRIVER_CATALOGUE:
        raise ConfigurationError(
            f"unknown driver {name!r}; available: {sorted(DRIVER_CATALOGUE)}"
        )
    factory, arity = DRIVER_CATALOGUE[name]
    if len(args) != arity:
        raise ConfigurationError(f"driver {name!r} takes {arity} arguments, got {len(args)}")
    if name == "counterexample5":
        return counterexample5(horizon)
    return factory(*args)
