"""Reflected BSDEs on a binomial Brownian lattice, with verification tooling."""

from ._version import __version__
from .analysis import (
    check_apriori,
    check_comparison,
    check_H7,
    check_skorokhod,
    class_d_norm,
    convergence_metrics,
    norms,
)
from .drivers import (
    ConditionA,
    ConditionZ,
    Driver,
    StepProblem,
    counterexample5,
    counterexample7,
    driver_from_name,
    implicit_step,
    linear,
    powerz,
    probe_condition_A,
    probe_condition_Z,
    probe_H2,
    probe_H3,
    put_discount,
)
from .estimators import BSDESolver, PenalizationPath
from .exceptions import (
    ConfigurationError,
    DriverEvaluationError,
    InvalidSpecError,
    ModeError,
    NoRootError,
    ParameterError,
    PreconditionError,
    RBSDEError,
    ShapeError,
)
from .lattice import Lattice, LatticeSpec, NodeField, build_lattice, cond_expect, z_from_martingale
from .scenarios import ScenarioSpec, crr_oracle, divergence_probe, make_instance
from .solvers import (
    Instance,
    Solution,
    snell_envelope,
    solve_penalized,
    solve_plain,
    solve_reflected,
    solve_snell,
)
from .sweep import penalization_sweep

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
