import math

import numpy as np
import pytest

from rbsde import ScenarioSpec, crr_oracle, divergence_probe, make_instance, solve_plain, solve_reflected
from rbsde.exceptions import InvalidSpecError, ParameterError

# crr_oracle(r=0.05, sigma=0.2, strike=100, S0=100, T=1, N=100), computed once and cross-checked
# against a scalar pure-Python backward induction (agreement 4e-14)
CRR_REFERENCE = 6.082354409142


def test_crr_frozen_reference():
    assert abs(crr_oracle(0.05, 0.2, 100.0, 100.0, 1.0, 100) - CRR_REFERENCE) <= 1e-9


def test_crr_worthless_and_deep_itm():
    assert crr_oracle(0.05, 0.2, 1.0, 100.0, 1.0, 50) == 0.0
    price = crr_oracle(0.0, 0.2, 100.0, 100.0 * 1e-9, 1.0, 50)
    assert math.isclose(price, 100.0, rel_tol=1e-8)


@pytest.mark.parametrize("args", [
    (0.05, 0.0, 100, 100, 1, 10), (0.05, 0.2, -1, 100, 1, 10), (0.05, 0.2, 100, 100, 1, 0),
    (5.0, 0.01, 100, 100, 1, 4),  # risk-neutral probability above one
])
def test_crr_parameter_errors(args):
    with pytest.raises(ParameterError):
        crr_oracle(*args)


def test_counterexample_instances():
    inst = make_instance("counterexample5", T=1.0, N=4)
    lat = inst.lattice
    for i in range(5):
        np.testing.assert_allclose(inst.barrier_field[i], 1.0 - lat.time(i), atol=1e-15)
    assert np.all(inst.terminal_values == 0.0)
    inst = make_instance("counterexample7", N=4)
    assert np.all(inst.terminal_values == 1.0)
    assert all(np.all(layer == 1.0) for layer in inst.barrier_field)


def test_put_zero_rate_equals_european():
    inst = make_instance("american_put", r=0.0, N=64)
    amer = solve_reflected(inst).value
    euro = solve_plain(inst).value
    assert abs(amer - euro) <= 1e-10


@pytest.mark.parametrize("r", [0.0, 0.05])
def test_put_crr_tree_matches_oracle(r):
    inst = make_instance("american_put", r=r, N=120)
    assert abs(solve_reflected(inst).value - crr_oracle(r, 0.2, 100.0, 100.0, 1.0, 120)) <= 1e-9


def test_put_gbm_tree_is_close_but_not_exact():
    # same continuum limit, different node placement: O(1/N) oscillating gap
    sol = solve_reflected(make_instance("american_put", tree="gbm", r=0.0, N=200))
    gap = abs(sol.value - crr_oracle(0.0, 0.2, 100.0, 100.0, 1.0, 200))
    assert 1e-3 < gap < 5e-2


def test_linear_bsde_without_barrier():
    inst = make_instance("linear_bsde", floor=None, a=0.0, b=0.0, c=0.0, N=6)
    assert inst.barrier is None
    assert abs(solve_plain(inst).value) < 1e-13


def test_custom_scenario():
    inst = make_instance("custom", driver="put_discount(0.1)", xi="pos(1 - b)",
                         barrier="pos(1 - b) - 0.1 * t", N=12)
    assert inst.driver.mu == -0.1
    sol = solve_reflected(inst)
    assert np.all(sol.Y[0] >= 1.0)


def test_spec_errors():
    with pytest.raises(InvalidSpecError):
        ScenarioSpec("heston")
    with pytest.raises(InvalidSpecError):
        ScenarioSpec("american_put", {"rho": 1})
    with pytest.raises(InvalidSpecError):
        make_instance("american_put", tree="trinomial")
    with pytest.raises(InvalidSpecError):
        make_instance("american_put", sigma=-0.1)
    with pytest.raises(InvalidSpecError):
        make_instance("american_put", N=0)


def test_resolved_defaults():
    spec = ScenarioSpec("american_put", {"N": 7})
    assert spec.resolved["N"] == 7 and spec.resolved["strike"] == 100.0


def test_counterexample5_divergence_column():
    table = divergence_probe("counterexample5", (4, 8, 16), order=1)
    assert table.strictly_increasing and table.growth_flag
    assert table.rows[0].log_ratio is None
    assert all(r.y_s2 is None for r in table.rows)


def test_counterexample7_small_probe():
    table = divergence_probe("counterexample7", (2, 4, 8), order=0.5)
    assert table.strictly_increasing
    assert all(r.y_s2 == 1.0 for r in table.rows)


def test_divergence_probe_errors():
    with pytest.raises(InvalidSpecError):
        divergence_probe("american_put", (4, 8))
    with pytest.raises(InvalidSpecError):
        divergence_probe("counterexample5", (8, 4))
