import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbsde import LatticeSpec, NodeField, build_lattice, cond_expect, z_from_martingale
from rbsde.exceptions import InvalidSpecError, ShapeError


def test_single_step_nodes():
    lat = build_lattice(1.0, 1)
    assert lat.nodes[0].tolist() == [0.0]
    assert lat.nodes[1].tolist() == [-1.0, 1.0]


def test_two_step_layer():
    lat = build_lattice(LatticeSpec(1.0, 2))
    s = math.sqrt(0.5)
    np.testing.assert_allclose(lat.nodes[2], [-2 * s, 0.0, 2 * s], rtol=0, atol=1e-15)


def test_half_horizon():
    lat = build_lattice(0.5, 1)
    np.testing.assert_allclose(lat.nodes[1], [-math.sqrt(0.5), math.sqrt(0.5)], atol=1e-15)


@pytest.mark.parametrize("T,N", [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, -3), (1.0, 2.5)])
def test_invalid_spec(T, N):
    with pytest.raises(InvalidSpecError):
        build_lattice(T, N)


def test_last_time_is_horizon():
    lat = build_lattice(0.3, 7)
    assert lat.times[-1] == 0.3
    assert lat.time(0) == 0.0


def test_cond_expect_examples():
    lat = build_lattice(1.0, 2)
    np.testing.assert_array_equal(cond_expect(lat, np.array([1.0, 2.0]), 0), [1.5])
    np.testing.assert_array_equal(cond_expect(lat, np.full(3, 7.25), 1), [7.25, 7.25])
    np.testing.assert_allclose(cond_expect(lat, lat.nodes[2], 1), lat.nodes[1], atol=1e-15)


def test_z_examples():
    lat = build_lattice(1.0, 1)
    np.testing.assert_array_equal(z_from_martingale(lat, np.array([0.0, 3.0]), 0), [1.5])
    lat = build_lattice(2.0, 5)
    for i in range(5):
        np.testing.assert_allclose(z_from_martingale(lat, lat.nodes[i + 1], i), 1.0, rtol=1e-14)
        np.testing.assert_array_equal(z_from_martingale(lat, np.full(i + 2, -3.0), i), 0.0)


def test_layer_length_mismatch():
    lat = build_lattice(1.0, 3)
    with pytest.raises(ShapeError):
        cond_expect(lat, np.zeros(2), 2)
    with pytest.raises(ShapeError):
        z_from_martingale(lat, np.zeros(5), 2)


def test_nodefield_rejects_bad_layers():
    with pytest.raises(ShapeError):
        NodeField([np.zeros(1), np.zeros(3)])
    with pytest.raises(ShapeError):
        NodeField([np.zeros(1), np.array([0.0, np.nan])])


def test_nodefield_is_read_only():
    f = NodeField([np.zeros(1), np.ones(2)])
    with pytest.raises(ValueError):
        f[1][0] = 3.0
    assert NodeField.from_flat(f.flat(), 2).equals(f)


def test_probabilities_sum_to_one():
    lat = build_lattice(1.0, 30)
    for i in (0, 1, 17, 30):
        assert math.isclose(lat.probabilities(i).sum(), 1.0, rel_tol=1e-13)
        np.testing.assert_allclose(np.exp(lat.log_probabilities(i)), lat.probabilities(i),
                                   rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    T=st.floats(0.01, 10.0),
    N=st.integers(1, 40),
    data=st.data(),
)
def test_tower_property(T, N, data):
    lat = build_lattice(T, N)
    vals = data.draw(st.lists(st.floats(-1e3, 1e3), min_size=N + 1, max_size=N + 1))
    layer = np.array(vals)
    # E[E[X | F_{N-1}] | F_0] equals the binomially weighted mean
    for i in range(N - 1, -1, -1):
        layer = cond_expect(lat, layer, i)
    expected = float(np.dot(lat.probabilities(N), vals))
    assert math.isclose(layer[0], expected, rel_tol=1e-9, abs_tol=1e-9)


@settings(max_examples=50, deadline=None)
@given(N=st.integers(1, 30), data=st.data())
def test_martingale_decomposition_is_exact(N, data):
    # next = E[next] +/- Z sqrt(h) at the two children
    lat = build_lattice(1.0, N)
    i = data.draw(st.integers(0, N - 1))
    nxt = np.array(data.draw(st.lists(st.floats(-100, 100), min_size=i + 2, max_size=i + 2)))
    m, z = cond_expect(lat, nxt, i), z_from_martingale(lat, nxt, i)
    np.testing.assert_allclose(m + z * lat.sqrt_h, nxt[1:], atol=1e-10)
    np.testing.assert_allclose(m - z * lat.sqrt_h, nxt[:-1], atol=1e-10)
