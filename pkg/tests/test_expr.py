import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rbsde.exceptions import ConfigurationError
from rbsde.expr import compile_expression


@pytest.mark.parametrize("text,t,b,expected", [
    ("1 + 2 * 3", 0, 0, 7.0),
    ("-b ^ 2", 0, 3, -9.0),
    ("max(1 - b, 0)", 0, 0.25, 0.75),
    ("pos(b) - neg(b)", 0, -2.5, -2.5),
    ("exp(log(t + 1))", 1.5, 0, 2.5),
    ("pow(abs(b), 0.5) / 2", 0, -16, 2.0),
    ("min(t, b) + +1", 0.5, 4.0, 1.5),
    ("1 + b ^ 2 * 2", 0, 3, 19.0),
    ("2 ^ 3 ^ 2", 0, 0, 512.0),
])
def test_evaluates(text, t, b, expected):
    assert math.isclose(float(compile_expression(text)(t=t, b=b)), expected, rel_tol=1e-15)


def test_vectorised():
    f = compile_expression("pos(1 - b) * t")
    np.testing.assert_array_equal(f(t=2.0, b=np.array([0.0, 0.5, 2.0])), [2.0, 1.0, 0.0])


@pytest.mark.parametrize("text", [
    "x + 1", "__import__('os')", "b.real", "sin(b)", "max(b)", "[b]", "b if t else 1",
    "lambda: 1", "1 +", "'a'", "True", "b % 2", "exp(b, t)",
])
def test_rejects(text):
    with pytest.raises(ConfigurationError):
        compile_expression(text)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_matches_python(t, b):
    f = compile_expression("max(t, b) - min(t, b) - abs(t - b)")
    assert float(f(t=t, b=b)) == 0.0
