import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pppcontract.numerics import golden_section_max, monotone_inverse, scan_then_refine


@given(st.floats(0.0, 1e6))
@settings(max_examples=100, deadline=None)
def test_monotone_inverse_cube(y):
    x = monotone_inverse(lambda t: t ** 3, y)
    assert x ** 3 <= y
    assert abs(x - y ** (1 / 3)) <= 1e-11 * max(1.0, y ** (1 / 3))


def test_monotone_inverse_vectorised_and_floor():
    y = np.array([-1.0, 0.0, 4.0, 100.0])
    x = monotone_inverse(np.sqrt, y)
    assert x.shape == y.shape
    assert x[0] == 0.0 and x[1] == 0.0
    np.testing.assert_allclose(x[2:], [16.0, 1e4], rtol=1e-12)


@given(st.floats(-5.0, 5.0), st.floats(0.1, 10.0))
@settings(max_examples=100, deadline=None)
def test_golden_section_quadratic(c, width):
    lo, hi = np.array([c - width]), np.array([c + 0.7 * width])
    x, fx = golden_section_max(lambda t: -(t - c) ** 2, lo, hi)
    assert abs(x[0] - c) <= 1e-8
    assert fx[0] <= 0.0


def test_golden_section_endpoint_max():
    x, _ = golden_section_max(lambda t: t, np.array([0.0]), np.array([1.0]))
    assert x[0] == pytest.approx(1.0, abs=1e-9)


def test_scan_then_refine():
    x, v = scan_then_refine(lambda t: np.sin(t), 0.0, 3.0)
    # a smooth maximum pins the abscissa only to ~sqrt(eps)
    assert x == pytest.approx(np.pi / 2, abs=1e-7)
    assert v == pytest.approx(1.0, abs=1e-14)
    assert scan_then_refine(lambda t: t, 2.0, 2.0) == (2.0, 2.0)
