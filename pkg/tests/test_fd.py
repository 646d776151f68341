import numpy as np
import pytest
from hypothesis import given, strategies as st

from ahg import fd


def test_polynomial_second_derivative_exact():
    # stencils are exact on low-degree polynomials; a coarse step keeps roundoff out of the picture
    f = lambda X: X[:, 0] ** 2 + 3 * X[:, 0] * X[:, 1]
    for x in ([0.0, 0.0], [1.3, -2.1], [-4.0, 0.5], [10.0, 7.0]):
        assert abs(fd.diff_scalar(f, np.array(x), (0, 0), h=0.25) - 2.0) <= 1e-10
        assert abs(fd.diff_scalar(f, np.array(x), (0, 1), h=0.25) - 3.0) <= 1e-10


@pytest.mark.parametrize("x", [0.0, 0.1, -0.2])
def test_polynomial_exact_at_default_step_near_origin(x):
    f = lambda X: X[:, 0] ** 2
    assert abs(fd.diff_scalar(f, np.array([x, 0.3]), (0, 0)) - 2.0) <= 1e-10


def test_default_step_roundoff_floor():
    # away from the origin the default step is limited by eps*|f|/h^2, not truncation
    f = lambda X: X[:, 0] ** 2
    err = abs(fd.diff_scalar(f, np.array([4.0, 0.0]), (0, 0)) - 2.0)
    assert err <= 1e3 * np.finfo(float).eps * 16 / fd.STEP**2


def test_sine_first_derivative():
    f = lambda X: np.sin(X[:, 0])
    assert abs(fd.diff_scalar(f, np.zeros(1), (0,)) - 1.0) <= 1e-9


def test_third_derivative_of_cubic():
    f = lambda X: X[:, 0] ** 3 - X[:, 0] * X[:, 1] ** 2
    assert abs(fd.diff_scalar(f, np.array([0.4, 0.2]), (0, 0, 0)) - 6.0) <= 1e-6
    assert abs(fd.diff_scalar(f, np.array([0.4, 0.2]), (0, 1, 1)) + 2.0) <= 1e-6


def test_order_of_accuracy_without_richardson():
    # base stencils are fourth order: halving h divides the error by about 16
    f = lambda X: np.exp(np.sin(X[:, 0]))
    x = np.array([0.3])
    exact = np.cos(0.3) * np.exp(np.sin(0.3))
    e1 = abs(fd.diff_scalar(f, x, (0,), h=0.1, richardson=False) - exact)
    e2 = abs(fd.diff_scalar(f, x, (0,), h=0.05, richardson=False) - exact)
    assert 12.0 < e1 / e2 < 20.0


def test_richardson_improves_accuracy():
    f = lambda X: np.exp(np.sin(X[:, 0]))
    x = np.array([0.3])
    exact = np.cos(0.3) * np.exp(np.sin(0.3))
    plain = abs(fd.diff_scalar(f, x, (0,), h=0.05, richardson=False) - exact)
    rich = abs(fd.diff_scalar(f, x, (0,), h=0.05) - exact)
    assert rich < plain / 50


def test_order_above_three_rejected():
    with pytest.raises(ValueError):
        fd.diff_scalar(lambda X: X[:, 0], np.zeros(1), (0, 0, 0, 0))


def test_stencil_weights_reproduce_monomials():
    offs = (-2, -1, 1, 2)
    w = np.array(fd.stencil_weights(offs, 1))
    o = np.array(offs, float)
    for k in range(4):
        assert abs(w @ o**k - (1.0 if k == 1 else 0.0)) <= 1e-12


def test_batched_shapes():
    F = lambda X: np.stack([X[:, 0] * X[:, 1], X[:, 1] ** 2], axis=1)
    X = np.random.default_rng(0).normal(size=(5, 3))
    assert fd.derivative(F, X).shape == (5, 3, 2)
    assert fd.second_derivative(F, X).shape == (5, 3, 3, 2)


@given(
    a=st.floats(-3, 3),
    b=st.floats(-3, 3),
    x=st.lists(st.floats(-1, 1), min_size=2, max_size=2),
)
def test_derivative_is_linear(a, b, x):
    f = lambda X: np.sin(X[:, 0]) * X[:, 1]
    g = lambda X: np.exp(0.3 * X[:, 0] - X[:, 1])
    h = lambda X: a * f(X) + b * g(X)
    X = np.array([x])
    lhs = fd.derivative(h, X)
    rhs = a * fd.derivative(f, X) + b * fd.derivative(g, X)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * (1 + abs(a) + abs(b))


@given(x=st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_mixed_partials_symmetric(x):
    f = lambda X: np.sin(X[:, 0] * X[:, 1]) + X[:, 2] ** 3 * X[:, 0]
    H = fd.second_derivative(f, np.array([x]))[0]
    assert np.max(np.abs(H - H.T)) <= 1e-12 * (1 + np.max(np.abs(H)))
