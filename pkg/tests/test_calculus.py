import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcontact import calculus as calc
from qcontact.calculus import DimensionMismatch, ExtendedPoint
from qcontact.dual import HyperDual, cos, exp, log, real_part, sin, sqrt

from conftest import LAGRANGIAN_MODELS

finite = st.floats(min_value=-10, max_value=10, allow_nan=False)


@given(finite, finite, finite, finite, finite, finite, finite, finite)
def test_product_obeys_truncated_taylor_rule(a0, a1, a2, a3, b0, b1, b2, b3):
    x = HyperDual(a0, a1, a2, a3)
    y = HyperDual(b0, b1, b2, b3)
    p = x * y
    assert p.value == pytest.approx(a0 * b0, abs=1e-12)
    assert p.d_ab == pytest.approx(a0 * b3 + a1 * b2 + a2 * b1 + a3 * b0, abs=1e-9)


@given(st.floats(min_value=-3, max_value=3))
def test_equal_seeds_give_pure_second_partial(x0):
    x = HyperDual(x0, 1.0, 1.0, 0.0)
    assert sin(x).d_ab == pytest.approx(-math.sin(x0), abs=1e-14)
    assert exp(x).d_ab == pytest.approx(math.exp(x0), rel=1e-14)
    assert (x ** 3).d_ab == pytest.approx(6 * x0, abs=1e-12)


def test_elementary_derivatives():
    x = HyperDual(0.7, 1.0, 1.0, 0.0)
    assert cos(x).d_a == pytest.approx(-math.sin(0.7))
    assert log(x).d_ab == pytest.approx(-1 / 0.7 ** 2)
    assert sqrt(x).d_a == pytest.approx(0.5 / math.sqrt(0.7))
    assert real_part(x / x) == 1.0


def test_extended_point_invariants():
    with pytest.raises(DimensionMismatch):
        ExtendedPoint(1, 2, (0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        ExtendedPoint(1, 1, (0.0, math.nan, 0.0))
    p = ExtendedPoint.from_parts([1.0], [2.0], [3.0, 4.0])
    assert p.q == (1.0,) and p.v == (2.0,) and p.z == (3.0, 4.0)


def test_gradient_examples():
    g = calc.gradient("v1^2/2 - q1^2/2", ExtendedPoint(1, 1, (1.0, 2.0, 0.0)))
    assert g.tolist() == [-1.0, 2.0, 0.0]
    g = calc.gradient("z1 + z2", ExtendedPoint(1, 2, (0.3, -0.2, 5.0, 1.0)))
    assert g.tolist() == [0.0, 0.0, 1.0, 1.0]
    g = calc.gradient("sin(q1)*v1", ExtendedPoint(1, 1, (math.pi / 2, 3.0, 0.0)))
    assert np.allclose(g, [0.0, 1.0, 0.0], atol=1e-15)


def test_hessian_examples():
    p = ExtendedPoint(1, 1, (0.4, 0.9, 0.2))
    W = calc.hessian_block("v1^2/2 - q1^2/2 - 0.1*z1", p, rows="v", cols="v")
    assert W.tolist() == [[1.0]]
    p2 = ExtendedPoint(2, 1, (0.1, 0.2, 0.3, 0.4, 0.5))
    assert calc.hessian_block("v1*v2", p2, rows="v", cols="v").tolist() == [[0, 1], [1, 0]]
    mixed = calc.hessian_block("exp(z1)*v1^2/2", p, rows="v", cols="z")
    fd = calc.finite_difference_oracle("exp(z1)*v1^2/2", p, order=2)
    assert mixed[0, 0] == pytest.approx(0.9 * math.exp(0.2), rel=1e-14)
    assert abs(mixed[0, 0] - fd[1, 2]) <= 1e-8


def test_oracle_examples():
    p = ExtendedPoint(1, 1, (2.0, 0.0, 0.0))
    assert calc.finite_difference_oracle("q1^3", p, h=1e-5)[0] == pytest.approx(12.0, abs=1e-8)
    assert calc.finite_difference_oracle("q1^3", p, order=2)[0, 0] == pytest.approx(12.0,
                                                                                   abs=1e-5)
    lin = calc.finite_difference_oracle("3*q1 - 2*v1 + z1", p, order=2)
    # zero up to rounding: eps * |f| / h^2 at h = 1e-4
    assert np.max(np.abs(lin)) <= 1e-6
    with pytest.raises(ValueError):
        calc.finite_difference_oracle("q1", p, h=0.0)


@pytest.mark.parametrize("name", LAGRANGIAN_MODELS)
def test_builtin_lagrangians_match_oracle(models, name):
    system = models(name).lagrangian
    rng = np.random.default_rng(7)
    for _ in range(25):
        p = ExtendedPoint(system.n, system.qcount, tuple(rng.uniform(-2, 2, system.dim)))
        g = calc.gradient(system.L, p)
        H = calc.hessian_block(system.L, p)
        g_fd = calc.finite_difference_oracle(system.L, p)
        # the built-in L are quadratic, so a wide step has no truncation error and
        # keeps the rounding floor eps*|L|/h^2 small even for the rocket (|L| ~ 1e5)
        H_fd = calc.finite_difference_oracle(system.L, p, order=2, h=1e-2)
        assert np.all(np.abs(g - g_fd) <= 1e-6 * (1 + np.abs(g)))
        assert np.all(np.abs(H - H_fd) <= 1e-6 * (1 + np.abs(H)))


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_hessian_symmetric(coords):
    p = ExtendedPoint(1, 2, tuple(coords))
    H = calc.hessian_block("exp(z1)*v1^2*q1 - sin(q1*z2) + v1*z1*z2", p)
    assert np.max(np.abs(H - H.T)) <= 1e-13


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3),
       st.lists(st.integers(-3, 3), min_size=4, max_size=4))
def test_cubic_polynomials_are_exact(coords, c):
    q, v, z = coords
    src = f"{c[0]}*q1^3 + {c[1]}*q1*v1*z1 + {c[2]}*v1^2 + {c[3]}*z1"
    p = ExtendedPoint(1, 1, (q, v, z))
    g = calc.gradient(src, p)
    exact = [3 * c[0] * q ** 2 + c[1] * v * z, c[1] * q * z + 2 * c[2] * v, c[1] * q * v + c[3]]
    assert np.allclose(g, exact, rtol=1e-12, atol=1e-12)
    H = calc.hessian_block(src, p)
    exact_H = [[6 * c[0] * q, c[1] * z, c[1] * v],
               [c[1] * z, 2 * c[2], c[1] * q],
               [c[1] * v, c[1] * q, 0.0]]
    assert np.allclose(H, exact_H, rtol=1e-12, atol=1e-12)


def test_nested_layers_differentiate_derivatives():
    # d/dq of (d/dv f) for f = q^2 v^3 is 6 q v^2
    f = calc.bind("q1^2*v1^3", 1, 1)

    def dfdv(x):
        return [calc.grad_generic(f, x)[1]]

    J = calc.jacobian_generic(dfdv, [1.5, 2.0, 0.0])
    assert real_part(J[0][0]) == pytest.approx(6 * 1.5 * 4.0)
    assert real_part(J[0][1]) == pytest.approx(6 * 1.5 ** 2 * 2.0)


def test_solve_generic_matches_numpy():
    A = [[4.0, 1.0, 0.5], [1.0, 3.0, -1.0], [0.5, -1.0, 2.0]]
    b = [1.0, 2.0, 3.0]
    x = calc.to_floats(calc.solve_generic(A, b))
    assert np.allclose(x, np.linalg.solve(A, b), rtol=1e-14)
