import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcontact import calculus as calc
from qcontact.calculus import DimensionMismatch
from qcontact.dynamics import IntegratorConfig, integrate
from qcontact.geometry import random_points
from qcontact.models import e1
from qcontact.symmetry import (BaseVectorField, cartan_symmetry_residual, complete_lift,
                               complete_lift_derivative, corollary_sides,
                               dissipated_along_flow, dynamical_symmetry_residual,
                               dynamical_symmetry_scale, hamiltonian_noether_check,
                               lie_bracket_generic, lie_derivative_coframe,
                               noether_condition_residual, noether_condition_scale,
                               noether_symmetry_check, vertical_endomorphism, vertical_lift)

from conftest import LAGRANGIAN_MODELS


def _f(v):
    return calc.to_floats(v)


def test_complete_lift_example():
    Y = BaseVectorField.from_exprs(["q1^2"])
    Yc = complete_lift(Y, 2)
    assert _f(Yc([1.5, -2.0, 0.3, 0.4])).tolist() == [2.25, -6.0, 0.0, 0.0]


def test_vertical_lift_is_s_of_complete_lift():
    Y = BaseVectorField.from_exprs(["sin(q1)*q2", "q1 + q2^3"])
    x = [0.4, -1.2, 0.7, 2.0, 0.1]
    assert np.array_equal(_f(vertical_lift(Y, 1)(x)),
                          _f(vertical_endomorphism(complete_lift(Y, 1)(x), 2)))


def test_base_field_rejects_velocity_dependence():
    with pytest.raises(ValueError):
        BaseVectorField.from_exprs(["v1"])


def test_noether_residual_of_lifts(models):
    # Y = W(q) d/dq, W = q^2. For X = Y^c the commutator term drops out (S[X_E, Y^c] = 0)
    # and the residual is -Y^c(L) = W q - v^2 W'. For X = Y^v the two terms cancel.
    system = models("e1").lagrangian
    Y = BaseVectorField.from_exprs(["q1^2"])
    Yc, Yv = complete_lift(Y, 2), vertical_lift(Y, 2)
    for x in ([1.0, 1.0, 0.0, 0.0], [0.5, -2.0, 1.0, 3.0], [-1.5, 0.3, 0.2, 0.1]):
        q, v = x[0], x[1]
        got = noether_condition_residual(system, Yc, x)
        assert got == pytest.approx(q ** 3 - 2 * q * v ** 2, abs=1e-12)
        assert got == pytest.approx(-complete_lift_derivative(system, Y, x), abs=1e-12)
        assert noether_condition_residual(system, Yv, x) == pytest.approx(0.0, abs=1e-12)


def _family_g(c, gsum, sign=1.0):
    """G = qK - X(v) K - v X(K) with K = q + v and X the E1 field times ``sign``."""
    q, v = c[0], c[1]
    K = q + v
    Xv = sign * (-q - v * gsum)
    XK = sign * v + Xv
    return q * K - Xv * K - v * XK


def _family(gsum, printed=False):
    """F = vK, G as above, H_i = 0; ``printed`` uses the sign-flipped field in G."""
    sign = -1.0 if printed else 1.0

    def X(c):
        return [c[1] * (c[0] + c[1]), _family_g(c, gsum, sign)] + [0.0 * c[0]] * (len(c) - 2)

    return X


@pytest.mark.parametrize("printed", [False, True])
def test_e1_family_residual_is_v_times_g(models, rng, printed):
    """Only F enters the residual, which works out to F q - v X(F) = v G (corrected G)."""
    system = models("e1").lagrangian
    X = _family(0.3, printed)
    for p in random_points((1, 2), 20, rng):
        x = list(p.coords)
        G = float(calc.to_floats([_family_g(x, 0.3)])[0])
        r = noether_condition_residual(system, X, x)
        assert abs(r - x[1] * G) <= 1e-12 * noether_condition_scale(system, X, x)


def test_e1_family_vanishes_only_where_v_or_g_does(models):
    system = models("e1").lagrangian
    X = _family(0.3)
    assert noether_condition_residual(system, X, [0.7, 0.0, 1.0, 2.0]) == 0.0
    assert abs(noether_condition_residual(system, X, [1.0, 1.0, 0.0, 0.0])) > 0.1


def test_translation_symmetry_gives_dissipated_momentum(models):
    # free2contact has no q-dependence: X = d/dq satisfies the condition exactly and
    # X^v(L) = v is dissipated at the summed rate 2
    m = models("free2contact")
    system = m.lagrangian
    X = (lambda c: [1.0, 0.0, 0.0, 0.0])
    for x in ([0.3, 1.0, 0.0, 0.0], [-2.0, 0.5, 1.0, -1.0]):
        assert noether_condition_residual(system, X, x) == 0.0
    traj = integrate(system, m.initial_point(), IntegratorConfig(t1=2.0))
    assert dissipated_along_flow(system, "v1", traj) <= 1e-9


def test_dynamical_symmetry_examples():
    system = e1(2, (0.1, 0.1)).lagrangian
    Y = (lambda c: [0.0, 0.0, 1.0, -1.0])
    for x in ([1.0, 1.0, 0.0, 0.0], [0.2, -0.7, 3.0, 1.0]):
        assert np.max(np.abs(dynamical_symmetry_residual(system, Y, x))) <= 1e-9
    Yq = (lambda c: [c[0], 0.0, 0.0, 0.0])
    x = [0.8, 0.6, 0.1, 0.2]
    r = dynamical_symmetry_residual(system, Yq, x)
    assert np.max(np.abs(r)) > 1e-3 * dynamical_symmetry_scale(system, Yq, x)


def test_field_is_its_own_dynamical_symmetry(models, rng):
    system = models("rocket").lagrangian
    for p in random_points((1, 3), 5, rng):
        r = dynamical_symmetry_residual(system, system.field_generic, p)
        assert np.max(np.abs(r)) <= 1e-9 * dynamical_symmetry_scale(system, system.field_generic, p)


def test_noether_symmetry_examples(rng):
    equal = e1(2, (0.1, 0.1)).lagrangian
    Y = (lambda c: [0.0, 0.0, 1.0, -1.0])
    pts = random_points((1, 2), 10, rng)
    rep = noether_symmetry_check(equal, Y, pts)
    assert rep.passed and rep.flags == {"energy_invariant": True, "coframe_invariant": True}
    # every Noether symmetry is also a dynamical symmetry
    for p in pts:
        assert np.max(np.abs(dynamical_symmetry_residual(equal, Y, p))) <= 1e-9

    Y1 = (lambda c: [0.0, 0.0, 1.0, 0.0])
    rep = noether_symmetry_check(e1().lagrangian, Y1, pts)
    assert not rep.passed and not rep.flags["energy_invariant"]
    assert rep.flags["coframe_invariant"]


def test_cartan_example(models, rng):
    system = models("e1").lagrangian
    X = (lambda c: [0.0, 1.0] + list(c[2:]))
    rep = cartan_symmetry_residual(system, X, ["z1 - q1", "z2 - q1"],
                                   random_points((1, 2), 20, rng))
    assert rep.passed
    assert rep.max_residual <= 1e-9
    assert rep.components["reeb_contraction"] <= 1e-10


def test_reeb_field_is_cartan(models, rng):
    system = models("rocket").lagrangian
    R1 = (lambda c: system.reeb_generic(c)[0])
    rep = cartan_symmetry_residual(system, R1, ["0", "0", "1"], random_points((1, 3), 5, rng))
    assert rep.passed


def test_velocity_scaling_is_not_cartan(models):
    system = models("e1").lagrangian
    X = (lambda c: [0.0, c[1], 0.0, 0.0])
    x = [0.3, -1.7, 0.5, 0.2]
    lie = lie_derivative_coframe(system, X, x)
    # L_X lambda_i = -v dq
    assert np.allclose(lie, [[1.7, 0, 0, 0]] * 2)
    rep = cartan_symmetry_residual(system, X, ["0", "0"], [x])
    assert rep.max_residual == pytest.approx(1.7, abs=1e-14)
    assert not rep.passed
    with pytest.raises(DimensionMismatch):
        cartan_symmetry_residual(system, X, ["0"], [x])


def test_hamiltonian_noether_flags(models, rng):
    m = models("two-contact-r4")
    pts = random_points(m.structure, 5, rng)
    rep = hamiltonian_noether_check(m.structure, m.hamiltonian, m.hamiltonian, pts)
    assert rep.passed
    assert rep.flags["noether_symmetry"] and rep.flags["dissipated"]
    assert rep.flags["converse_hypothesis"]
    # z-dependent f: converse hypothesis not met, nothing forced
    rep = hamiltonian_noether_check(m.structure, m.hamiltonian, "z1 - z2", pts)
    assert not rep.flags["converse_hypothesis"] and rep.passed

    e = models("e1")
    s = e.general_structure()
    E = e.lagrangian.energy_function()
    rep = hamiltonian_noether_check(s, E, E, random_points(s, 4, rng))
    assert rep.flags["dissipated"] and not rep.flags["converse_hypothesis"]
    assert not rep.flags["noether_symmetry"] and rep.passed


def test_free2contact_energy_derivative(models, rng):
    # with the corrected field X(E_L) = -2 E_L, so f = -2 E_L is dissipated
    m = models("free2contact")
    system = m.lagrangian
    E = system.energy_function()
    for p in random_points((1, 2), 10, rng):
        X = system.lagrangian_vector_field(p)
        dE = float(calc.gradient(E, p) @ X)
        assert dE == pytest.approx(-2 * system.energy(p), abs=1e-12)
    traj = integrate(system, m.initial_point(), IntegratorConfig(t1=5.0))
    assert dissipated_along_flow(system, "-2*(v1^2/2 + z1 + z2)", traj) <= 1e-8


def test_field_chain_for_dynamical_symmetry(models):
    # Y = X_{E_L} is a dynamical symmetry with lambda_1(Y) = ... = lambda_q(Y) = -E_L,
    # so lambda_1(Y) is dissipated
    m = models("e1")
    system = m.lagrangian
    x0 = m.initial_point()
    lam = system.contact_coframe(x0) @ system.lagrangian_vector_field(x0)
    assert lam[0] == lam[1] == -system.energy(x0)
    traj = integrate(system, x0, IntegratorConfig(t1=5.0))
    f = "-(v1^2/2 + q1^2/2 + gamma1*z1 + gamma2*z2)"
    assert dissipated_along_flow(system, f, traj, relative=True) <= 1e-6


_poly = st.lists(st.integers(-3, 3), min_size=3, max_size=3).map(
    lambda c: BaseVectorField.from_exprs([f"{c[0]} + {c[1]}*q1 + {c[2]}*q1^2"]))


@pytest.mark.parametrize("name", LAGRANGIAN_MODELS)
@given(Y=_poly, coords=st.lists(st.floats(-2, 2), min_size=5, max_size=5))
@settings(max_examples=10)
def test_corrected_corollary_identity(models, name, Y, coords):
    """{E_L, Y^v(L)} = -Y^c(L) for the solved bracket."""
    system = models(name).lagrangian
    x = coords[: system.dim]
    bracket, ycl = corollary_sides(system, Y, x)
    assert abs(bracket + ycl) <= 1e-6 * (1 + abs(bracket) + abs(ycl))


def test_printed_corollary_sign_fails_where_lift_derivative_is_nonzero(models):
    system = models("e1").lagrangian
    Y = BaseVectorField.from_exprs(["q1^2"])
    bracket, ycl = corollary_sides(system, Y, [0.5, 1.0, 0.0, 0.0])
    assert abs(ycl) > 0.1
    assert abs(bracket - ycl) > 0.1
    assert abs(bracket + ycl) <= 1e-9


@pytest.mark.parametrize("name", LAGRANGIAN_MODELS)
def test_s_kills_commutator_with_complete_lift(models, name, rng):
    system = models(name).lagrangian
    Yc = complete_lift(BaseVectorField.from_exprs(["1 + q1 - q1^3/3"]), system.qcount)
    for p in random_points((1, system.qcount), 8, rng):
        br = _f(lie_bracket_generic(system.field_generic, Yc, list(p.coords)))
        assert np.max(np.abs(_f(vertical_endomorphism(list(br), 1)))) <= 1e-7 * (
            1 + np.max(np.abs(br)))
