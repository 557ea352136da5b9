import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcontact import calculus as calc
from qcontact.calculus import ExtendedPoint
from qcontact.geometry import hamiltonian_vector_field, random_points, verify_structure
from qcontact.lagrangian import LagrangianSystem, SingularLagrangian

from conftest import LAGRANGIAN_MODELS

# Reference values from scripts/oracles/sympy_oracle.py, which solves the defining
# equations of X_{E_L} symbolically instead of using the closed form.
L_EXP = "exp(z1)*v1^2/2 - q1^2/2 - 0.3*z1*v1 - z2*q1/5"
P_EXP = (0.5, -0.75, 0.2, 0.7)
X_EXP = [-0.75, -0.70572104650650244, 0.19351952573254777, 0.19351952573254777]
E_EXP = 0.53851952573254777
R1_EXP = [0.0, 0.99561922592339456, 1.0, 0.0]

L_QUART = "v1^4/12 + v1^2/2 - cos(q1) - z1*z2/10 - v1*z1/7"
P_QUART = (0.3, 1.2, -0.5, 0.25)
X_QUART = [1.2, 0.012336355825747717, 0.035677796588679695, 0.035677796588679695]
E_QUART = 2.1812364891256060


def test_e1_regularity(models):
    W, cond = models("e1").lagrangian.regularity_check((0.3, 0.2, 1.0, -1.0))
    assert W.tolist() == [[1.0]] and cond == 1.0


def test_rocket_regularity(models):
    W, _ = models("rocket").lagrangian.regularity_check((1.0, 2.0, 0.0, 0.0, 0.0))
    assert W.tolist() == [[5000.0]]


def test_linear_velocity_is_singular():
    s = LagrangianSystem("v1 - q1^2", 1, 1)
    with pytest.raises(SingularLagrangian):
        s.regularity_check((0.0, 1.0, 0.0))
    with pytest.raises(SingularLagrangian):
        s.lagrangian_vector_field((0.0, 1.0, 0.0))


def test_coframe_examples(models):
    lam = models("e1").lagrangian.contact_coframe((0.3, 1.0, 0.0, 0.0))
    assert lam.tolist() == [[-1.0, 0.0, 1.0, 0.0], [-1.0, 0.0, 0.0, 1.0]]
    lam = models("rocket").lagrangian.contact_coframe((0.0, 100.0, 0.0, 0.0, 0.0))
    assert lam[:, 0].tolist() == [-5e5] * 3
    s = LagrangianSystem("(v1 - 1)^2/2", 1, 1)
    assert s.contact_coframe((0.0, 1.0, 0.0)).tolist() == [[0.0, 0.0, 1.0]]


def test_reeb_examples(models):
    R = models("e1").lagrangian.reeb_fields((0.3, 1.0, 2.0, 0.0))
    assert R.tolist() == [[0, 0, 1, 0], [0, 0, 0, 1]]
    R = models("rocket").lagrangian.reeb_fields((0.3, 1.0, 2.0, 0.0, 5.0))
    assert np.array_equal(R[:, 2:], np.eye(3)) and not R[:, :2].any()
    s = LagrangianSystem("exp(z1)*v1^2/2", 1, 1)
    R = s.reeb_fields((0.0, 1.7, 0.4))
    assert np.allclose(R, [[0.0, -1.7, 1.0]], atol=1e-14)


def test_energy_examples(models):
    assert LagrangianSystem("v1^2/2", 1, 1).energy((0.0, 3.0, 0.0)) == 4.5
    assert models("e1").lagrangian.energy((1, 1, 0, 0)) == 1.0
    assert models("rocket").lagrangian.energy((1000, 100, 0, 0, 0)) == pytest.approx(7.405e7,
                                                                                    rel=1e-15)


def test_field_examples(models):
    X = models("e1").lagrangian.lagrangian_vector_field((1, 1, 0, 0))
    assert np.allclose(X, [1, -1.3, 0, 0], atol=1e-15)
    X = models("free2contact").lagrangian.lagrangian_vector_field((0, 1, 0, 0))
    assert np.allclose(X, [1, -2, 0.5, 0.5], atol=1e-15)
    X = models("rocket").lagrangian.lagrangian_vector_field((0, 100, 0, 0, 0))
    assert X[1] == pytest.approx(-10.92, abs=1e-12)


def test_field_against_symbolic_oracle():
    s = LagrangianSystem(L_EXP, 1, 2)
    assert np.allclose(s.lagrangian_vector_field(P_EXP), X_EXP, rtol=1e-13, atol=1e-15)
    assert s.energy(P_EXP) == pytest.approx(E_EXP, rel=1e-14)
    assert np.allclose(s.reeb_fields(P_EXP)[0], R1_EXP, atol=1e-14)
    s = LagrangianSystem(L_QUART, 1, 2)
    assert np.allclose(s.lagrangian_vector_field(P_QUART), X_QUART, rtol=1e-13, atol=1e-15)
    assert s.energy(P_QUART) == pytest.approx(E_QUART, rel=1e-14)


def test_herglotz_examples(models):
    e1 = models("e1").lagrangian
    assert np.allclose(e1.herglotz_residual((1, 1, 0, 0), [-1.3]), 0.0, atol=1e-15)
    assert e1.herglotz_residual((1, 1, 0, 0), [0.0]) == pytest.approx([1.3])
    rocket = models("rocket").lagrangian
    assert abs(rocket.herglotz_residual((0, 100, 0, 0, 0), [-10.92])[0]) <= 1e-9


SYSTEMS = LAGRANGIAN_MODELS + ("exp",)


def _system(models, name):
    if name == "exp":
        return LagrangianSystem(L_EXP, 1, 2, name="exp")
    return models(name).lagrangian


@pytest.mark.parametrize("name", SYSTEMS)
def test_oracle_equivalence(models, name, rng):
    system = _system(models, name)
    s = system.to_general_structure()
    for p in random_points(s, 10, rng):
        X = system.lagrangian_vector_field(p)
        Xs = hamiltonian_vector_field(s, system.energy_function(), p)
        assert np.max(np.abs(X - Xs)) <= 1e-7 * (1 + np.linalg.norm(X))


@pytest.mark.parametrize("name", SYSTEMS)
def test_resubstitution(models, name, rng):
    system = _system(models, name)
    n = system.n
    for p in random_points((system.n, system.qcount), 10, rng):
        X = system.lagrangian_vector_field(p)
        E = system.energy(p)
        g, _, _, Lval = system.blocks(p)
        assert np.all(np.abs(system.contact_coframe(p) @ X + E) <= 1e-9 * (1 + abs(E)))
        assert np.all(np.abs(X[2 * n:] - Lval) <= 1e-9 * (1 + abs(Lval)))
        assert np.array_equal(X[:n], np.asarray(p.coords[n:2 * n]))


@pytest.mark.parametrize("name", SYSTEMS)
def test_reeb_of_energy(models, name, rng):
    system = _system(models, name)
    n = system.n
    for p in random_points((system.n, system.qcount), 10, rng):
        dE = calc.gradient(system.energy_function(), p)
        g = system.blocks(p)[0]
        assert np.all(np.abs(system.reeb_fields(p) @ dE + g[2 * n:]) <= 1e-10 * (
            1 + np.abs(g[2 * n:])))


@pytest.mark.parametrize("name", SYSTEMS)
def test_induced_structure_axioms(models, name, rng):
    system = _system(models, name)
    s = system.to_general_structure()
    assert verify_structure(s, random_points(s, 5, rng)).passed


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_field_acceleration_solves_herglotz(coords):
    system = LagrangianSystem(L_QUART, 1, 2)
    X = system.lagrangian_vector_field(tuple(coords))
    acc = X[1:2]
    res = system.herglotz_residual(tuple(coords), acc)
    assert np.max(np.abs(res)) <= 1e-9 * system.herglotz_scale(tuple(coords), acc)


def test_generic_field_matches_float_path():
    system = LagrangianSystem(L_EXP, 1, 2)
    generic = calc.to_floats(system.field_generic(list(P_EXP)))
    assert np.allclose(generic, system.lagrangian_vector_field(P_EXP), rtol=1e-14)


def test_two_dimensional_system(rng):
    L = "v1^2/2 + v2^2 + v1*v2/3 - q1*q2 - 0.2*z1 - 0.1*v1*z1"
    system = LagrangianSystem(L, 2, 1)
    s = system.to_general_structure()
    for p in random_points(s, 5, rng):
        X = system.lagrangian_vector_field(p)
        Xs = hamiltonian_vector_field(s, system.energy_function(), p)
        assert np.allclose(X, Xs, rtol=1e-9, atol=1e-9)


def test_dissipation_rates(models):
    rates = models("rocket").lagrangian.dissipation_rates((0, 0, 0, 0, 0))
    assert rates.tolist() == [1e-2, 1e-3, 1e-4]


def test_point_accepted_as_extended_point(models):
    system = models("e1").lagrangian
    p = ExtendedPoint(1, 2, (1, 1, 0, 0))
    assert np.array_equal(system.lagrangian_vector_field(p), system((1, 1, 0, 0)))
