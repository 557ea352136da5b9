"""Lifts, the Noether-type condition, and symmetry checks for q-contact Lagrangians.

Vector fields on TQ x R^q are generic callables ``coords -> components`` (see
:class:`qcontact.geometry.VectorField`), so brackets with X_{E_L} are taken by
differentiating the closed-form field with another hyper-dual layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import calculus as calc
from .calculus import DimensionMismatch, ExtendedPoint
from .dual import real_part
from .expressions import as_expr, compile_expr, free_symbols
from .geometry import (QContactStructure, VectorField, _pair, hamiltonian_field_generic,
                       lie_derivative_form_generic)
from .lagrangian import LagrangianSystem

DEFAULT_REL_TOL = 1e-7


@dataclass(frozen=True)
class BaseVectorField:
    """Y = Y^i d/dq^i on the configuration space; components depend on q only."""

    n: int
    exprs: tuple
    fn: Callable = field(repr=False, compare=False, default=None)

    @classmethod
    def from_exprs(cls, exprs: Sequence, n: int | None = None,
                   params: Mapping[str, float] | None = None) -> "BaseVectorField":
        parsed = tuple(as_expr(e) for e in exprs)
        n = len(parsed) if n is None else n
        if len(parsed) != n:
            raise DimensionMismatch(f"base field needs {n} components")
        for e in parsed:
            coords, _ = free_symbols(e)
            bad = sorted(f"{k}{i}" for k, i in coords if k != "q")
            if bad:
                raise ValueError(f"base field components may only use q variables, got {bad}")
        fns = [compile_expr(e, n, 0, params or {}) for e in parsed]
        return cls(n, parsed, lambda x: [f(x) for f in fns])

    def __call__(self, coords: Sequence) -> list:
        # q offsets do not depend on qcount, so full coordinate lists work
        return self.fn(coords)


def _zeros(k: int) -> list:
    return [0.0] * k


def complete_lift(Y: BaseVectorField, qcount: int) -> VectorField:
    """Y^c = Y^i d/dq^i + v^j (dY^i/dq^j) d/dv^i."""
    n = Y.n

    def lifted(x):
        # derivative of Y along q in the direction v
        direction = list(x[n:2 * n]) + _zeros(len(x) - n)
        return list(Y(x)) + calc.jvp_generic(Y, x, direction) + _zeros(qcount)

    return VectorField(n, qcount, lifted)


def vertical_lift(Y: BaseVectorField, qcount: int) -> VectorField:
    """Y^v = Y^i d/dv^i."""
    n = Y.n
    return VectorField(n, qcount, lambda x: _zeros(n) + list(Y(x)) + _zeros(qcount))


def vertical_endomorphism(X: Sequence, n: int) -> list:
    """S(X): moves the dq-components into the dv-slots and zeroes the rest."""
    return _zeros(n) + list(X[:n]) + _zeros(len(X) - 2 * n)


def lie_bracket_generic(A: Callable, B: Callable, coords: Sequence) -> list:
    """[A, B]^a = A^b d_b B^a - B^b d_b A^a."""
    a_val, b_val = A(coords), B(coords)
    dB_A = calc.jvp_generic(B, coords, a_val)
    dA_B = calc.jvp_generic(A, coords, b_val)
    return [x - y for x, y in zip(dB_A, dA_B)]


def vertical_derivative_generic(system: LagrangianSystem, X: Callable, coords: Sequence):
    """X^v(L) = S(X)(L) = F^i dL/dv^i for X with q-components F."""
    F = X(coords)[: system.n]
    return _pair(F, system.dL_dv(coords))


def vertical_derivative(system: LagrangianSystem, X: Callable) -> Callable:
    return lambda coords: vertical_derivative_generic(system, X, coords)


def _floats(values) -> np.ndarray:
    return calc.to_floats(values)


def _key(point) -> list:
    return list(point.coords) if isinstance(point, ExtendedPoint) else [float(c) for c in point]


# --------------------------------------------------------------------------- Noether-type condition

def noether_condition_terms(system: LagrangianSystem, X: Callable, point) -> tuple[float, ...]:
    """The three terms -X(L), -[X_{E_L}, X]^v L and sum_i (dL/dz_i) H_i."""
    x = _key(point)
    system._require_regular(x)
    n = system.n
    grad = _floats(calc.grad_generic(system.L, x))
    Xv = _floats(X(x))
    bracket = _floats(lie_bracket_generic(system.field_generic, X, x))
    Lv = grad[n:2 * n]
    return (-float(grad @ Xv), -float(bracket[:n] @ Lv), float(grad[2 * n:] @ Xv[2 * n:]))


def noether_condition_residual(system: LagrangianSystem, X: Callable, point) -> float:
    """-X(L) - [X_{E_L}, X]^v L + sum_i (dL/dz_i) H_i at the point."""
    return float(sum(noether_condition_terms(system, X, point)))


def noether_condition_scale(system: LagrangianSystem, X: Callable, point) -> float:
    return 1.0 + float(sum(abs(t) for t in noether_condition_terms(system, X, point)))


# --------------------------------------------------------------------------- along trajectories

def _scalar(system: LagrangianSystem, f) -> Callable:
    return calc.bind(f, system.n, system.qcount, system.params)


def dissipated_profile(system: LagrangianSystem, f, states: np.ndarray,
                       relative: bool = False) -> np.ndarray:
    """Per-sample d/dt f + f * sum_i R_i(E_L), with d/dt f by the chain rule."""
    fn = _scalar(system, f)
    out = np.empty(len(states))
    for k, x in enumerate(states):
        X = system.lagrangian_vector_field(x)
        grad = _floats(calc.grad_generic(fn, list(x)))
        fval = float(real_part(fn(list(x))))
        rsum = float(np.sum(system.dissipation_rates(x)))
        r = float(grad @ X) + fval * rsum
        if relative:
            r /= 1.0 + float(np.sum(np.abs(grad * X))) + abs(fval * rsum)
        out[k] = r
    return out


def dissipated_along_flow(system: LagrangianSystem, f, traj, relative: bool = False) -> float:
    """Max over samples of |d/dt f + f sum_i R_i(E_L)| along an X_{E_L} trajectory."""
    return float(np.max(np.abs(dissipated_profile(system, f, traj.states, relative))))


# --------------------------------------------------------------------------- symmetry checks

@dataclass
class SymmetryReport:
    check: str
    points: int
    max_residual: float
    tolerance: float
    passed: bool
    components: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"check": self.check, "points": self.points, "max_residual": self.max_residual,
               "tolerance": self.tolerance, "pass": bool(self.passed)}
        if self.components:
            out["components"] = self.components
        if self.flags:
            out["flags"] = self.flags
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def dynamical_symmetry_residual(system: LagrangianSystem, Y: Callable, point) -> np.ndarray:
    """Components of [Y, X_{E_L}] at the point."""
    x = _key(point)
    system._require_regular(x)
    return _floats(lie_bracket_generic(Y, system.field_generic, x))


def dynamical_symmetry_scale(system: LagrangianSystem, Y: Callable, point) -> float:
    x = _key(point)
    a = _floats(calc.jvp_generic(system.field_generic, x, Y(x)))
    b = _floats(calc.jvp_generic(Y, x, system.field_generic(x)))
    return 1.0 + float(max(np.max(np.abs(a)), np.max(np.abs(b))))


def lie_derivative_coframe(system: LagrangianSystem, Y: Callable, point) -> np.ndarray:
    """Rows L_Y lambda_i^L by the Cartan formula."""
    x = _key(point)
    rows = []
    for i in range(system.qcount):
        form = (lambda c, i=i: system.coframe_generic(c)[i])
        rows.append(_floats(lie_derivative_form_generic(form, Y, x)))
    return np.array(rows)


def noether_symmetry_check(system: LagrangianSystem, Y: Callable, points: Sequence,
                           tol: float = DEFAULT_REL_TOL) -> SymmetryReport:
    """Y is a Noether symmetry when Y(E_L) = 0 and L_Y lambda_i^L = 0 for all i."""
    energy_fn = system.energy_function()
    e_res, form_res = [], []
    for p in points:
        x = _key(p)
        system._require_regular(x)
        grad = _floats(calc.grad_generic(energy_fn, x))
        Yv = _floats(Y(x))
        e_res.append(abs(float(grad @ Yv)) / (1.0 + float(np.sum(np.abs(grad * Yv)))))
        lie = lie_derivative_coframe(system, Y, x)
        lam = np.array([_floats(row) for row in system.coframe_generic(x)])
        form_res.append(float(np.max(np.abs(lie))) / (1.0 + float(np.max(np.abs(lam)))
                                                      * (1.0 + float(np.max(np.abs(Yv))))))
    worst = max(max(e_res), max(form_res))
    flags = {"energy_invariant": max(e_res) <= tol, "coframe_invariant": max(form_res) <= tol}
    return SymmetryReport("noether_symmetry", len(points), worst, tol, worst <= tol,
                          {"energy": max(e_res), "coframe": max(form_res)}, flags)


def cartan_symmetry_residual(system: LagrangianSystem, X: Callable, f: Sequence,
                             points: Sequence, tol: float = 1e-9,
                             reeb_tol: float = 1e-10) -> SymmetryReport:
    """Max of L_X lambda_i^L - d f_i, plus the Reeb contractions of d(f_i - H_i + X^v L)."""
    if len(f) != system.qcount:
        raise DimensionMismatch(f"need {system.qcount} functions f_i, got {len(f)}")
    fns = [_scalar(system, fi) for fi in f]
    n = system.n
    per_form = [0.0] * system.qcount
    reeb_worst = 0.0
    for p in points:
        x = _key(p)
        system._require_regular(x)
        lie = lie_derivative_coframe(system, X, x)
        reebs = system.reeb_fields(x)
        for i, fi in enumerate(fns):
            df = _floats(calc.grad_generic(fi, x))
            per_form[i] = max(per_form[i], float(np.max(np.abs(lie[i] - df))))

            def g(c, fi=fi, i=i):
                return fi(c) - X(c)[2 * n + i] + vertical_derivative_generic(system, X, c)

            dg = _floats(calc.grad_generic(g, x))
            reeb_worst = max(reeb_worst, float(np.max(np.abs(reebs @ dg))))
    worst = max(per_form)
    passed = worst <= tol and reeb_worst <= reeb_tol
    return SymmetryReport("cartan_symmetry", len(points), worst, tol, passed,
                          {"per_form": per_form, "reeb_contraction": reeb_worst,
                           "reeb_tolerance": reeb_tol},
                          {"cartan": worst <= tol, "reeb_vanishing": reeb_worst <= reeb_tol})


def hamiltonian_noether_check(structure: QContactStructure, H, f, points: Sequence,
                              tol: float = DEFAULT_REL_TOL) -> SymmetryReport:
    """Relate "X_f is a Noether symmetry of (structure, H)" to "f is dissipated".

    Forward: Noether symmetry implies dissipated. Converse: dissipated together
    with R_i(f) = 0 for all i implies Noether symmetry. The report says which
    hypotheses and conclusions hold; ``pass`` means neither implication is
    contradicted at the sample points.
    """
    Hn, fn = structure.scalar(H), structure.scalar(f)
    noether_res, diss_res, reeb_vals = [], [], []
    for p in points:
        x = _key(p)
        Xf = (lambda c: hamiltonian_field_generic(structure, fn, c))
        XH = _floats(hamiltonian_field_generic(structure, Hn, x))
        Xf_val = _floats(Xf(x))
        gH = _floats(calc.grad_generic(Hn, x))
        gf = _floats(calc.grad_generic(fn, x))
        reebs = np.array([r.at(ExtendedPoint(structure.n, structure.qcount, tuple(x)))
                          for r in structure.reeb])
        lie = np.array([_floats(lie_derivative_form_generic(form, Xf, x))
                        for form in structure.coframe])
        e_term = abs(float(gH @ Xf_val)) / (1.0 + float(np.sum(np.abs(gH * Xf_val))))
        noether_res.append(max(e_term, float(np.max(np.abs(lie))) / (1.0 + float(
            np.max(np.abs(Xf_val))))))
        fval = float(real_part(fn(x)))
        rsum = float(np.sum(reebs @ gH))
        d = float(gf @ XH) + fval * rsum
        diss_res.append(abs(d) / (1.0 + float(np.sum(np.abs(gf * XH))) + abs(fval * rsum)))
        reeb_vals.append(float(np.max(np.abs(reebs @ gf))))
    is_noether = max(noether_res) <= tol
    is_dissipated = max(diss_res) <= tol
    reeb_free = max(reeb_vals) <= tol
    forward_ok = (not is_noether) or is_dissipated
    converse_ok = not (is_dissipated and reeb_free) or is_noether
    flags = {"noether_symmetry": is_noether, "dissipated": is_dissipated,
             "converse_hypothesis": reeb_free, "forward_implication_holds": forward_ok,
             "converse_implication_holds": converse_ok}
    components = {"noether": max(noether_res), "dissipated": max(diss_res),
                  "reeb_of_f": max(reeb_vals)}
    worst = max(noether_res) if is_noether else max(diss_res)
    return SymmetryReport("hamiltonian_noether", len(points), worst, tol,
                          forward_ok and converse_ok, components, flags)


# --------------------------------------------------------------------------- lifted identities

def complete_lift_derivative(system: LagrangianSystem, Y: BaseVectorField, point) -> float:
    """Y^c(L) at the point."""
    x = _key(point)
    Yc = complete_lift(Y, system.qcount)
    return float(_floats(calc.grad_generic(system.L, x)) @ _floats(Yc(x)))


def corollary_sides(system: LagrangianSystem, Y: BaseVectorField, point,
                    structure: QContactStructure | None = None) -> tuple[float, float]:
    """({E_L, Y^v(L)}, Y^c(L)) with the bracket from the general solver."""
    from .geometry import qcontact_bracket

    structure = structure or system.to_general_structure()
    p = point if isinstance(point, ExtendedPoint) else system.point(point)
    # Y^v(L) = S(Y^c)(L)
    Yc = complete_lift(Y, system.qcount)
    bracket = qcontact_bracket(structure, system.energy_function(),
                               vertical_derivative(system, Yc), p)
    return bracket, complete_lift_derivative(system, Y, p)


def bracket_identity_sides(system: LagrangianSystem, X: Callable, point,
                           structure: QContactStructure | None = None) -> tuple[float, float]:
    """({E_L, X^v L}, -X(L) - [X_{E_L}, X]^v L + sum_i (dL/dz_i) H_i)."""
    from .geometry import qcontact_bracket

    structure = structure or system.to_general_structure()
    p = point if isinstance(point, ExtendedPoint) else system.point(point)
    bracket = qcontact_bracket(structure, system.energy_function(),
                               vertical_derivative(system, X), p)
    return bracket, noether_condition_residual(system, X, p)
