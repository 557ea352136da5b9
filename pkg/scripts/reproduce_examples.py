#!/usr/bin/env python3
"""Evaluate the worked examples and print a small table of computed values.

Each row names an example, the value computed here and the value it is
compared against. Rows marked '!' are the examples whose printed form differs
from the corrected computation (see docs/traceability.md).
"""
import math

import numpy as np

from qcontact.calculus import ExtendedPoint
from qcontact.dynamics import IntegratorConfig, integrate, integrate_pontryagin
from qcontact.geometry import hamiltonian_vector_field, qcontact_bracket
from qcontact.models import builtin
from qcontact.symmetry import BaseVectorField, corollary_sides


def row(name, got, ref, mark=" "):
    print(f"{mark} {name:<42} {np.array2string(np.asarray(got), precision=6):<36} {ref}")


def main():
    c = builtin("contact-r3")
    row("contact X_H at (0,1,0)", hamiltonian_vector_field(c.structure, c.hamiltonian,
                                                           c.initial_point()), "(1, 0, 0.5)")
    traj = integrate(c.vector_field(), c.initial_point(),
                     IntegratorConfig(t1=math.pi, abs_tol=1e-10, rel_tol=1e-10))
    row("contact flow at t = pi", traj.final, "(0, -1, 0)")

    t = builtin("two-contact-r4")
    p = ExtendedPoint(1, 2, (1.0, 2.0, 0.0, 0.0))
    row("two-contact X_H at (1,2,0,0)", hamiltonian_vector_field(t.structure, t.hamiltonian, p),
        "(2, -1, 1.5, -1.5)")

    e = builtin("e1")
    row("E1 X_{E_L} at (1,1,0,0)", e.lagrangian(e.initial), "(1, -1.3, 0, 0)", "!")
    row("E1 bracket {E_L, q} at (1,1,0,0)",
        qcontact_bracket(e.general_structure(), e.energy(), "q1", e.initial_point()), "-1.3")
    f = builtin("free2contact")
    row("free2contact X_{E_L} at (0,1,0,0)", f.lagrangian(f.initial), "(1, -2, 0.5, 0.5)", "!")

    Y = BaseVectorField.from_exprs(["q1^2"])
    b, ycl = corollary_sides(e.lagrangian, Y, [0.5, 1.0, 0.0, 0.0])
    row("E1 {E_L, Y^v L} vs Y^c L, Y = q^2 d/dq", [b, ycl], "equal and opposite", "!")

    r = builtin("rocket")
    row("rocket v' at v = 100", r.lagrangian((0, 100, 0, 0, 0))[1], "-10.92")
    tr = integrate(e.lagrangian, e.initial_point(), IntegratorConfig(t1=10.0))
    run = integrate_pontryagin(e.lagrangian, tr)
    row("E1 M(0)", run.M[0], f"2 exp(-3) = {2 * math.exp(-3):.6f}")


if __name__ == "__main__":
    main()
