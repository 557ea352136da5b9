"""Symbolic oracle used to freeze reference values in the test suite.

Solves lambda_i(X) = -E_L and i_X dlambda_1 = dE_L - sum_i dE_L(R_i) lambda_i
directly with sympy, independently of the closed-form field in the package.
Run once; paste the printed numbers into the tests.
"""

import sympy as sp

q, v, z1, z2 = sp.symbols("q v z1 z2")
X = [q, v, z1, z2]


def field(L, point):
    Lv = sp.diff(L, v)
    E = v * Lv - L
    lam = [[-Lv, 0, 1, 0], [-Lv, 0, 0, 1]]
    M = sp.Matrix(4, 4, lambda a, b: sp.diff(lam[0][b], X[a]) - sp.diff(lam[0][a], X[b]))
    # Reeb fields: lambda_i(R_j) = delta_ij and M^T R = 0
    reeb = []
    for j in range(2):
        r = sp.symbols("r0:4")
        eqs = [sum(lam[i][k] * r[k] for k in range(4)) - (1 if i == j else 0) for i in range(2)]
        eqs += list(M.T * sp.Matrix(r))
        sol = sp.solve(eqs, r, dict=True)[0]
        reeb.append([sol.get(s, s) for s in r])
    dE = [sp.diff(E, s) for s in X]
    rhs = [dE[a] - sum(sum(dE[k] * reeb[i][k] for k in range(4)) * lam[i][a] for i in range(2))
           for a in range(4)]
    x = sp.symbols("x0:4")
    eqs = [sum(lam[i][k] * x[k] for k in range(4)) + E for i in range(2)]
    eqs += [sum(M[b, a] * x[b] for b in range(4)) - rhs[a] for a in range(4)]
    subs = dict(zip(X, point))
    eqs = [e.subs(subs) for e in eqs]
    sol = sp.solve(eqs, x, dict=True)[0]
    return [sp.N(sol[s], 17) for s in x], sp.N(E.subs(subs), 17), [
        [sp.N(c.subs(subs), 17) for c in r] for r in reeb]


if __name__ == "__main__":
    L = sp.exp(z1) * v**2 / 2 - q**2 / 2 - sp.Rational(3, 10) * z1 * v - z2 * q / 5
    pt = (sp.Rational(1, 2), sp.Rational(-3, 4), sp.Rational(1, 5), sp.Rational(7, 10))
    print("L1", field(L, pt))
    L2 = v**4 / 12 + v**2 / 2 - sp.cos(q) - z1 * z2 / 10 - v * z1 / 7
    pt2 = (sp.Rational(3, 10), sp.Rational(6, 5), sp.Rational(-1, 2), sp.Rational(1, 4))
    print("L2", field(L2, pt2))
