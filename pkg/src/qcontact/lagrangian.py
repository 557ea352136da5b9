"""q-contact Lagrangian systems on TQ x R^q.

From a regular Lagrangian L(q, v, z) we build the contact forms
``lambda_i = dz_i - (dL/dv^j) dq^j``, the Reeb fields
``R_k = d/dz_k - W^{ij} (d2L/dv^i dz_k) d/dv^j``, the energy
``E_L = v^i dL/dv^i - L`` and the closed-form dynamics X_{E_L}::

    qdot^i = v^i
    vdot^i = W^{ik} ( dL/dq^k - (d2L/dq^j dv^k) v^j
                      + sum_l ( -L d2L/dz_l dv^k + dL/dz_l dL/dv^k ) )
    zdot_l = L

All quantities are computed generically so they can be differentiated again.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import calculus as calc
from .calculus import ExtendedPoint
from .dual import real_part
from .geometry import QContactStructure, structure_from_functions

REGULARITY_THRESHOLD = 1e-10


class SingularLagrangian(ArithmeticError):
    def __init__(self, point, det: float):
        self.point = point
        self.det = det
        super().__init__(f"velocity Hessian is singular at {point} (det = {det:.3e})")


class LagrangianSystem:
    """A Lagrangian L on TQ x R^q together with its derived q-contact data."""

    def __init__(self, L, n: int, qcount: int, params: Mapping[str, float] | None = None,
                 name: str = "custom"):
        self.n = n
        self.qcount = qcount
        self.params = dict(params or {})
        self.name = name
        self.source = L
        self.L = calc.bind(L, n, qcount, self.params)
        self._blocks = lru_cache(maxsize=4096)(self._compute_blocks)

    @property
    def dim(self) -> int:
        return 2 * self.n + self.qcount

    def __repr__(self):
        return f"LagrangianSystem({self.name!r}, n={self.n}, qcount={self.qcount})"

    def point(self, coords) -> ExtendedPoint:
        return ExtendedPoint(self.n, self.qcount, tuple(coords))

    # ------------------------------------------------------------------ generic pieces

    def jets(self, coords: Sequence):
        """Gradient of L and the velocity rows V[k][j] = d2L/dv^k dx^j."""
        n = self.n
        rows = list(range(n, 2 * n))
        block, first = calc.second_partials_generic(self.L, coords, rows, range(len(coords)))
        grad = [first[j] for j in range(len(coords))]
        return grad, block

    def velocity_hessian(self, V) -> list[list]:
        n = self.n
        return [[V[k][n + i] for i in range(n)] for k in range(n)]

    def dL_dv(self, coords: Sequence) -> list:
        n = self.n
        tag_coords = list(coords)
        out = []
        for k in range(n):
            e = [0.0] * len(coords)
            e[n + k] = 1.0
            out.append(calc.jvp_generic(lambda x: [self.L(x)], tag_coords, e)[0])
        return out

    def energy_generic(self, coords: Sequence):
        n = self.n
        Lv = self.dL_dv(coords)
        return sum((coords[n + i] * Lv[i] for i in range(n)), 0.0) - self.L(coords)

    def coframe_generic(self, coords: Sequence) -> list[list]:
        n, qc = self.n, self.qcount
        Lv = self.dL_dv(coords)
        forms = []
        for i in range(qc):
            dz = [0.0] * qc
            dz[i] = 1.0
            forms.append([-x for x in Lv] + [0.0] * n + dz)
        return forms

    def reeb_generic(self, coords: Sequence) -> list[list]:
        n, qc = self.n, self.qcount
        _, V = self.jets(coords)
        W = self.velocity_hessian(V)
        fields = []
        for k in range(qc):
            y = calc.solve_generic(W, [V[i][2 * n + k] for i in range(n)])
            dz = [0.0] * qc
            dz[k] = 1.0
            fields.append([0.0] * n + [-yj for yj in y] + dz)
        return fields

    def field_generic(self, coords: Sequence) -> list:
        n, qc = self.n, self.qcount
        grad, V = self.jets(coords)
        Lval = self.L(coords)
        Lq, Lv, Lz = grad[:n], grad[n:2 * n], grad[2 * n:]
        Lz_sum = sum(Lz, 0.0)
        rhs = []
        for k in range(n):
            mixed_q = sum((V[k][j] * coords[n + j] for j in range(n)), 0.0)
            mixed_z = sum((V[k][2 * n + l] for l in range(qc)), 0.0)
            rhs.append(Lq[k] - mixed_q - Lval * mixed_z + Lz_sum * Lv[k])
        acc = calc.solve_generic(self.velocity_hessian(V), rhs)
        return list(coords[n:2 * n]) + list(acc) + [Lval] * qc

    # ------------------------------------------------------------------ float paths

    def _compute_blocks(self, coords: tuple):
        grad, V = self.jets(list(coords))
        g = np.array([real_part(x) for x in grad])
        Vm = np.array([[real_part(x) for x in row] for row in V])
        W = Vm[:, self.n:2 * self.n]
        det = float(np.linalg.det(W))
        scale = max(1.0, float(np.linalg.norm(W, 2)) ** self.n)
        regular = bool(np.isfinite(det) and abs(det) >= REGULARITY_THRESHOLD * scale)
        return g, Vm, W, float(real_part(self.L(list(coords)))), det, regular

    def blocks(self, point) -> tuple:
        return self._blocks(self._key(point))[:4]

    def _key(self, point) -> tuple:
        if isinstance(point, ExtendedPoint):
            return point.coords
        return tuple(float(c) for c in point)

    def regularity_check(self, point) -> tuple[np.ndarray, float]:
        """Velocity Hessian W and its condition number; raises if W is singular."""
        self._require_regular(point)
        W = self.blocks(point)[2]
        return W.copy(), float(np.linalg.cond(W))

    def _require_regular(self, point) -> None:
        key = self._key(point)
        det, regular = self._blocks(key)[4:]
        if not regular:
            raise SingularLagrangian(key, det)

    def contact_coframe(self, point) -> np.ndarray:
        g, _, _, _ = self.blocks(point)
        self._require_regular(point)
        n, qc = self.n, self.qcount
        out = np.zeros((qc, self.dim))
        out[:, :n] = -g[n:2 * n]
        out[:, 2 * n:] = np.eye(qc)
        return out

    def reeb_fields(self, point) -> np.ndarray:
        _, Vm, W, _ = self.blocks(point)
        self._require_regular(point)
        n, qc = self.n, self.qcount
        out = np.zeros((qc, self.dim))
        y = np.linalg.solve(W, Vm[:, 2 * n:])
        out[:, n:2 * n] = -y.T
        out[:, 2 * n:] = np.eye(qc)
        return out

    def energy(self, point) -> float:
        g, _, _, Lval = self.blocks(point)
        v = np.asarray(self._coords(point)[self.n:2 * self.n])
        return float(np.dot(v, g[self.n:2 * self.n]) - Lval)

    def lagrangian_vector_field(self, point) -> np.ndarray:
        """X_{E_L} at the point, from the closed form above."""
        g, Vm, W, Lval = self.blocks(point)
        self._require_regular(point)
        n, qc = self.n, self.qcount
        x = np.asarray(self._coords(point))
        v = x[n:2 * n]
        Lq, Lv, Lz = g[:n], g[n:2 * n], g[2 * n:]
        rhs = Lq - Vm[:, :n] @ v - Lval * Vm[:, 2 * n:].sum(axis=1) + Lz.sum() * Lv
        acc = np.linalg.solve(W, rhs)
        return np.concatenate([v, acc, np.full(qc, Lval)])

    def __call__(self, state) -> np.ndarray:
        return self.lagrangian_vector_field(tuple(float(s) for s in state))

    def herglotz_residual(self, point, acceleration) -> np.ndarray:
        """d/dt(dL/dv^k) - dL/dq^k - (sum_i dL/dz_i) dL/dv^k along qdot=v, zdot=L."""
        g, Vm, W, Lval = self.blocks(point)
        self._require_regular(point)
        n = self.n
        x = np.asarray(self._coords(point))
        a = np.asarray(acceleration, dtype=float).reshape(n)
        ddt_Lv = Vm[:, :n] @ x[n:2 * n] + W @ a + Lval * Vm[:, 2 * n:].sum(axis=1)
        return ddt_Lv - g[:n] - g[2 * n:].sum() * g[n:2 * n]

    def herglotz_scale(self, point, acceleration) -> float:
        """Size of the largest term in the Herglotz residual, for relative tests."""
        g, Vm, W, Lval = self.blocks(point)
        n = self.n
        x = np.asarray(self._coords(point))
        a = np.asarray(acceleration, dtype=float).reshape(n)
        terms = [np.abs(Vm[:, :n] @ x[n:2 * n]), np.abs(W @ a),
                 np.abs(Lval * Vm[:, 2 * n:].sum(axis=1)), np.abs(g[:n]),
                 np.abs(g[2 * n:].sum() * g[n:2 * n])]
        return 1.0 + float(max(np.max(t) for t in terms))

    def dissipation_rates(self, point) -> np.ndarray:
        """R_i(E_L), which equals -dL/dz_i."""
        g, _, _, _ = self.blocks(point)
        return -g[2 * self.n:]

    def to_general_structure(self) -> QContactStructure:
        """The induced q-contact structure (lambda_i^L, R_i) as a general structure."""
        coframe = [lambda x, i=i: self.coframe_generic(x)[i] for i in range(self.qcount)]
        reeb = [lambda x, i=i: self.reeb_generic(x)[i] for i in range(self.qcount)]
        return structure_from_functions(self.n, self.qcount, coframe, reeb,
                                        name=f"induced:{self.name}", params=self.params)

    def energy_function(self):
        """E_L as a generic scalar function of the coordinates."""
        return self.energy_generic

    def _coords(self, point):
        return point.coords if isinstance(point, ExtendedPoint) else tuple(point)
