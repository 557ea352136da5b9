"""Uniform q-contact structures in coordinates on R^(2n+q).

A structure is a coframe (lambda_1..lambda_q) plus its Reeb fields, both given
as component functions of the coordinates. Component functions are evaluated
generically, so every quantity below can itself be differentiated by seeding
another hyper-dual layer (see :mod:`qcontact.calculus`).

Conventions: the matrix ``M`` of a 2-form ``omega`` satisfies
``omega(X, Y) = X @ M @ Y``, so ``i_X omega`` has components ``M.T @ X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import calculus as calc
from .calculus import DimensionMismatch, ExtendedPoint
from .dual import real_part
from .expressions import as_expr, compile_expr

DEFAULT_TOL = 1e-9


class InconsistentSystem(ArithmeticError):
    """The defining equations of X_H have no unique solution at this point."""

    def __init__(self, residual: float, message: str = ""):
        self.residual = residual
        super().__init__(message or f"stacked system residual {residual:.3e} exceeds tolerance")


def _compile_components(exprs, n, qcount, params):
    fns = [compile_expr(as_expr(e), n, qcount, params) for e in exprs]
    return lambda x: [f(x) for f in fns]


@dataclass(frozen=True)
class CovectorField:
    """Coefficients of a 1-form in the coordinate cobasis dq, dv, dz."""

    n: int
    qcount: int
    fn: Callable[[Sequence], list]
    exprs: tuple | None = None

    @classmethod
    def from_exprs(cls, exprs: Sequence, n: int, qcount: int,
                   params: Mapping[str, float] | None = None) -> "CovectorField":
        parsed = tuple(as_expr(e) for e in exprs)
        if len(parsed) != 2 * n + qcount:
            raise DimensionMismatch(f"covector needs {2 * n + qcount} components")
        return cls(n, qcount, _compile_components(parsed, n, qcount, params or {}), parsed)

    def __call__(self, coords: Sequence) -> list:
        return self.fn(coords)

    def at(self, point: ExtendedPoint) -> np.ndarray:
        return calc.to_floats(self.fn(list(point.coords)))


@dataclass(frozen=True)
class VectorField:
    """Components F_1..F_n, G_1..G_n, H_1..H_q in the coordinate basis."""

    n: int
    qcount: int
    fn: Callable[[Sequence], list]
    exprs: tuple | None = None

    @classmethod
    def from_exprs(cls, exprs: Sequence, n: int, qcount: int,
                   params: Mapping[str, float] | None = None) -> "VectorField":
        parsed = tuple(as_expr(e) for e in exprs)
        if len(parsed) != 2 * n + qcount:
            raise DimensionMismatch(f"vector field needs {2 * n + qcount} components")
        return cls(n, qcount, _compile_components(parsed, n, qcount, params or {}), parsed)

    @classmethod
    def constant(cls, values: Sequence[float], n: int, qcount: int) -> "VectorField":
        vals = [float(v) for v in values]
        return cls(n, qcount, lambda x: list(vals))

    def __call__(self, coords: Sequence) -> list:
        return self.fn(coords)

    def at(self, point: ExtendedPoint) -> np.ndarray:
        return calc.to_floats(self.fn(list(point.coords)))


VectorFieldSpec = VectorField


@dataclass(frozen=True)
class QContactStructure:
    n: int
    qcount: int
    coframe: tuple
    reeb: tuple
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = "custom"

    def __post_init__(self):
        if len(self.coframe) != self.qcount or len(self.reeb) != self.qcount:
            raise DimensionMismatch("need exactly qcount coframe forms and Reeb fields")
        for f in (*self.coframe, *self.reeb):
            if (f.n, f.qcount) != (self.n, self.qcount):
                raise DimensionMismatch("component field dimensions disagree with structure")

    @property
    def dim(self) -> int:
        return 2 * self.n + self.qcount

    @classmethod
    def from_exprs(cls, n: int, qcount: int, coframe: Sequence[Sequence],
                   reeb: Sequence[Sequence], params: Mapping[str, float] | None = None,
                   name: str = "custom") -> "QContactStructure":
        params = dict(params or {})
        return cls(n, qcount,
                   tuple(CovectorField.from_exprs(c, n, qcount, params) for c in coframe),
                   tuple(VectorField.from_exprs(r, n, qcount, params) for r in reeb),
                   params, name)

    def scalar(self, f) -> Callable:
        return calc.bind(f, self.n, self.qcount, self.params)

    def check_point(self, point: ExtendedPoint) -> None:
        if (point.n, point.qcount) != (self.n, self.qcount):
            raise DimensionMismatch(
                f"point has dimensions {(point.n, point.qcount)}, "
                f"structure {(self.n, self.qcount)}")


# --------------------------------------------------------------------------- generic pieces

def _pair(a: Sequence, b: Sequence):
    return sum((x * y for x, y in zip(a, b)), 0.0)


def dform_generic(form: Callable, coords: Sequence) -> list[list]:
    """Matrix of d(form): M[a][b] = d_a c_b - d_b c_a."""
    J = calc.jacobian_generic(form, coords)  # J[b][a] = d_a c_b
    size = len(coords)
    return [[J[b][a] - J[a][b] for b in range(size)] for a in range(size)]


def contract_generic(M: Sequence[Sequence], X: Sequence) -> list:
    """Components of i_X omega for the 2-form with matrix M."""
    size = len(X)
    return [_pair([M[a][b] for a in range(size)], X) for b in range(size)]


def stacked_system_generic(structure: QContactStructure, H: Callable, coords: Sequence):
    """Rows of ``i_X dlambda_1 = dH - sum dH(R_i) lambda_i`` and ``lambda_i(X) = -H``."""
    size = len(coords)
    lams = [form(coords) for form in structure.coframe]
    reebs = [r(coords) for r in structure.reeb]
    M = dform_generic(structure.coframe[0], coords)
    dH = calc.grad_generic(H, coords)
    Hval = H(coords)
    dHR = [_pair(dH, R) for R in reebs]
    rhs_top = [dH[b] - sum((dHR[i] * lams[i][b] for i in range(len(lams))), 0.0)
               for b in range(size)]
    rows = [[M[a][b] for a in range(size)] for b in range(size)]
    rows += [list(lam) for lam in lams]
    rhs = rhs_top + [-Hval] * len(lams)
    return rows, rhs


def hamiltonian_field_generic(structure: QContactStructure, H: Callable,
                              coords: Sequence) -> list:
    rows, rhs = stacked_system_generic(structure, H, coords)
    return calc.solve_generic(rows, rhs)


def lie_derivative_form_generic(form: Callable, X: Callable, coords: Sequence) -> list:
    """Cartan formula: L_X lambda = d(lambda(X)) + i_X d lambda."""
    d_pair = calc.grad_generic(lambda x: _pair(form(x), X(x)), coords)
    iX = contract_generic(dform_generic(form, coords), X(coords))
    return [a + b for a, b in zip(d_pair, iX)]


# --------------------------------------------------------------------------- operations

def exterior_derivative_matrix(form: CovectorField, point: ExtendedPoint) -> np.ndarray:
    M = dform_generic(form, list(point.coords))
    return np.array([[real_part(x) for x in row] for row in M])


@dataclass
class CheckResult:
    name: str
    max_residual: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        out = {"name": self.name, "max_residual": self.max_residual,
               "tolerance": self.tolerance, "pass": bool(self.passed)}
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class StructureReport:
    checks: dict[str, CheckResult]
    per_point: list[dict[str, float]]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failing(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]


STRUCTURE_CHECKS = ("duality", "uniformity", "nondegeneracy", "reeb_kernel", "independence")


def _point_structure_residuals(structure: QContactStructure, point: ExtendedPoint) -> dict:
    lams = np.array([form.at(point) for form in structure.coframe])
    reebs = np.array([r.at(point) for r in structure.reeb])
    mats = [exterior_derivative_matrix(form, point) for form in structure.coframe]
    M1 = mats[0]
    scale = max(1.0, float(np.max(np.abs(M1))))

    duality = float(np.max(np.abs(lams @ reebs.T - np.eye(structure.qcount))))
    uniformity = max(float(np.max(np.abs(M - M1))) for M in mats) / scale
    reeb_kernel = float(np.max(np.abs(M1.T @ reebs.T))) / scale

    # xi = common kernel of the coframe; need d lambda_1 non-degenerate there
    _, s_lam, vt = np.linalg.svd(lams)
    independence = float(s_lam[-1] / max(1.0, s_lam[0]))
    xi = vt[structure.qcount:].T
    restricted = xi.T @ M1 @ xi
    s_res = np.linalg.svd(restricted, compute_uv=False)
    nondegeneracy = float(s_res[-1] / scale) if s_res.size else 0.0
    return {"duality": duality, "uniformity": uniformity, "reeb_kernel": reeb_kernel,
            "independence": independence, "nondegeneracy": nondegeneracy}


def verify_structure(structure: QContactStructure, sample_points: Sequence[ExtendedPoint],
                     tol: float = DEFAULT_TOL) -> StructureReport:
    """Check the q-contact axioms at each sample point.

    duality, uniformity and reeb_kernel are residuals that must be <= tol;
    nondegeneracy and independence are smallest normalised singular values that
    must be > tol (rank 2n on xi, rank q for the coframe).
    """
    if not sample_points:
        raise ValueError("need at least one sample point")
    per_point = []
    for p in sample_points:
        structure.check_point(p)
        per_point.append(_point_structure_residuals(structure, p))
    checks = {}
    for name in ("duality", "uniformity", "reeb_kernel"):
        worst = max(r[name] for r in per_point)
        checks[name] = CheckResult(name, worst, tol, worst <= tol)
    for name in ("nondegeneracy", "independence"):
        worst = min(r[name] for r in per_point)
        checks[name] = CheckResult(name, worst, tol, worst > tol,
                                   "smallest normalised singular value")
    return StructureReport(checks, per_point)


def _solve_float(structure: QContactStructure, Hfn: Callable, point: ExtendedPoint,
                 tol: float):
    structure.check_point(point)
    rows, rhs = stacked_system_generic(structure, Hfn, list(point.coords))
    A = np.array([[real_part(a) for a in row] for row in rows])
    r = np.array([real_part(b) for b in rhs])
    x, _, rank, _ = np.linalg.lstsq(A, r, rcond=None)
    if rank < structure.dim:
        raise InconsistentSystem(float("nan"),
                                 f"defining equations have rank {rank} < {structure.dim}; "
                                 "X_H is not unique")
    residual = float(np.linalg.norm(A @ x - r))
    if residual > tol * (1.0 + float(np.linalg.norm(r))):
        raise InconsistentSystem(residual)
    return x, residual


def hamiltonian_vector_field(structure: QContactStructure, H, point: ExtendedPoint,
                             tol: float = DEFAULT_TOL) -> np.ndarray:
    """Solve lambda_i(X) = -H and i_X dlambda_1 = dH - sum_i dH(R_i) lambda_i."""
    x, _ = _solve_float(structure, structure.scalar(H), point, tol)
    return x


def stacked_residual(structure: QContactStructure, H, point: ExtendedPoint) -> float:
    """Relative residual of the stacked defining system at the solved X_H."""
    Hfn = structure.scalar(H)
    rows, rhs = stacked_system_generic(structure, Hfn, list(point.coords))
    A = np.array([[real_part(a) for a in row] for row in rows])
    r = np.array([real_part(b) for b in rhs])
    x = np.linalg.lstsq(A, r, rcond=None)[0]
    return float(np.linalg.norm(A @ x - r)) / (1.0 + float(np.linalg.norm(r)))


def directional(f: Callable, point: ExtendedPoint, X: np.ndarray) -> float:
    """X(f) at the point for a scalar field f."""
    return float(np.dot(calc.to_floats(calc.grad_generic(f, list(point.coords))), X))


def reeb_sum(structure: QContactStructure, f, point: ExtendedPoint) -> float:
    """sum_i R_i(f)."""
    fn = structure.scalar(f)
    grad = calc.to_floats(calc.grad_generic(fn, list(point.coords)))
    return float(sum(np.dot(grad, r.at(point)) for r in structure.reeb))


def qcontact_bracket(structure: QContactStructure, f, g, point: ExtendedPoint,
                     tol: float = DEFAULT_TOL) -> float:
    """{f, g} = -X_f(g) - g * sum_i R_i(f)."""
    fn, gn = structure.scalar(f), structure.scalar(g)
    Xf = hamiltonian_vector_field(structure, fn, point, tol)
    return -directional(gn, point, Xf) - float(gn(list(point.coords))) * reeb_sum(
        structure, fn, point)


def dissipated_quantity_residual(structure: QContactStructure, H, f, point: ExtendedPoint,
                                 tol: float = DEFAULT_TOL) -> float:
    """X_H(f) + f * sum_i R_i(H); zero when f is dissipated."""
    Hn, fn = structure.scalar(H), structure.scalar(f)
    XH = hamiltonian_vector_field(structure, Hn, point, tol)
    return directional(fn, point, XH) + float(fn(list(point.coords))) * reeb_sum(
        structure, Hn, point)


def dissipation_residual(structure: QContactStructure, H, point: ExtendedPoint,
                         tol: float = DEFAULT_TOL) -> float:
    """X_H(H) + H * sum_i R_i(H); zero certifies the dissipation law."""
    return dissipated_quantity_residual(structure, H, H, point, tol)


def conserved_quantity_residual(structure: QContactStructure, H, g, point: ExtendedPoint,
                                tol: float = DEFAULT_TOL) -> float:
    """X_H(g); zero when g is conserved."""
    XH = hamiltonian_vector_field(structure, H, point, tol)
    return directional(structure.scalar(g), point, XH)


def dissipation_scale(structure: QContactStructure, H, point: ExtendedPoint,
                      tol: float = DEFAULT_TOL) -> float:
    """Magnitude of the terms entering the dissipation law, for relative checks."""
    Hn = structure.scalar(H)
    XH = hamiltonian_vector_field(structure, Hn, point, tol)
    grad = calc.to_floats(calc.grad_generic(Hn, list(point.coords)))
    Hval = abs(float(Hn(list(point.coords))))
    return 1.0 + float(np.sum(np.abs(grad * XH))) + Hval * abs(reeb_sum(structure, Hn, point))


def random_points(structure_or_dims, count: int, rng: np.random.Generator,
                  low: float = -2.0, high: float = 2.0) -> list[ExtendedPoint]:
    if isinstance(structure_or_dims, tuple):
        n, qcount = structure_or_dims
    else:
        n, qcount = structure_or_dims.n, structure_or_dims.qcount
    return [ExtendedPoint(n, qcount, tuple(rng.uniform(low, high, 2 * n + qcount)))
            for _ in range(count)]


def structure_from_functions(n: int, qcount: int, coframe: Sequence[Callable],
                             reeb: Sequence[Callable], name: str = "custom",
                             params: Mapping[str, float] | None = None) -> QContactStructure:
    return QContactStructure(
        n, qcount,
        tuple(CovectorField(n, qcount, f) for f in coframe),
        tuple(VectorField(n, qcount, r) for r in reeb),
        dict(params or {}), name)

