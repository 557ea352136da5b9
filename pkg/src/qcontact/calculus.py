"""Exact derivatives of scalar fields by hyper-dual evaluation.

Every routine here is *generic*: coordinates may be floats or hyper-dual
numbers, so derivatives of derived quantities (for example the components of
a vector field built from second derivatives of a Lagrangian) are obtained by
stacking another hyper-dual layer on top. The central-difference oracle is kept
separate and is only meant for cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .dual import HyperDual, parts, real_part, tag_of
from .expressions import Expr, as_expr, compile_expr

ScalarFn = Callable[[Sequence], object]
VectorFn = Callable[[Sequence], Sequence]


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ExtendedPoint:
    """A point (q^1..q^n, v^1..v^n, z_1..z_q) of TQ x R^q."""

    n: int
    qcount: int
    coords: tuple

    def __post_init__(self):
        if self.n < 1 or self.qcount < 1:
            raise DimensionMismatch("n and qcount must be positive")
        coords = tuple(float(c) for c in self.coords)
        if len(coords) != 2 * self.n + self.qcount:
            raise DimensionMismatch(
                f"expected {2 * self.n + self.qcount} coordinates, got {len(coords)}")
        if not all(math.isfinite(c) for c in coords):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_parts(cls, q, v, z) -> "ExtendedPoint":
        q, v, z = list(q), list(v), list(z)
        if len(q) != len(v):
            raise DimensionMismatch("q and v must have the same length")
        return cls(len(q), len(z), tuple(q + v + z))

    @property
    def dim(self) -> int:
        return 2 * self.n + self.qcount

    @property
    def q(self) -> tuple:
        return self.coords[: self.n]

    @property
    def v(self) -> tuple:
        return self.coords[self.n: 2 * self.n]

    @property
    def z(self) -> tuple:
        return self.coords[2 * self.n:]

    def array(self) -> np.ndarray:
        return np.array(self.coords)


def bind(field: Union[str, Expr, ScalarFn], n: int, qcount: int,
         params: Mapping[str, float] | None = None) -> ScalarFn:
    """Turn an expression (or pass through a callable) into ``f(coords)``."""
    if callable(field):
        return field
    return compile_expr(as_expr(field), n, qcount, params or {})


def coordinate_indices(selector, n: int, qcount: int) -> list[int]:
    """Resolve ``"q"``, ``"v"``, ``"z"``, ``"all"`` or an explicit index list."""
    if isinstance(selector, str):
        blocks = {"q": range(0, n), "v": range(n, 2 * n),
                  "z": range(2 * n, 2 * n + qcount), "all": range(0, 2 * n + qcount)}
        return list(blocks[selector])
    return [int(i) for i in selector]


# --------------------------------------------------------------------------- generic engine

def _layer_tag(*groups) -> int:
    return 1 + max((tag_of(x) for g in groups for x in g), default=0)


def _seed(coords: Sequence, tag: int, a: Sequence | None = None,
          b: Sequence | None = None) -> list:
    out = []
    for k, c in enumerate(coords):
        out.append(HyperDual(c, 0.0 if a is None else a[k], 0.0 if b is None else b[k],
                             0.0, tag))
    return out


def _unit(k: int, size: int) -> list[float]:
    e = [0.0] * size
    e[k] = 1.0
    return e


def grad_generic(fn: ScalarFn, coords: Sequence) -> list:
    tag = _layer_tag(coords)
    size = len(coords)
    out = []
    for k in range(size):
        val = fn(_seed(coords, tag, a=_unit(k, size)))
        out.append(parts(val, tag)[1])
    return out


def jvp_generic(fn: VectorFn, coords: Sequence, direction: Sequence) -> list:
    """Directional derivative of a vector-valued function: J(coords) @ direction."""
    tag = _layer_tag(coords, direction)
    vals = fn(_seed(coords, tag, a=direction))
    return [parts(v, tag)[1] for v in vals]


def jacobian_generic(fn: VectorFn, coords: Sequence) -> list[list]:
    """J[i][k] = d fn_i / d coord_k."""
    size = len(coords)
    cols = [jvp_generic(fn, coords, _unit(k, size)) for k in range(size)]
    return [[cols[k][i] for k in range(size)] for i in range(len(cols[0]))] if cols else []


def second_partials_generic(fn: ScalarFn, coords: Sequence, rows: Sequence[int],
                            cols: Sequence[int]):
    """Mixed second partials on the rows x cols block plus the first partials met."""
    tag = _layer_tag(coords)
    size = len(coords)
    block = [[0.0] * len(cols) for _ in rows]
    first: dict[int, object] = {}
    for i, r in enumerate(rows):
        for j, c in enumerate(cols):
            val = fn(_seed(coords, tag, a=_unit(r, size), b=_unit(c, size)))
            _, da, db, dab = parts(val, tag)
            block[i][j] = dab
            first[r] = da
            first[c] = db
    return block, first


def _lstsq_base(A: list[list[float]], b: list[float]) -> list[float]:
    Am = np.array(A, dtype=float)
    bm = np.array(b, dtype=float)
    if Am.shape[0] == Am.shape[1]:
        return list(np.linalg.solve(Am, bm))
    return list(np.linalg.lstsq(Am, bm, rcond=None)[0])


def _matvec(A, x):
    return [sum((aij * xj for aij, xj in zip(row, x)), 0.0) for row in A]


def solve_generic(A: Sequence[Sequence], b: Sequence) -> list:
    """Solve A x = b (least squares when overdetermined) for nested hyper-duals.

    Derivative parts follow from differentiating the consistent system:
    ``A0 x' = b' - A' x0`` and so on, each solved with the primal matrix.
    """
    tag = max(max((tag_of(a) for row in A for a in row), default=0),
              max((tag_of(x) for x in b), default=0))
    if tag == 0:
        return _lstsq_base([[float(a) for a in row] for row in A], [float(x) for x in b])
    split = [[parts(a, tag) for a in row] for row in A]
    A0 = [[p[0] for p in row] for row in split]
    Aa = [[p[1] for p in row] for row in split]
    Ab = [[p[2] for p in row] for row in split]
    Aab = [[p[3] for p in row] for row in split]
    bparts = [parts(x, tag) for x in b]
    b0 = [p[0] for p in bparts]
    x0 = solve_generic(A0, b0)
    xa = solve_generic(A0, [bi[1] - ri for bi, ri in zip(bparts, _matvec(Aa, x0))])
    xb = solve_generic(A0, [bi[2] - ri for bi, ri in zip(bparts, _matvec(Ab, x0))])
    rhs = [bi[3] - r1 - r2 - r3 for bi, r1, r2, r3 in
           zip(bparts, _matvec(Aa, xb), _matvec(Ab, xa), _matvec(Aab, x0))]
    xab = solve_generic(A0, rhs)
    return [HyperDual(v, a, bb, ab, tag) for v, a, bb, ab in zip(x0, xa, xb, xab)]


def to_floats(values) -> np.ndarray:
    return np.array([real_part(v) for v in values], dtype=float)


# --------------------------------------------------------------------------- public API

def _fn_and_coords(field, point: ExtendedPoint, params):
    return bind(field, point.n, point.qcount, params), list(point.coords)


def gradient(field, point: ExtendedPoint, params: Mapping[str, float] | None = None) -> np.ndarray:
    """All first partials of ``field`` at ``point``, one hyper-dual pass per coordinate."""
    fn, coords = _fn_and_coords(field, point, params)
    return to_floats(grad_generic(fn, coords))


def hessian_block(field, point: ExtendedPoint, params: Mapping[str, float] | None = None,
                  rows="all", cols="all") -> np.ndarray:
    fn, coords = _fn_and_coords(field, point, params)
    r = coordinate_indices(rows, point.n, point.qcount)
    c = coordinate_indices(cols, point.n, point.qcount)
    block, _ = second_partials_generic(fn, coords, r, c)
    return np.array([[real_part(x) for x in row] for row in block], dtype=float)


def finite_difference_oracle(field, point: ExtendedPoint,
                             params: Mapping[str, float] | None = None,
                             order: int = 1, h: float | None = None) -> np.ndarray:
    """Central-difference gradient (order 1) or full Hessian (order 2).

    Default steps are 1e-5 for first derivatives and 1e-4 for second.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if h is None:
        h = 1e-5 if order == 1 else 1e-4
    if h <= 0:
        raise ValueError("step must be positive")
    fn, coords = _fn_and_coords(field, point, params)
    x = np.array(coords, dtype=float)
    size = len(x)

    def f(y):
        return float(fn(list(y)))

    if order == 1:
        g = np.empty(size)
        for k in range(size):
            e = np.zeros(size)
            e[k] = h
            g[k] = (f(x + e) - f(x - e)) / (2 * h)
        return g
    H = np.empty((size, size))
    f0 = f(x)
    for i in range(size):
        ei = np.zeros(size)
        ei[i] = h
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h**2
        for j in range(i + 1, size):
            ej = np.zeros(size)
            ej[j] = h
            H[i, j] = H[j, i] = (f(x + ei + ej) - f(x + ei - ej)
                                 - f(x - ei + ej) + f(x - ei - ej)) / (4 * h**2)
    return H
