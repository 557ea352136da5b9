"""Built-in models and the JSON model configuration."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import calculus as calc
from .calculus import ExtendedPoint
from .expressions import ExpressionError, as_expr, free_symbols, to_text
from .geometry import QContactStructure, hamiltonian_vector_field
from .lagrangian import LagrangianSystem


class ConfigError(ValueError):
    """A model configuration that cannot be loaded or validated."""


@dataclass
class Model:
    """A ready-to-run model: either a Lagrangian system or a structure with H."""

    name: str
    kind: str
    n: int
    qcount: int
    params: dict
    initial: tuple
    t1: float = 10.0
    lagrangian: LagrangianSystem | None = None
    structure: QContactStructure | None = None
    hamiltonian: object = None
    source: dict = field(default_factory=dict)

    @property
    def is_lagrangian(self) -> bool:
        return self.lagrangian is not None

    def general_structure(self) -> QContactStructure:
        if self.structure is not None:
            return self.structure
        return self.lagrangian.to_general_structure()

    def energy(self) -> Callable:
        """Generic scalar generating the dynamics (E_L or H)."""
        if self.is_lagrangian:
            return self.lagrangian.energy_function()
        return self.structure.scalar(self.hamiltonian)

    def vector_field(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.is_lagrangian:
            return self.lagrangian
        structure, H = self.structure, self.structure.scalar(self.hamiltonian)

        def field_fn(x):
            return hamiltonian_vector_field(structure, H,
                                            ExtendedPoint(self.n, self.qcount, tuple(x)))

        return field_fn

    def reeb_total(self) -> Callable[[np.ndarray], float]:
        """x -> sum_i R_i(H) for the generating function."""
        if self.is_lagrangian:
            system = self.lagrangian
            return lambda x: float(np.sum(system.dissipation_rates(x)))
        structure, H = self.structure, self.energy()

        def total(x):
            p = ExtendedPoint(self.n, self.qcount, tuple(x))
            grad = calc.to_floats(calc.grad_generic(H, list(x)))
            return float(sum(grad @ r.at(p) for r in structure.reeb))

        return total

    def initial_point(self) -> ExtendedPoint:
        return ExtendedPoint(self.n, self.qcount, self.initial)


# --------------------------------------------------------------------------- builders

def _gamma_names(count: int) -> list[str]:
    return [f"gamma{i + 1}" for i in range(count)]


def e1(m: int = 2, gammas: Sequence[float] = (0.1, 0.2)) -> Model:
    """L = v^2/2 - q^2/2 - sum_i gamma_i z_i on TR x R^m."""
    m = int(m)
    gammas = [float(g) for g in gammas]
    if m < 1 or len(gammas) != m:
        raise ConfigError(f"e1 needs m >= 1 and exactly m damping coefficients, got m={m}, "
                          f"{len(gammas)} coefficients")
    names = _gamma_names(m)
    L = "v1^2/2 - q1^2/2 - " + " - ".join(f"{g}*z{i + 1}" for i, g in enumerate(names))
    params = dict(zip(names, gammas))
    system = LagrangianSystem(L, 1, m, params, "e1")
    return Model("e1", "lagrangian", 1, m, params, (1.0, 1.0) + (0.0,) * m, 10.0,
                 lagrangian=system, source={"builtin": "e1", "m": m, "gammas": gammas, "L": L})


def rocket(mass: float = 5000.0, g: float = 9.81,
           gammas: Sequence[float] = (1e-2, 1e-3, 1e-4)) -> Model:
    """L = m v^2/2 - m g q - gamma_aero z1 - gamma_struct z2 - gamma_thermal z3."""
    gammas = [float(x) for x in gammas]
    if len(gammas) != 3:
        raise ConfigError("rocket needs three damping coefficients (aero, struct, thermal)")
    params = {"m": float(mass), "g": float(g), "gamma_aero": gammas[0],
              "gamma_struct": gammas[1], "gamma_thermal": gammas[2]}
    L = "m*v1^2/2 - m*g*q1 - gamma_aero*z1 - gamma_struct*z2 - gamma_thermal*z3"
    system = LagrangianSystem(L, 1, 3, params, "rocket")
    return Model("rocket", "lagrangian", 1, 3, params, (1000.0, 100.0, 0.0, 0.0, 0.0), 60.0,
                 lagrangian=system, source={"builtin": "rocket", "params": params, "L": L})


def free2contact() -> Model:
    L = "v1^2/2 - z1 - z2"
    system = LagrangianSystem(L, 1, 2, {}, "free2contact")
    return Model("free2contact", "lagrangian", 1, 2, {}, (0.0, 1.0, 0.0, 0.0), 5.0,
                 lagrangian=system, source={"builtin": "free2contact", "L": L})


def contact_r3() -> Model:
    s = QContactStructure.from_exprs(1, 1, [["-v1", "0", "1"]], [["0", "0", "1"]],
                                     name="contact-r3")
    H = "(v1^2 + q1^2)/2"
    return Model("contact-r3", "hamiltonian-structure", 1, 1, {}, (0.0, 1.0, 0.0), 3.141592653589793,
                 structure=s, hamiltonian=as_expr(H),
                 source={"builtin": "contact-r3", "H": H})


def two_contact_r4() -> Model:
    s = QContactStructure.from_exprs(
        1, 2, [["-v1", "0", "1", "0"], ["0", "q1", "0", "1"]],
        [["0", "0", "1", "0"], ["0", "0", "0", "1"]], name="two-contact-r4")
    H = "(v1^2 + q1^2)/2"
    return Model("two-contact-r4", "hamiltonian-structure", 1, 2, {}, (1.0, 2.0, 0.0, 0.0), 10.0,
                 structure=s, hamiltonian=as_expr(H),
                 source={"builtin": "two-contact-r4", "H": H})


def standard_qcontact(n: int = 1, q: int = 2) -> Model:
    """lambda_i = dz_i + sum_j x_j dy_j with x = q-block, y = v-block."""
    n, q = int(n), int(q)
    if n < 1 or q < 1:
        raise ConfigError("standard-qcontact needs n >= 1 and q >= 1")
    coframe = []
    for i in range(q):
        comps = ["0"] * n + [f"q{j + 1}" for j in range(n)] + ["0"] * q
        comps[2 * n + i] = "1"
        coframe.append(comps)
    reeb = []
    for i in range(q):
        comps = ["0"] * (2 * n + q)
        comps[2 * n + i] = "1"
        reeb.append(comps)
    s = QContactStructure.from_exprs(n, q, coframe, reeb, name=f"standard-qcontact({n},{q})")
    quad = " + ".join(f"q{j + 1}^2 + v{j + 1}^2" for j in range(n))
    H = f"({quad})/2 + 0.1*(" + " + ".join(f"z{i + 1}" for i in range(q)) + ")"
    return Model(f"standard-qcontact({n},{q})", "hamiltonian-structure", n, q, {},
                 (1.0,) * n + (0.0,) * n + (0.0,) * q, 5.0, structure=s, hamiltonian=as_expr(H),
                 source={"builtin": "standard-qcontact", "n": n, "q": q, "H": H})


def example_e1_structure(m: int = 2, gammas: Sequence[float] = (0.1, 0.2)) -> Model:
    """The structure induced by the e1 Lagrangian, written out by hand, with H = E_L."""
    m = int(m)
    gammas = [float(g) for g in gammas]
    if m < 1 or len(gammas) != m:
        raise ConfigError("example-e1 needs m >= 1 and exactly m damping coefficients")
    names = _gamma_names(m)
    coframe, reeb = [], []
    for i in range(m):
        c = ["-v1", "0"] + ["0"] * m
        c[2 + i] = "1"
        coframe.append(c)
        r = ["0", "0"] + ["0"] * m
        r[2 + i] = "1"
        reeb.append(r)
    params = dict(zip(names, gammas))
    s = QContactStructure.from_exprs(1, m, coframe, reeb, params, name="example-e1")
    H = "v1^2/2 + q1^2/2 + " + " + ".join(f"{g}*z{i + 1}" for i, g in enumerate(names))
    return Model("example-e1", "hamiltonian-structure", 1, m, params, (1.0, 1.0) + (0.0,) * m,
                 10.0, structure=s, hamiltonian=as_expr(H),
                 source={"builtin": "example-e1", "m": m, "gammas": gammas, "H": H})


LAGRANGIANS = ("e1", "rocket", "free2contact")
STRUCTURES = ("contact-r3", "two-contact-r4", "standard-qcontact", "example-e1")

_NAME = re.compile(r"^\s*([a-z0-9\-]+)\s*(?:\((.*)\))?\s*$", re.IGNORECASE)


def _numbers(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad numeric argument list {text!r}") from exc


def parse_builtin(spec: str) -> tuple[str, list[list[float]]]:
    """Split ``name(a, b; c, d)`` into the name and its ';'-separated groups."""
    match = _NAME.match(spec)
    if not match:
        raise ConfigError(f"cannot parse built-in model name {spec!r}")
    name, args = match.group(1).lower(), match.group(2)
    groups = [] if args is None else [_numbers(g) for g in args.split(";")]
    return name, groups


def builtin(spec: str) -> Model:
    """Look up a built-in model, e.g. ``e1``, ``e1(3; 0.1, 0.2, 0.3)``, ``rocket``."""
    name, groups = parse_builtin(spec)
    try:
        if name == "e1":
            if not groups:
                return e1()
            m = int(groups[0][0]) if groups[0] else 2
            gam = groups[1] if len(groups) > 1 else [0.1 * (i + 1) for i in range(m)]
            return e1(m, gam)
        if name == "example-e1":
            if not groups:
                return example_e1_structure()
            m = int(groups[0][0]) if groups[0] else 2
            gam = groups[1] if len(groups) > 1 else [0.1 * (i + 1) for i in range(m)]
            return example_e1_structure(m, gam)
        if name == "rocket":
            if not groups:
                return rocket()
            first = groups[0] + [None] * (2 - len(groups[0]))
            mass = first[0] if first[0] is not None else 5000.0
            g = first[1] if first[1] is not None else 9.81
            gam = groups[1] if len(groups) > 1 else (1e-2, 1e-3, 1e-4)
            return rocket(mass, g, gam)
        if name == "free2contact":
            return free2contact()
        if name == "contact-r3":
            return contact_r3()
        if name == "two-contact-r4":
            return two_contact_r4()
        if name == "standard-qcontact":
            dims = groups[0] if groups else [1, 2]
            if len(dims) != 2:
                raise ConfigError("standard-qcontact takes (n, q)")
            return standard_qcontact(int(dims[0]), int(dims[1]))
    except (IndexError, TypeError) as exc:
        raise ConfigError(f"bad arguments for built-in {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown built-in model {name!r}; known: "
                      + ", ".join(LAGRANGIANS + STRUCTURES))


# --------------------------------------------------------------------------- JSON config

@dataclass
class ModelConfig:
    kind: str = "lagrangian"
    n: int | None = None
    qcount: int | None = None
    expressions: dict | None = None
    params: dict = field(default_factory=dict)
    builtin: str | None = None
    initial: list | None = None
    name: str = "custom"

    KINDS = ("lagrangian", "hamiltonian-structure")

    @classmethod
    def from_dict(cls, data: Mapping, where: str = "<config>") -> "ModelConfig":
        if not isinstance(data, Mapping):
            raise ConfigError(f"{where}: top level must be a JSON object")
        known = {"kind", "n", "qcount", "expressions", "params", "builtin", "initial", "name"}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"{where}: unknown keys {extra}")
        cfg = cls(kind=data.get("kind", "lagrangian"), n=data.get("n"),
                  qcount=data.get("qcount"), expressions=data.get("expressions"),
                  params=dict(data.get("params") or {}), builtin=data.get("builtin"),
                  initial=data.get("initial"), name=data.get("name", "custom"))
        cfg.validate(where)
        return cfg

    @classmethod
    def load(cls, path) -> "ModelConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
        return cls.from_dict(data, str(path))

    def validate(self, where: str = "<config>") -> None:
        if (self.builtin is None) == (self.expressions is None):
            raise ConfigError(f"{where}: give exactly one of 'builtin' or 'expressions'")
        if self.kind not in self.KINDS:
            raise ConfigError(f"{where}: 'kind' must be one of {list(self.KINDS)}")
        for k, v in self.params.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"{where}: params.{k} must be a number")
        if self.builtin is not None:
            return
        if not isinstance(self.n, int) or not isinstance(self.qcount, int) \
                or self.n < 1 or self.qcount < 1:
            raise ConfigError(f"{where}: 'n' and 'qcount' must be positive integers")
        ex = self.expressions
        if not isinstance(ex, Mapping):
            raise ConfigError(f"{where}: 'expressions' must be an object")
        dim = 2 * self.n + self.qcount
        if self.kind == "lagrangian":
            if set(ex) != {"L"}:
                raise ConfigError(f"{where}: lagrangian expressions need exactly the key 'L'")
            self._check_expr(ex["L"], f"{where}: expressions.L")
        else:
            if set(ex) != {"H", "coframe", "reeb"}:
                raise ConfigError(f"{where}: structure expressions need 'H', 'coframe', 'reeb'")
            self._check_expr(ex["H"], f"{where}: expressions.H")
            for key in ("coframe", "reeb"):
                rows = ex[key]
                if not isinstance(rows, list) or len(rows) != self.qcount:
                    raise ConfigError(f"{where}: expressions.{key} needs {self.qcount} rows")
                for i, row in enumerate(rows):
                    if not isinstance(row, list) or len(row) != dim:
                        raise ConfigError(
                            f"{where}: expressions.{key}[{i}] needs {dim} components")
                    for j, comp in enumerate(row):
                        self._check_expr(comp, f"{where}: expressions.{key}[{i}][{j}]")
        if self.initial is not None and (not isinstance(self.initial, list)
                                         or len(self.initial) != dim):
            raise ConfigError(f"{where}: 'initial' needs {dim} numbers")

    def _check_expr(self, text, where: str) -> None:
        if not isinstance(text, str):
            raise ConfigError(f"{where}: expected an expression string")
        try:
            node = as_expr(text)
        except ExpressionError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
        coords, names = free_symbols(node)
        for kind, index in sorted(coords):
            limit = self.qcount if kind == "z" else self.n
            if index > limit:
                raise ConfigError(f"{where}: {kind}{index} exceeds the declared dimension {limit}")
        missing = sorted(names - set(self.params))
        if missing:
            raise ConfigError(f"{where}: unbound parameters {missing}")

    def build(self) -> Model:
        if self.builtin is not None:
            model = builtin(self.builtin)
        elif self.kind == "lagrangian":
            L = self.expressions["L"]
            system = LagrangianSystem(L, self.n, self.qcount, self.params, self.name)
            init = (0.0,) * self.n + (1.0,) * self.n + (0.0,) * self.qcount
            model = Model(self.name, "lagrangian", self.n, self.qcount, dict(self.params), init,
                          10.0, lagrangian=system, source=self.canonical())
        else:
            ex = self.expressions
            s = QContactStructure.from_exprs(self.n, self.qcount, ex["coframe"], ex["reeb"],
                                             self.params, self.name)
            init = (1.0,) * self.n + (0.0,) * (self.n + self.qcount)
            model = Model(self.name, "hamiltonian-structure", self.n, self.qcount,
                          dict(self.params), init, 10.0, structure=s,
                          hamiltonian=as_expr(ex["H"]), source=self.canonical())
        if self.initial is not None:
            model.initial = tuple(float(x) for x in self.initial)
        return model

    def canonical(self) -> dict:
        """Normalised content used for the config digest."""
        out = {"kind": self.kind, "params": {k: float(v) for k, v in sorted(self.params.items())}}
        if self.builtin is not None:
            out["builtin"] = self.builtin
        else:
            ex = self.expressions
            out.update(n=self.n, qcount=self.qcount)
            if self.kind == "lagrangian":
                out["expressions"] = {"L": to_text(as_expr(ex["L"]))}
            else:
                out["expressions"] = {
                    "H": to_text(as_expr(ex["H"])),
                    "coframe": [[to_text(as_expr(c)) for c in row] for row in ex["coframe"]],
                    "reeb": [[to_text(as_expr(c)) for c in row] for row in ex["reeb"]]}
        if self.initial is not None:
            out["initial"] = [float(x) for x in self.initial]
        return out
