"""Verification suites run by ``qcontact verify``.

Each check produces a :class:`~qcontact.geometry.CheckResult`. Check names are
stable identifiers listed in docs/traceability.md.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import calculus as calc
from .dual import real_part
from .dynamics import (IntegrationError, IntegratorConfig, NonPositiveEnergy, decay_metrics, dissipation_drift,
                       herglotz_profile, integrate, integrate_pontryagin, stationarity_profile)
from .geometry import (CheckResult, dissipation_residual, dissipation_scale,
                       hamiltonian_field_generic, hamiltonian_vector_field, qcontact_bracket,
                       random_points, stacked_residual, verify_structure)
from .models import Model
from .symmetry import (BaseVectorField, bracket_identity_sides, cartan_symmetry_residual,
                       complete_lift, corollary_sides, dissipated_along_flow,
                       hamiltonian_noether_check, lie_bracket_generic, vertical_endomorphism)

SUITES = ("structure", "dynamics", "noether", "pontryagin")
DEFAULT_BASE_TOL = 1e-9


def base_tolerance(override: float | None = None) -> float:
    """Structural tolerance: explicit value, else QCONTACT_TOL, else 1e-9."""
    if override is not None:
        return float(override)
    env = os.environ.get("QCONTACT_TOL")
    if env:
        try:
            value = float(env)
        except ValueError as exc:
            raise ValueError(f"QCONTACT_TOL={env!r} is not a number") from exc
        if not value > 0:
            raise ValueError("QCONTACT_TOL must be positive")
        return value
    return DEFAULT_BASE_TOL


@dataclass
class SuiteContext:
    model: Model
    points: list
    tol: float
    rng: np.random.Generator
    _traj: object = None

    def trajectory(self):
        """The reference X_{E_L} / X_H trajectory, integrated once per run."""
        if self._traj is None:
            m = self.model
            cfg = IntegratorConfig("rk45", 0.0, m.t1)
            self._traj = integrate(m.vector_field(), m.initial_point(), cfg, model_id=m.name)
        return self._traj


def _check(name, residual, tol, lower_bound=False, detail=""):
    residual = float(residual)
    ok = residual > tol if lower_bound else residual <= tol
    return CheckResult(name, residual, tol, bool(ok and math.isfinite(residual)), detail)


def sample_points(model: Model, count: int, rng: np.random.Generator) -> list:
    pts = random_points((model.n, model.qcount), count, rng)
    return pts + [model.initial_point()]


def _floats(x):
    return calc.to_floats(x)


# --------------------------------------------------------------------------- structure

def _guard(out: list, names: Sequence[str], tols: Sequence[float], fn: Callable) -> None:
    """Run one group of checks; an exception marks every check in the group failed."""
    try:
        out.extend(fn())
    except (ArithmeticError, ValueError, IntegrationError, np.linalg.LinAlgError) as exc:
        detail = f"{type(exc).__name__}: {exc}"
        out.extend(CheckResult(nm, math.nan, t, False, detail) for nm, t in zip(names, tols))


def structure_suite(ctx: SuiteContext) -> list[CheckResult]:
    m, pts, tol = ctx.model, ctx.points, ctx.tol
    s = m.general_structure()
    H = m.energy()
    out = []
    rep = verify_structure(s, pts, tol)
    for name, c in rep.checks.items():
        out.append(CheckResult("structure." + name, c.max_residual, c.tolerance, c.passed,
                               c.detail))

    out.append(_check("geometry.stacked_residual",
                      max(stacked_residual(s, H, p) for p in pts), tol))

    def field_checks():
        resub = diss = 0.0
        for p in pts:
            X = hamiltonian_vector_field(s, H, p)
            h = float(real_part(H(list(p.coords))))
            for form in s.coframe:
                resub = max(resub, abs(float(form.at(p) @ X) + h) / (1.0 + abs(h)))
            diss = max(diss, abs(dissipation_residual(s, H, p)) / dissipation_scale(s, H, p))
        return [_check("geometry.resubstitution", resub, tol),
                _check("geometry.dissipation_law", diss, tol)]

    _guard(out, ["geometry.resubstitution", "geometry.dissipation_law"], [tol, tol],
           field_checks)

    def bracket_check():
        # {H, g} closed form against lambda_j([X_H, X_g]) for every j
        g = s.scalar("q1*v1 + z1 + v1^3/3")
        two_ways = 0.0
        for p in pts[:5]:
            x = list(p.coords)
            closed = qcontact_bracket(s, H, g, p)
            comm = _floats(lie_bracket_generic(lambda c: hamiltonian_field_generic(s, H, c),
                                               lambda c: hamiltonian_field_generic(s, g, c), x))
            for form in s.coframe:
                two_ways = max(two_ways,
                               abs(closed - float(form.at(p) @ comm)) / (1 + abs(closed)))
        return [_check("geometry.bracket_two_ways", two_ways, 1e-6)]

    _guard(out, ["geometry.bracket_two_ways"], [1e-6], bracket_check)

    if m.is_lagrangian:
        names = ["lagrangian.regularity", "lagrangian.oracle_equivalence",
                 "lagrangian.resubstitution", "lagrangian.reeb_energy",
                 "lagrangian.herglotz_pointwise"]
        _guard(out, names, [1e-10, 1e-7, tol, 1e-10, tol],
               lambda: _lagrangian_checks(ctx, s, H))
    return out


def _lagrangian_checks(ctx: SuiteContext, s, H) -> list[CheckResult]:
    system, pts, tol = ctx.model.lagrangian, ctx.points, ctx.tol
    n = system.n
    out = []
    worst_det = math.inf
    for p in pts:
        W, _ = system.regularity_check(p)
        worst_det = min(worst_det, abs(np.linalg.det(W)) / max(1.0, np.linalg.norm(W, 2) ** n))
    out.append(_check("lagrangian.regularity", worst_det, 1e-10, lower_bound=True,
                      detail="smallest normalised |det W|"))

    oracle = resub = reeb = herg = 0.0
    for p in pts:
        X = system.lagrangian_vector_field(p)
        Xs = hamiltonian_vector_field(s, H, p)
        oracle = max(oracle, float(np.max(np.abs(X - Xs))) / (1.0 + float(np.linalg.norm(X))))
        E = system.energy(p)
        g, _, _, Lval = system.blocks(p)
        lam = system.contact_coframe(p)
        scale = 1.0 + abs(E)
        resub = max(resub, float(np.max(np.abs(lam @ X + E))) / scale,
                    float(np.max(np.abs(X[2 * n:] - Lval))) / (1.0 + abs(Lval)),
                    float(np.max(np.abs(X[:n] - np.asarray(p.coords[n:2 * n])))))
        R = system.reeb_fields(p)
        dE = _floats(calc.grad_generic(system.energy_function(), list(p.coords)))
        reeb = max(reeb, float(np.max(np.abs(R @ dE + g[2 * n:])))
                   / (1.0 + float(np.max(np.abs(g[2 * n:])))))
        acc = X[n:2 * n]
        herg = max(herg, float(np.max(np.abs(system.herglotz_residual(p, acc))))
                   / system.herglotz_scale(p, acc))
    out.append(_check("lagrangian.oracle_equivalence", oracle, 1e-7))
    out.append(_check("lagrangian.resubstitution", resub, tol))
    out.append(_check("lagrangian.reeb_energy", reeb, 1e-10))
    out.append(_check("lagrangian.herglotz_pointwise", herg, tol))
    return out


# --------------------------------------------------------------------------- dynamics

def dynamics_suite(ctx: SuiteContext) -> list[CheckResult]:
    m = ctx.model
    out = []
    H = m.energy()
    cfg = IntegratorConfig("rk45", 0.0, m.t1)

    def Hf(x):
        return float(real_part(H(list(x))))

    drift = dissipation_drift(m.vector_field(), Hf, m.reeb_total(), m.initial, cfg, m.n,
                              m.qcount)
    out.append(_check("dynamics.dissipation_integrated", drift, 1e-7))
    traj = ctx.trajectory()

    # z_i - z_j is invariant only on the Lagrangian side, where every z_i' = L
    if m.is_lagrangian and m.qcount >= 2:
        z = traj.z
        diffs = z[:, :, None] - z[:, None, :]
        out.append(_check("dynamics.difference_invariants",
                          float(np.max(np.abs(diffs - diffs[0]))), 1e-8))

    if m.is_lagrangian:
        system = m.lagrangian
        out.append(_check("dynamics.herglotz_along_flow",
                          float(np.max(herglotz_profile(system, traj))), 1e-7))
        out.append(_check("dynamics.energy_dissipated",
                          dissipated_along_flow(system, system.energy_function(), traj,
                                                relative=True), 1e-8))
        rates = np.array([np.sum(system.dissipation_rates(x)) for x in traj.states])
        if np.ptp(rates) == 0.0:
            try:
                dm = decay_metrics(traj, system)
            except NonPositiveEnergy:
                dm = None
            if dm is not None:
                out.append(_check("dynamics.decay_rate", abs(dm.rate + rates[0]), 1e-5,
                                  detail=f"fitted {dm.rate!r}, expected {-rates[0]!r}"))
    else:
        totals = [m.reeb_total()(x) for x in traj.states]
        if max(abs(t) for t in totals) == 0.0:
            vals = np.array([Hf(x) for x in traj.states])
            out.append(_check("dynamics.conserved_hamiltonian",
                              float(np.max(np.abs(vals - vals[0]))) / (1 + abs(vals[0])), 1e-8))
    return out


# --------------------------------------------------------------------------- noether

def _poly_field(n: int) -> BaseVectorField:
    return BaseVectorField.from_exprs([f"1 + q{i + 1} + q{i + 1}^2/2" for i in range(n)], n)


def noether_suite(ctx: SuiteContext) -> list[CheckResult]:
    m, pts = ctx.model, ctx.points
    s = m.general_structure()
    out = []
    if not m.is_lagrangian:
        rep = hamiltonian_noether_check(s, m.hamiltonian, m.hamiltonian, pts[:5])
        out.append(CheckResult("noether.hamiltonian_noether", rep.max_residual, rep.tolerance,
                               rep.passed, str(rep.flags)))
        return out

    system = m.lagrangian
    n, qc = system.n, system.qcount
    few = pts[:8]

    Y = _poly_field(n)
    Yc = complete_lift(Y, qc)
    # a field with z components, so the sum (dL/dz_i) H_i term is exercised
    Xmix = (lambda c: list(Yc(c))[:2 * n] + [c[0] * c[n]] * qc)
    ident = corr = comm = 0.0
    for p in few:
        x = list(p.coords)
        for X in (Yc, Xmix):
            a, b = bracket_identity_sides(system, X, p, s)
            ident = max(ident, abs(a - b) / (1 + abs(a) + abs(b)))
        a, b = corollary_sides(system, Y, p, s)
        corr = max(corr, abs(a + b) / (1 + abs(a) + abs(b)))
        br = _floats(lie_bracket_generic(system.field_generic, Yc, x))
        svec = np.asarray(vertical_endomorphism(list(br), n)[n:2 * n])
        comm = max(comm, float(np.max(np.abs(svec))) / (1 + float(np.max(np.abs(br)))))
    out.append(_check("noether.bracket_identity", ident, 1e-6))
    out.append(_check("noether.corollary_lift", corr, 1e-6,
                      detail="checks {E_L, Y^v(L)} = -Y^c(L)"))
    out.append(_check("noether.lift_vertical_commutator", comm, 1e-7))

    R1 = (lambda c: system.reeb_generic(c)[0])
    rep = cartan_symmetry_residual(system, R1, ["0"] * qc, few)
    out.append(CheckResult("noether.reeb_cartan", rep.max_residual, rep.tolerance, rep.passed,
                           f"reeb contraction {rep.components['reeb_contraction']!r}"))
    if m.name == "e1":
        Xc = (lambda c: [0.0, 1.0] + list(c[2:]))
        rep = cartan_symmetry_residual(system, Xc, [f"z{i + 1} - q1" for i in range(qc)], few)
        out.append(CheckResult("noether.cartan_example", rep.max_residual, rep.tolerance,
                               rep.passed,
                               f"reeb contraction {rep.components['reeb_contraction']!r}"))

    rep = hamiltonian_noether_check(s, system.energy_function(), system.energy_function(),
                                    pts[:4])
    out.append(CheckResult("noether.hamiltonian_noether", rep.max_residual, rep.tolerance,
                           rep.passed, str(rep.flags)))
    return out


# --------------------------------------------------------------------------- pontryagin

def pontryagin_suite(ctx: SuiteContext) -> list[CheckResult]:
    m = ctx.model
    if not m.is_lagrangian:
        return []
    system = m.lagrangian
    run = integrate_pontryagin(system, ctx.trajectory())
    stat, mlaw = stationarity_profile(run, system)
    out = [
        _check("pontryagin.transversality", float(np.max(np.abs(run.mu[-1] - 1.0))), 0.0),
        _check("pontryagin.stationarity", float(np.max(stat)), 1e-6),
        _check("pontryagin.m_law", float(np.max(mlaw)), 1e-6),
        _check("pontryagin.m_positive", float(np.min(run.M)), 0.0, lower_bound=True),
    ]
    zsums = np.array([np.sum(system.blocks(x)[0][2 * system.n:]) for x in run.forward.states])
    if np.ptp(zsums) == 0.0:
        t, t1 = run.times, run.times[-1]
        exact = system.qcount * np.exp(-zsums[0] * (t - t1))
        out.append(_check("pontryagin.m_closed_form",
                          float(np.max(np.abs(run.M - exact) / exact)), 1e-8))
    return out


RUNNERS: dict[str, Callable[[SuiteContext], list[CheckResult]]] = {
    "structure": structure_suite, "dynamics": dynamics_suite,
    "noether": noether_suite, "pontryagin": pontryagin_suite}


def run_suites(model: Model, suites, points: int = 20, seed: int = 0,
               tol: float | None = None) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    ctx = SuiteContext(model, sample_points(model, points, rng), base_tolerance(tol), rng)
    results = []
    for name in suites:
        # a suite that cannot even run (e.g. the flow fails) is one failed check
        _guard(results, [f"{name}.run"], [0.0], lambda name=name: RUNNERS[name](ctx))
    return results


__all__ = ["SUITES", "run_suites", "base_tolerance", "sample_points"]
