"""Integration of q-contact flows and the Pontryagin forward/backward pass.

Two integrators are provided: classical fixed-step RK4 and the Dormand-Prince
4(5) pair with a PI step-size controller. Both work on autonomous fields
``f(state) -> rate`` over plain numpy arrays.
"""

from __future__ import annotations

import csv
import math
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .calculus import ExtendedPoint, grad_generic, to_floats
from .lagrangian import LagrangianSystem

Field = Callable[[np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    pass


class StepSizeUnderflow(IntegrationError):
    def __init__(self, t: float, h: float):
        self.t, self.h = t, h
        super().__init__(f"step size {h:.3e} fell below the minimum at t = {t:.6g}")


class NonFiniteState(IntegrationError):
    def __init__(self, t: float):
        self.t = t
        super().__init__(f"state became non-finite at t = {t:.6g}")


class NotAnExtremal(ValueError):
    def __init__(self, residual: float, tolerance: float):
        self.residual, self.tolerance = residual, tolerance
        super().__init__(f"curve is not an extremal: residual {residual:.3e} > {tolerance:.1e}")


class NonPositiveEnergy(ValueError):
    def __init__(self, t: float, energy: float):
        self.t, self.energy = t, energy
        super().__init__(f"E_L = {energy:.6g} <= 0 at t = {t:.6g}; cannot fit a log-rate")


_METHODS = {"rk4": "rk4", "rk4-fixed": "rk4", "rk45": "rk45", "rk45-adaptive": "rk45"}


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45"
    t0: float = 0.0
    t1: float = 1.0
    step: float | None = None
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    min_step: float = 1e-12
    max_step: float = math.inf
    stride: int = 1
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}; use rk4 or rk45")
        object.__setattr__(self, "method", _METHODS[self.method])
        if not (math.isfinite(self.t0) and math.isfinite(self.t1)) or self.t1 <= self.t0:
            raise ValueError("need finite t0 < t1")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")
        if self.min_step <= 0 or self.max_step <= self.min_step:
            raise ValueError("need 0 < min_step < max_step")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def span(self) -> float:
        return self.t1 - self.t0


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    n: int
    qcount: int
    rates: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if self.states.shape != (len(self.times), 2 * self.n + self.qcount):
            raise ValueError("states must have one row of 2n+q entries per time")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def point(self, k: int) -> ExtendedPoint:
        return ExtendedPoint(self.n, self.qcount, tuple(self.states[k]))

    def points(self) -> list[ExtendedPoint]:
        return [self.point(k) for k in range(len(self))]

    @property
    def q(self) -> np.ndarray:
        return self.states[:, : self.n]

    @property
    def v(self) -> np.ndarray:
        return self.states[:, self.n: 2 * self.n]

    @property
    def z(self) -> np.ndarray:
        return self.states[:, 2 * self.n:]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def header(self) -> list[str]:
        return ([f"q{i + 1}" for i in range(self.n)] + [f"v{i + 1}" for i in range(self.n)]
                + [f"z{i + 1}" for i in range(self.qcount)])


# --------------------------------------------------------------------------- steppers

def _check_finite(y: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(y)):
        raise NonFiniteState(t)


def _rk4_step(f: Field, y: np.ndarray, h: float, k1: np.ndarray | None = None) -> np.ndarray:
    k1 = f(y) if k1 is None else k1
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100,
                1 / 40])
_E = _B5 - _B4


def _dopri_trial(f: Field, y: np.ndarray, h: float, k1: np.ndarray):
    ks = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(yi))
    y_new = y + h * sum(b * k for b, k in zip(_B5[:6], ks[:6]))
    err = h * sum(e * k for e, k in zip(_E, ks))
    return y_new, err, ks[6]


def _err_norm(err, y, y_new, atol, rtol) -> float:
    sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / sc) ** 2)))


def _initial_step(f: Field, y, k1, direction_span: float, cfg: IntegratorConfig) -> float:
    sc = cfg.abs_tol + cfg.rel_tol * np.abs(y)
    d0 = float(np.sqrt(np.mean((y / sc) ** 2)))
    d1 = float(np.sqrt(np.mean((k1 / sc) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    k2 = f(y + h0 * k1)
    d2 = float(np.sqrt(np.mean(((k2 - k1) / sc) ** 2))) / h0
    h1 = max(1e-6, h0 * 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** 0.2
    # components that start at zero with large rates make the estimate tiny;
    # a floor keeps the first samples well spaced and rejection corrects overshoot
    h = max(min(100 * h0, h1), 1e-4 * direction_span)
    return min(h, cfg.max_step, direction_span)


class _Dopri:
    """Adaptive Dormand-Prince stepping with a PI controller."""

    SAFETY, ALPHA, BETA = 0.9, 0.7 / 5, 0.4 / 5

    def __init__(self, f: Field, cfg: IntegratorConfig):
        self.f, self.cfg = f, cfg
        self.h: float | None = None
        self.err_prev = 1e-4
        self.accepted = 0
        self.rejected = 0

    def advance(self, y: np.ndarray, k1: np.ndarray, t: float, t_end: float):
        """Take one accepted step toward t_end; returns (t, y, k1_next)."""
        cfg = self.cfg
        if self.h is None:
            self.h = _initial_step(self.f, y, k1, t_end - t, cfg)
        while True:
            h = min(self.h, cfg.max_step, t_end - t)
            last = h >= t_end - t
            if h < cfg.min_step and not last:
                raise StepSizeUnderflow(t, h)
            y_new, err, k_new = _dopri_trial(self.f, y, h, k1)
            if not np.all(np.isfinite(y_new)):
                self.rejected += 1
                self.h = 0.25 * h
                if self.h < cfg.min_step:
                    raise NonFiniteState(t + h)
                continue
            en = _err_norm(err, y, y_new, cfg.abs_tol, cfg.rel_tol)
            if en <= 1.0:
                en = max(en, 1e-10)
                factor = self.SAFETY * en ** -self.ALPHA * self.err_prev ** self.BETA
                self.err_prev = en
                self.h = h * min(5.0, max(0.2, factor))
                self.accepted += 1
                t_new = t_end if last else t + h
                return t_new, y_new, k_new
            self.rejected += 1
            self.h = h * max(0.2, self.SAFETY * en ** -0.2)
            if self.h < cfg.min_step:
                raise StepSizeUnderflow(t, self.h)


def integrate(field_fn: Field, initial, config: IntegratorConfig, n: int | None = None,
              qcount: int | None = None, model_id: str = "") -> Trajectory:
    """Integrate ``x' = field_fn(x)`` from ``initial`` over ``[config.t0, config.t1]``."""
    if isinstance(initial, ExtendedPoint):
        n, qcount = initial.n, initial.qcount
        y = initial.array()
    else:
        if n is None or qcount is None:
            raise ValueError("pass an ExtendedPoint or explicit n and qcount")
        y = np.asarray(initial, dtype=float).copy()
    _check_finite(y, config.t0)

    def f(x):
        return np.asarray(field_fn(x), dtype=float)

    t = config.t0
    k1 = f(y)
    _check_finite(k1, t)
    times, states, rates = [t], [y], [k1]
    accepted = rejected = 0
    if config.method == "rk4":
        step = config.step if config.step is not None else config.span / 1000
        nsteps = max(1, math.ceil(config.span / step - 1e-9))
        h = config.span / nsteps
        for i in range(1, nsteps + 1):
            y = _rk4_step(f, y, h, k1)
            t = config.t1 if i == nsteps else config.t0 + i * h
            _check_finite(y, t)
            k1 = f(y)
            accepted += 1
            if i % config.stride == 0 or i == nsteps:
                times.append(t)
                states.append(y)
                rates.append(k1)
    else:
        stepper = _Dopri(f, config)
        count = 0
        while t < config.t1:
            if count >= config.max_steps:
                raise IntegrationError(f"exceeded {config.max_steps} steps at t = {t:.6g}")
            t, y, k1 = stepper.advance(y, k1, t, config.t1)
            count += 1
            if count % config.stride == 0 or t >= config.t1:
                times.append(t)
                states.append(y)
                rates.append(k1)
        accepted, rejected = stepper.accepted, stepper.rejected
    meta = {"model": model_id, "method": config.method, "accepted_steps": accepted,
            "rejected_steps": rejected, "config": asdict(config)}
    return Trajectory(np.array(times), np.array(states), n, qcount, np.array(rates), meta)


def _integrate_plain(f: Field, y: np.ndarray, cfg: IntegratorConfig):
    """Adaptive integration over the config span without recording samples."""
    stepper = _Dopri(f, cfg)
    t, k1 = cfg.t0, f(y)
    while t < cfg.t1:
        t, y, k1 = stepper.advance(y, k1, t, cfg.t1)
    return y, stepper.accepted


# --------------------------------------------------------------------------- finite differences

def fornberg_weights(x0: float, xs: Sequence[float], order: int) -> np.ndarray:
    """Weights w with sum w_j f(xs_j) ~ f^(order)(x0) on an arbitrary grid."""
    xs = np.asarray(xs, dtype=float)
    m = len(xs)
    if order >= m:
        raise ValueError("need more nodes than the derivative order")
    c = np.zeros((m, order + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, m):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def sample_derivative(times: np.ndarray, values: np.ndarray, width: int = 5) -> np.ndarray:
    """First derivative of sampled data with a ``width``-point stencil.

    Centred where possible, one-sided near the ends.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    m = len(times)
    if m < 2:
        raise ValueError("need at least two samples")
    width = min(width, m)
    half = width // 2
    out = np.empty_like(values)
    for k in range(m):
        lo = min(max(0, k - half), m - width)
        idx = slice(lo, lo + width)
        w = fornberg_weights(times[k], times[idx], 1)
        out[k] = np.tensordot(w, values[idx], axes=(0, 0))
    return out


# --------------------------------------------------------------------------- extremal checks

def herglotz_profile(system: LagrangianSystem, traj: Trajectory, width: int = 7) -> np.ndarray:
    """Per-sample relative residual of the Herglotz equations and the state equations.

    Accelerations and the kinematic derivatives come from finite differences of
    the samples, so a curve that is not an integral curve shows up here even if
    its stored rates were produced by the field. The default 7-point stencil is
    sixth order, matching the fifth-order accuracy of the adaptive integrator.
    """
    n = system.n
    deriv = sample_derivative(traj.times, traj.states, width)
    out = np.empty(len(traj))
    for k in range(len(traj)):
        x = traj.states[k]
        acc = deriv[k, n:2 * n]
        r = system.herglotz_residual(x, acc)
        scale = system.herglotz_scale(x, acc)
        g, _, _, Lval = system.blocks(x)
        kin_q = np.abs(deriv[k, :n] - x[n:2 * n]) / (1.0 + np.abs(x[n:2 * n]))
        kin_z = np.abs(deriv[k, 2 * n:] - Lval) / (1.0 + abs(Lval))
        out[k] = max(float(np.max(np.abs(r))) / scale, float(np.max(kin_q)),
                     float(np.max(kin_z)))
    return out


# --------------------------------------------------------------------------- Pontryagin

@dataclass
class PontryaginRun:
    forward: Trajectory
    mu: np.ndarray
    p: np.ndarray
    M: np.ndarray
    transversality: dict
    metadata: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.forward.times


def _hermite(ta, tb, xa, xb, fa, fb):
    h = tb - ta

    def interp(t):
        s = (t - ta) / h
        s2, s3 = s * s, s * s * s
        return ((2 * s3 - 3 * s2 + 1) * xa + (s3 - 2 * s2 + s) * h * fa
                + (-2 * s3 + 3 * s2) * xb + (s3 - s2) * h * fb)

    return interp


def integrate_pontryagin(system: LagrangianSystem, extremal: Trajectory,
                         check_extremal: bool = True, extremal_tol: float = 1e-5,
                         abs_tol: float = 1e-12, rel_tol: float = 1e-12) -> PontryaginRun:
    """Backward adjoints along an extremal.

    mu_i' = -M dL/dz_i, p_k' = -M dL/dq^k with M = sum mu_i, mu_i(t1) = 1 and
    p_k(t1) = -M(t1) dL/dv^k(t1). The forward state between samples is the
    cubic Hermite interpolant of the samples.
    """
    if (extremal.n, extremal.qcount) != (system.n, system.qcount):
        raise ValueError("trajectory dimensions do not match the Lagrangian")
    if len(extremal) < 2:
        raise ValueError("need at least two samples")
    if check_extremal:
        prof = herglotz_profile(system, extremal)
        worst = float(np.max(prof))
        if worst > extremal_tol:
            raise NotAnExtremal(worst, extremal_tol)
    n, qc = system.n, system.qcount
    times, states = extremal.times, extremal.states
    rates = extremal.rates if extremal.rates is not None else sample_derivative(times, states)

    mu1 = np.ones(qc)
    M1 = float(mu1.sum())
    g1, _, _, _ = system.blocks(states[-1])
    p1 = -M1 * g1[n:2 * n]
    y = np.concatenate([mu1, p1])
    mus, ps = [mu1.copy()], [p1.copy()]

    min_step = 1e-14 * max(1.0, times[-1] - times[0])
    steps = 0
    for j in range(len(times) - 1, 0, -1):
        ta, tb = times[j - 1], times[j]
        x_of_t = _hermite(ta, tb, states[j - 1], states[j], rates[j - 1], rates[j])

        # reversed time s = tb - t, carried as the last state entry
        def adjoint(aug, x_of_t=x_of_t, tb=tb):
            g = system.blocks(x_of_t(tb - aug[-1]))[0]
            M = float(np.sum(aug[:qc]))
            return np.concatenate([M * g[2 * n:], M * g[:n], [1.0]])

        seg_cfg = IntegratorConfig("rk45", 0.0, tb - ta, abs_tol=abs_tol, rel_tol=rel_tol,
                                   min_step=min_step)
        aug, used = _integrate_plain(adjoint, np.concatenate([y, [0.0]]), seg_cfg)
        y = aug[:-1]
        steps += used
        mus.append(y[:qc].copy())
        ps.append(y[qc:].copy())
    mu = np.array(mus[::-1])
    p = np.array(ps[::-1])
    M = mu.sum(axis=1)
    record = {"mu_t1": mu[-1].tolist(), "p_t1": p[-1].tolist(), "M_t1": float(M[-1]),
              "mu_t1_exact": bool(np.all(mu[-1] == 1.0))}
    meta = {"adjoint_steps": steps, "M_positive": bool(np.all(M > 0)),
            "model": extremal.metadata.get("model", system.name)}
    return PontryaginRun(extremal, mu, p, M, record, meta)


@dataclass
class StationarityReport:
    stationarity: float
    m_law: float
    tolerance: float
    transversality: float

    @property
    def passed(self) -> bool:
        return (self.stationarity <= self.tolerance and self.m_law <= self.tolerance
                and self.transversality == 0.0)

    def as_dict(self) -> dict:
        return {"stationarity": self.stationarity, "m_law": self.m_law,
                "transversality": self.transversality, "tolerance": self.tolerance,
                "pass": self.passed}


def stationarity_profile(run: PontryaginRun, system: LagrangianSystem):
    """Per-sample relative residuals of p + M dL/dv and of M' + M sum dL/dz."""
    n = system.n
    traj = run.forward
    # same 6th-order stencil as the Herglotz profile
    Mdot = sample_derivative(traj.times, run.M, width=7)
    stat = np.empty(len(traj))
    mlaw = np.empty(len(traj))
    for k in range(len(traj)):
        g = system.blocks(traj.states[k])[0]
        ML = run.M[k] * g[n:2 * n]
        stat[k] = float(np.linalg.norm(run.p[k] + ML)) / (1.0 + float(np.linalg.norm(ML)))
        zsum = float(np.sum(g[2 * n:]))
        mlaw[k] = abs(Mdot[k] + run.M[k] * zsum) / (abs(run.M[k]) * (1.0 + abs(zsum)))
    return stat, mlaw


def verify_stationarity(run: PontryaginRun, system: LagrangianSystem,
                        tol: float = 1e-6) -> StationarityReport:
    stat, mlaw = stationarity_profile(run, system)
    trans = float(np.max(np.abs(run.mu[-1] - 1.0)))
    return StationarityReport(float(np.max(stat)), float(np.max(mlaw)), tol, trans)


# --------------------------------------------------------------------------- energy decay

@dataclass
class DecayMetrics:
    rate: float
    ratio: float
    decay_time: float
    residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    def as_dict(self) -> dict:
        return {"rate": self.rate, "ratio": self.ratio, "decay_time": self.decay_time,
                "max_residual": self.max_residual}


def energy_series(system: LagrangianSystem, traj: Trajectory) -> np.ndarray:
    return np.array([system.energy(x) for x in traj.states])


def decay_metrics(traj: Trajectory, system: LagrangianSystem) -> DecayMetrics:
    """Least-squares log-rate of E_L and the pointwise dissipation-law residual.

    The residual at each sample is (dE/dt + E sum_i R_i(E)) / scale, with dE/dt
    from the chain rule along the field.
    """
    E = energy_series(system, traj)
    for t, e in zip(traj.times, E):
        if not e > 0:
            raise NonPositiveEnergy(float(t), float(e))
    rate = float(np.polyfit(traj.times, np.log(E), 1)[0])
    ratio = float(E[-1] / E[0])
    decay_time = math.inf if rate == 0 else -1.0 / rate
    energy_fn = system.energy_function()
    res = np.empty(len(traj))
    for k, x in enumerate(traj.states):
        X = system.lagrangian_vector_field(x)
        grad = to_floats(grad_generic(energy_fn, list(x)))
        dE = float(grad @ X)
        rsum = float(np.sum(system.dissipation_rates(x)))
        scale = 1.0 + float(np.sum(np.abs(grad * X))) + abs(E[k] * rsum)
        res[k] = (dE + E[k] * rsum) / scale
    return DecayMetrics(rate, ratio, decay_time, res)


def dissipation_drift(field_fn: Field, H: Callable, reeb_total: Callable, initial,
                      config: IntegratorConfig, n: int, qcount: int) -> float:
    """Integrated form of the dissipation law.

    Augments the state with s' = sum_i R_i(H) so that H(x(t)) exp(s(t)) is
    constant; returns the maximum relative deviation from H(x(t0)).
    """
    x0 = np.asarray(initial.coords if isinstance(initial, ExtendedPoint) else initial,
                    dtype=float)
    dim = len(x0)

    def aug(y):
        x = y[:dim]
        return np.concatenate([np.asarray(field_fn(x), dtype=float), [reeb_total(x)]])

    # n=0 lets the augmented state pass the Trajectory shape check
    traj = integrate(aug, np.concatenate([x0, [0.0]]), config, n=0, qcount=dim + 1)
    H0 = float(H(x0))
    vals = np.array([float(H(y[:dim])) * math.exp(y[-1]) for y in traj.states])
    return float(np.max(np.abs(vals - H0))) / (1.0 + abs(H0))


# --------------------------------------------------------------------------- CSV

def _fmt(x: float) -> str:
    return f"{x:.16e}"


@contextmanager
def _sink(target):
    """Open a path for writing, or pass an already open text stream through."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="") as fh:
            yield fh


def write_trajectory_csv(traj: Trajectory, path, energy: Sequence[float] | None = None) -> None:
    header = ["t"] + traj.header() + (["E_L"] if energy is not None else [])
    with _sink(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(traj)):
            row = [traj.times[k], *traj.states[k]]
            if energy is not None:
                row.append(energy[k])
            w.writerow([_fmt(float(x)) for x in row])


def write_pontryagin_csv(run: PontryaginRun, path) -> None:
    traj = run.forward
    header = (["t"] + traj.header() + [f"mu{i + 1}" for i in range(traj.qcount)]
              + [f"p{k + 1}" for k in range(traj.n)] + ["M"])
    with _sink(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(traj)):
            row = [traj.times[k], *traj.states[k], *run.mu[k], *run.p[k], run.M[k]]
            w.writerow([_fmt(float(x)) for x in row])


def read_trajectory_csv(path) -> tuple[Trajectory, np.ndarray | None]:
    """Read a trajectory CSV; returns the trajectory and the E_L column if present."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n = sum(1 for h in header if h.startswith("q"))
    qcount = sum(1 for h in header if h.startswith("z"))
    dim = 2 * n + qcount
    energy = body[:, 1 + dim] if "E_L" in header else None
    return Trajectory(body[:, 0], body[:, 1:1 + dim], n, qcount), energy
