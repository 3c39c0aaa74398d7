"""Time steppers, conservation auditing, and the elliptic relaxation engine.

Fixed-step RK4 is the default (uniform error behavior keeps drift
attribution simple); an embedded RKF45 pair is available for stiff
near-singularity passes.  No symplecticity is claimed anywhere: the
Hamiltonians here are non-separable, so conservation is verified by
audit rather than enforced by construction.

Every integration is sequential and deterministic: fixed evaluation
order, no parallel reductions, bit-identical reruns for identical
inputs.  Both clocks are always co-integrated: a lab-time run
accumulates tau through dtau = dt (1-u^2)^(1/2) and a proper-time run
accumulates t through dt = dtau (1+rdot^2)^(1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Dict, List, Optional

import numpy as np

from .errors import (
    ConvergenceError,
    EnergyDomainError,
    PhysicsDomainError,
    StepFailureError,
    ValidationError,
)
from .geometry import Vec3, proper_time_factor
from .particle import (
    ForceModel,
    ModelKind,
    ParticleState,
    classical_velocity,
    constrained_rest_mass,
    interacting_energy,
    interacting_hamiltonian,
    qa_vector,
    relative_invariant,
    total_energy,
    vacuum_free_hamiltonian,
    vacuum_velocity,
)


@dataclass
class IntegrationParams:
    """Step control and audit cadence shared by particle and string runs."""

    step: float
    n_steps: int
    method: str = "rk4"
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    audit_every: int = 10
    time_axis: str = "auto"  # auto | lab | proper

    def __post_init__(self):
        if self.step <= 0 or self.n_steps <= 0:
            raise ValidationError("step and n_steps must be positive")
        if self.method not in ("rk4", "rk45"):
            raise ValidationError(f"unknown method '{self.method}' (rk4 | rk45)")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValidationError("tolerances must be positive")
        if self.audit_every < 1:
            raise ValidationError("audit_every must be >= 1")
        if self.time_axis not in ("auto", "lab", "proper"):
            raise ValidationError("time_axis must be auto, lab or proper")

    @property
    def horizon(self) -> float:
        return self.step * self.n_steps


@dataclass
class ConservationStat:
    initial: float
    max_drift: float = 0.0
    samples: int = 0

    def update(self, value: float) -> None:
        self.max_drift = max(self.max_drift, abs(value - self.initial))
        self.samples += 1

    @property
    def relative_drift(self) -> float:
        scale = abs(self.initial)
        return self.max_drift / scale if scale > 0 else self.max_drift

    def to_dict(self) -> dict:
        return {
            "initial": self.initial,
            "max_drift": self.max_drift,
            "relative_drift": self.relative_drift,
            "samples": self.samples,
        }


class ConservationReport(dict):
    """Per-invariant drift statistics: name -> ConservationStat."""

    def observe(self, name: str, value: float) -> None:
        if name not in self:
            self[name] = ConservationStat(initial=value, samples=0)
        self[name].update(value)

    def to_dict(self) -> dict:
        return {name: stat.to_dict() for name, stat in self.items()}


@dataclass
class Trajectory:
    """Ordered particle samples plus the conservation audit."""

    samples: List[ParticleState]
    report: ConservationReport
    model_kind: str
    time_axis: str

    @property
    def final(self) -> ParticleState:
        return self.samples[-1]


# --- generic steppers on flat tuple states ----------------------------------


def rk4_step(f, x, y, h):
    k1 = f(x, y)
    y2 = tuple(a + 0.5 * h * b for a, b in zip(y, k1))
    k2 = f(x + 0.5 * h, y2)
    y3 = tuple(a + 0.5 * h * b for a, b in zip(y, k2))
    k3 = f(x + 0.5 * h, y3)
    y4 = tuple(a + h * b for a, b in zip(y, k3))
    k4 = f(x + h, y4)
    return tuple(
        a + (h / 6.0) * (b1 + 2.0 * (b2 + b3) + b4)
        for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
    )


_RKF_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0)
_RKF_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0)


def _rkf45_stages(f, x, y, h):
    k1 = f(x, y)
    k2 = f(x + h / 4.0, tuple(a + h * (b / 4.0) for a, b in zip(y, k1)))
    k3 = f(
        x + 3.0 * h / 8.0,
        tuple(a + h * (3.0 * b1 / 32.0 + 9.0 * b2 / 32.0) for a, b1, b2 in zip(y, k1, k2)),
    )
    k4 = f(
        x + 12.0 * h / 13.0,
        tuple(
            a + h * (1932.0 * b1 - 7200.0 * b2 + 7296.0 * b3) / 2197.0
            for a, b1, b2, b3 in zip(y, k1, k2, k3)
        ),
    )
    k5 = f(
        x + h,
        tuple(
            a + h * (439.0 * b1 / 216.0 - 8.0 * b2 + 3680.0 * b3 / 513.0 - 845.0 * b4 / 4104.0)
            for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
        ),
    )
    k6 = f(
        x + h / 2.0,
        tuple(
            a
            + h
            * (
                -8.0 * b1 / 27.0
                + 2.0 * b2
                - 3544.0 * b3 / 2565.0
                + 1859.0 * b4 / 4104.0
                - 11.0 * b5 / 40.0
            )
            for a, b1, b2, b3, b4, b5 in zip(y, k1, k2, k3, k4, k5)
        ),
    )
    return (k1, k2, k3, k4, k5, k6)


def rkf45_step(f, x, y, h, rel_tol, abs_tol):
    """One embedded 4(5) attempt: returns (accepted, y5, error_ratio)."""
    ks = _rkf45_stages(f, x, y, h)
    y5 = tuple(
        a + h * sum(b * k[i] for b, k in zip(_RKF_B5, ks))
        for i, a in enumerate(y)
    )
    y4 = tuple(
        a + h * sum(b * k[i] for b, k in zip(_RKF_B4, ks))
        for i, a in enumerate(y)
    )
    ratio = 0.0
    for a, b, y0 in zip(y5, y4, y):
        tol = abs_tol + rel_tol * abs(y0)
        ratio = max(ratio, abs(a - b) / tol)
    return ratio <= 1.0, y5, ratio


# --- particle integration -----------------------------------------------------


def _axis_for(model: ForceModel, params: IntegrationParams) -> str:
    if params.time_axis != "auto":
        axis = params.time_axis
        if axis == "proper" and model.kind in (ModelKind.CLASSICAL, ModelKind.CONSTRAINED):
            raise ValidationError(f"{model.kind.value} model integrates in lab time")
        return axis
    if model.kind in (ModelKind.VACUUM_FREE, ModelKind.VACUUM_INTERACTING):
        return "proper"
    return "lab"


def _pack(model: ForceModel, state: ParticleState, axis: str):
    r, p = state.r, state.p
    if model.kind is ModelKind.CONSTRAINED:
        return (*r, *p, state.extra["lambda_tdot"], state.tau)
    if axis == "lab":
        return (*r, *p, state.tau)
    if model.kind is ModelKind.VACUUM_FREE:
        return (*r, *p, state.t)
    # interacting, proper axis: advance P = p + qA, co-integrate t and particle tau
    qa = qa_vector(model, r, state.t)
    return (*r, *(p + qa), state.t, state.tau)


def _unpack(model: ForceModel, y, x, axis: str) -> ParticleState:
    r = Vec3(y[0], y[1], y[2])
    if model.kind is ModelKind.CONSTRAINED:
        p = Vec3(y[3], y[4], y[5])
        y2 = y[6]
        u = p / y2
        return ParticleState(y[7], x, r, u, p, {"lambda_tdot": y2, "m0": model.rest_mass})
    if axis == "lab":
        p = Vec3(y[3], y[4], y[5])
        tau, t = y[6], x
    elif model.kind is ModelKind.VACUUM_FREE:
        p = Vec3(y[3], y[4], y[5])
        tau, t = x, y[6]
    else:
        t, tau = y[6], y[7]
        big_p = Vec3(y[3], y[4], y[5])
        p = big_p - qa_vector(model, r, t)
        u = vacuum_velocity(model.field.wbar(r, t), p)
        return ParticleState(tau, t, r, u, p, {"tau_rel": x})
    if model.kind is ModelKind.CLASSICAL:
        u = classical_velocity(model.rest_mass, p)
        extra = {"m0": model.rest_mass}
    else:
        u = vacuum_velocity(model.field.wbar(r, t), p)
        extra = {}
    return ParticleState(tau, t, r, u, p, extra)


def _flat_rhs(model: ForceModel, axis: str) -> Callable:
    field = model.field
    q = model.charge
    kind = model.kind

    if kind is ModelKind.CLASSICAL:
        m0 = model.rest_mass

        def rhs(t, y):
            from .particle import _q_em_terms

            r = Vec3(y[0], y[1], y[2])
            p = Vec3(y[3], y[4], y[5])
            u = classical_velocity(m0, p)
            qe, mag, _ = _q_em_terms(field, q, u, r, t)
            dp = qe + mag
            return (u.x, u.y, u.z, dp.x, dp.y, dp.z, proper_time_factor(u))

        return rhs

    if kind is ModelKind.CONSTRAINED:

        def rhs(t, y):
            from .particle import _q_em_terms

            r = Vec3(y[0], y[1], y[2])
            y1 = Vec3(y[3], y[4], y[5])
            y2 = y[6]
            u = y1 / y2
            qe, mag, _ = _q_em_terms(field, q, u, r, t)
            d1 = qe + mag
            return (u.x, u.y, u.z, d1.x, d1.y, d1.z, qe.dot(u), proper_time_factor(u))

        return rhs

    if kind is ModelKind.VACUUM_FREE:
        if axis == "lab":

            def rhs(t, y):
                r = Vec3(y[0], y[1], y[2])
                p = Vec3(y[3], y[4], y[5])
                u = vacuum_velocity(field.wbar(r, t), p)
                g = field.grad_wbar(r, t)
                return (u.x, u.y, u.z, -g.x, -g.y, -g.z, proper_time_factor(u))

            return rhs

        def rhs(tau, y):
            r = Vec3(y[0], y[1], y[2])
            p = Vec3(y[3], y[4], y[5])
            t = y[6]
            wbar = field.wbar(r, t)
            energy = total_energy(wbar, p)
            g = field.grad_wbar(r, t)
            c = wbar / energy
            return (
                p.x / energy,
                p.y / energy,
                p.z / energy,
                c * g.x,
                c * g.y,
                c * g.z,
                -wbar / energy,
            )

        return rhs

    # vacuum-interacting
    u_f = model.source_velocity
    if axis == "lab":

        def rhs(t, y):
            from .particle import _q_em_terms

            r = Vec3(y[0], y[1], y[2])
            p = Vec3(y[3], y[4], y[5])
            u = vacuum_velocity(field.wbar(r, t), p)
            qe, mag, fc = _q_em_terms(field, q, u, r, t)
            dp = qe + mag + fc
            return (u.x, u.y, u.z, dp.x, dp.y, dp.z, proper_time_factor(u))

        return rhs

    def rhs(tau_rel, y):
        # canonical relative flow: exact reparameterization of the lab force law
        r = Vec3(y[0], y[1], y[2])
        big_p = Vec3(y[3], y[4], y[5])
        t = y[6]
        wbar = field.wbar(r, t)
        d = relative_invariant(wbar, big_p, Vec3(0.0, 0.0, 0.0))
        beta = -wbar / d
        dr = big_p / d + u_f * beta
        g = field.grad_wbar(r, t)
        c = wbar / d
        u = (big_p - wbar * u_f) / (-wbar)  # p/(-wbar) with p = P - qA
        dtau_particle = beta * proper_time_factor(u)
        return (dr.x, dr.y, dr.z, c * g.x, c * g.y, c * g.z, beta, dtau_particle)

    return rhs


_AUDITS: Dict[ModelKind, Dict[str, Callable]] = {
    ModelKind.CLASSICAL: {
        "energy": lambda s, m: math.sqrt(m.rest_mass**2 + s.p.norm2())
        + m.field.wbar(s.r, s.t),
    },
    ModelKind.CONSTRAINED: {
        "rest_mass": lambda s, m: constrained_rest_mass(s),
    },
    ModelKind.VACUUM_FREE: {
        "hamiltonian": lambda s, m: vacuum_free_hamiltonian(m.field.wbar(s.r, s.t), s.p),
        "energy": lambda s, m: total_energy(m.field.wbar(s.r, s.t), s.p),
        "rest_mass": lambda s, m: -m.field.wbar(s.r, s.t) * proper_time_factor(s.u),
    },
    ModelKind.VACUUM_INTERACTING: {
        "hamiltonian": lambda s, m: interacting_hamiltonian(
            m.field.wbar(s.r, s.t), s.p, qa_vector(m, s.r, s.t)
        ),
        "energy": lambda s, m: interacting_energy(
            m.field.wbar(s.r, s.t), s.p, qa_vector(m, s.r, s.t)
        ),
        "relative_invariant": lambda s, m: relative_invariant(
            m.field.wbar(s.r, s.t), s.p, qa_vector(m, s.r, s.t)
        ),
    },
}


def integrate_particle(
    model: ForceModel, initial: ParticleState, params: IntegrationParams
) -> Trajectory:
    """Advance one particle, auditing its model's conserved quantities.

    Deterministic: identical inputs give bit-identical trajectories.
    Physics-domain errors are re-raised annotated with the parameter value
    at which the step failed.
    """
    axis = _axis_for(model, params)
    rhs = _flat_rhs(model, axis)
    audits = _AUDITS[model.kind]
    x = initial.t if axis == "lab" else initial.tau
    y = _pack(model, initial, axis)

    report = ConservationReport()
    samples = [initial]
    for name, fn in audits.items():
        report.observe(name, fn(initial, model))

    def guarded(step_fn, *args):
        try:
            return step_fn(*args)
        except PhysicsDomainError as exc:
            label = "t" if axis == "lab" else "tau"
            raise type(exc)(f"{exc} [{label}={x:.9g}]") from None

    if params.method == "rk4":
        h = params.step
        for i in range(1, params.n_steps + 1):
            y = guarded(rk4_step, rhs, x, y, h)
            x += h
            state = guarded(_unpack, model, y, x, axis)
            samples.append(state)
            if i % params.audit_every == 0 or i == params.n_steps:
                for name, fn in audits.items():
                    report.observe(name, fn(state, model))
    else:
        horizon = params.horizon
        x_end = x + horizon
        h = params.step
        h_min = horizon * 1e-12
        i = 0
        while x < x_end - 1e-15 * horizon:
            h = min(h, x_end - x)
            accepted, y_new, ratio = guarded(
                rkf45_step, rhs, x, y, h, params.rel_tol, params.abs_tol
            )
            if accepted:
                y = y_new
                x += h
                i += 1
                state = guarded(_unpack, model, y, x, axis)
                samples.append(state)
                if i % params.audit_every == 0:
                    for name, fn in audits.items():
                        report.observe(name, fn(state, model))
            if ratio > 0:
                h = min(max(0.9 * h * ratio ** -0.2, 0.2 * h), 5.0 * h)
            if h < h_min:
                raise StepFailureError(
                    f"adaptive step collapsed below {h_min:.3g}", t=x
                )
        for name, fn in audits.items():
            report.observe(name, fn(samples[-1], model))

    return Trajectory(samples, report, model.kind.value, axis)


# --- string integration ---------------------------------------------------------


@dataclass
class StringTrajectory:
    samples: list
    report: ConservationReport

    @property
    def final(self):
        return self.samples[-1]


def integrate_string(state, field, params: IntegrationParams, boundary: str = "fixed-ends") -> StringTrajectory:
    """Advance a string state under the canonical flow with fixed endpoints.

    Audits the energy functional and the transversality defect.  Aborts
    with EnergyDomainError (offending node attached) when the integrand
    domain guard trips.
    """
    from . import strings

    if boundary != "fixed-ends":
        raise ValidationError("only fixed-ends boundary handling is implemented")
    if params.method != "rk4":
        raise ValidationError("string integration uses fixed-step rk4")

    n = state.grid.n
    y = np.concatenate([state.r.ravel(), state.p.ravel(), state.t])
    tau = state.tau
    h = params.step

    def rebuild(tau_val, yv):
        r = yv[: 3 * n].reshape(n, 3)
        p = yv[3 * n : 6 * n].reshape(n, 3)
        t = yv[6 * n :]
        return strings.StringState(state.grid, r.copy(), p.copy(), tau_val, t.copy())

    def rhs(tau_val, yv):
        st = strings.StringState(
            state.grid,
            yv[: 3 * n].reshape(n, 3),
            yv[3 * n : 6 * n].reshape(n, 3),
            tau_val,
            yv[6 * n :],
        )
        dr, dp = strings.string_canonical_rhs(st, field)
        dt = np.sqrt(1.0 + np.einsum("ij,ij->i", dr, dr))
        return np.concatenate([dr.ravel(), dp.ravel(), dt])

    report = ConservationReport()
    samples = [rebuild(tau, y)]
    report.observe("hamiltonian", strings.string_hamiltonian(samples[0], field))
    report.observe("transversality", strings.transversality_defect(samples[0]))

    for i in range(1, params.n_steps + 1):
        try:
            k1 = rhs(tau, y)
            k2 = rhs(tau + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(tau + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(tau + h, y + h * k3)
        except EnergyDomainError as exc:
            raise EnergyDomainError(f"{exc} [tau={tau:.9g}]", where=exc.where) from None
        y = y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        tau += h
        st = rebuild(tau, y)
        samples.append(st)
        if i % params.audit_every == 0 or i == params.n_steps:
            report.observe("hamiltonian", strings.string_hamiltonian(st, field))
            report.observe("transversality", strings.transversality_defect(st))

    return StringTrajectory(samples, report)


# --- elliptic relaxation ----------------------------------------------------------


@dataclass
class RelaxationResult:
    xi: np.ndarray
    iterations: int
    final_residual: float
    history: List[float] = dc_field(default_factory=list)


def relax_elliptic(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    xi0: np.ndarray,
    tol: float,
    max_iters: int = 20000,
    omega: Optional[float] = None,
    history_tail: int = 25,
) -> RelaxationResult:
    """Checkerboard SOR sweeps driving max |residual| below tol.

    residual_fn maps the full grid (n1, n2, c) to the interior residual
    (n1-2, n2-2, c).  The local diagonal d(R_ij)/d(xi_ij) is probed
    numerically per checkerboard color (5-point couplings never connect
    same-color interior nodes, so one vectorized probe per color and
    component is exact).  Boundary values are never touched.
    """
    if tol <= 0:
        raise ValidationError("tolerance must be positive")
    xi = np.array(xi0, dtype=float, copy=True)
    n1, n2, ncomp = xi.shape
    if n1 < 3 or n2 < 3:
        raise ValidationError("grid too small for interior relaxation")
    if not np.all(np.isfinite(xi)):
        raise ValidationError("initial patch contains non-finite values")
    if omega is None:
        omega = 2.0 / (1.0 + math.sin(math.pi / max(n1 - 1, n2 - 1)))

    ii, jj = np.meshgrid(np.arange(1, n1 - 1), np.arange(1, n2 - 1), indexing="ij")
    masks = [((ii + jj) % 2 == parity) for parity in (0, 1)]

    probe = 1e-7 * max(1.0, float(np.max(np.abs(xi))))
    diagonals = None

    def compute_diagonals(current):
        base = residual_fn(current)
        diags = np.zeros_like(base)
        for parity, mask in enumerate(masks):
            for k in range(ncomp):
                trial = current.copy()
                interior = trial[1:-1, 1:-1, k]
                interior[mask] += probe
                shifted = residual_fn(trial)
                d = (shifted[..., k] - base[..., k]) / probe
                diags[..., k][mask] = d[mask]
        if np.min(np.abs(diags)) < 1e-300:
            raise ConvergenceError("degenerate relaxation diagonal")
        return diags

    history: List[float] = []
    initial_res = None
    for iteration in range(1, max_iters + 1):
        if diagonals is None or iteration % 200 == 0:
            diagonals = compute_diagonals(xi)
        for mask in masks:
            res = residual_fn(xi)
            for k in range(ncomp):
                upd = omega * res[..., k] / diagonals[..., k]
                xi[1:-1, 1:-1, k][mask] -= upd[mask]
        res = residual_fn(xi)
        max_res = float(np.max(np.abs(res)))
        history.append(max_res)
        if len(history) > history_tail:
            history.pop(0)
        if initial_res is None:
            initial_res = max_res if max_res > 0 else 1.0
        if not math.isfinite(max_res) or max_res > 1e8 * initial_res:
            raise ConvergenceError(
                f"relaxation diverged at iteration {iteration}", residual_history=history
            )
        if max_res < tol:
            return RelaxationResult(xi, iteration, max_res, history)
    raise ConvergenceError(
        f"no convergence after {max_iters} sweeps (residual {history[-1]:.3g})",
        residual_history=history,
    )
