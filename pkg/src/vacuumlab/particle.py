"""Point-particle dynamics models.

Four force models share one state type:

* classical     dp/dt = qE + q u x B,             p = m0 u (1-u^2)^(-1/2)
* constrained   d(l u tdot)/dt = qE + q u x B,    d(l tdot)/dt = q<E,u>
                (multiplier form; l tdot (1-u^2)^(1/2) is the rest mass)
* vacuum-free   dp/dt = -grad(wbar),              p = -wbar u
* interacting   dp/dt = qE + q u x B - q grad<u,A>,  p = -wbar u

plus the Lorentz-type variant without the extra gradient force
(`vacuum_lorentz_rhs`), kept for model comparison.  All right-hand sides
are pure functions; the electromagnetic terms are assembled as q*E,
u x (q*B) and -grad<u, q*A> so that fields whose vector potential scales
like 1/q stay well defined for any nonzero charge.

The interacting Hamiltonian and energy implement the full expressions
with the <p+qA, qA> cross term.  Note (verified analytically and
numerically): along the interacting flow with a uniform-velocity source
the quantity (wbar^2 - |p+qA|^2)^(1/2) is an exact invariant, while the
cross term is constant only when the relative drift stays transverse to
the source velocity (e.g. co-drifting orbits).  Both quantities are
audited by the integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Optional, Sequence

from .errors import (
    DegenerateMultiplierError,
    EnergyDomainError,
    NonpositiveMassError,
    SuperluminalVelocityError,
)
from .geometry import EuclideanEvent, Vec3, ZERO3, proper_time_factor
from .potentials import (
    PotentialField,
    SourceKind,
    SourceSpec,
    build_potential,
)


class ModelKind(Enum):
    CLASSICAL = "classical"
    CONSTRAINED = "constrained"
    VACUUM_FREE = "vacuum-free"
    VACUUM_INTERACTING = "vacuum-interacting"


@dataclass
class ParticleState:
    """Snapshot (tau, t, r, u, p) plus model-specific extras.

    extra carries 'lambda_tdot' for the constrained model and 'm0' where a
    rest mass is attached to the state.
    """

    tau: float
    t: float
    r: Vec3
    u: Vec3
    p: Vec3
    extra: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.u.norm2() >= 1.0:
            raise SuperluminalVelocityError(
                f"|u| = {self.u.norm():.6g} >= 1 at tau={self.tau:.6g}"
            )
        if not (self.r.is_finite() and self.u.is_finite() and self.p.is_finite()):
            raise ValueError("non-finite particle state")


@dataclass
class ForceModel:
    """Model kind, its field, charge and (where needed) rest mass and source motion."""

    kind: ModelKind
    field: PotentialField
    charge: float = 1.0
    rest_mass: Optional[float] = None
    u_f: Optional[Vec3] = None

    def __post_init__(self):
        if self.kind in (ModelKind.CLASSICAL, ModelKind.CONSTRAINED):
            if self.rest_mass is None or self.rest_mass <= 0:
                raise NonpositiveMassError(f"{self.kind.value} model needs m0 > 0")

    @property
    def source_velocity(self) -> Vec3:
        if self.u_f is not None:
            return self.u_f
        return getattr(self.field, "u_f", ZERO3)


# --- momentum / mass / energy kernels -------------------------------------


def classical_momentum(m0: float, u: Vec3) -> Vec3:
    """p = m0 u (1 - u^2)^(-1/2)."""
    if m0 <= 0:
        raise NonpositiveMassError("rest mass must be positive")
    return u * (m0 / proper_time_factor(u))


def classical_velocity(m0: float, p: Vec3) -> Vec3:
    """Invert the classical momentum: u = p / (m0^2 + p^2)^(1/2)."""
    return p / math.sqrt(m0 * m0 + p.norm2())


def dynamic_mass(wbar: float) -> float:
    """m = -wbar; requires wbar < 0."""
    if wbar >= 0.0:
        raise NonpositiveMassError(f"wbar = {wbar:.6g} >= 0 gives nonpositive mass")
    return -wbar


def vacuum_momentum(wbar: float, u: Vec3) -> Vec3:
    """p = -wbar u."""
    m = dynamic_mass(wbar)
    if u.norm2() >= 1.0:
        raise SuperluminalVelocityError("|u| >= 1")
    return u * m


def vacuum_velocity(wbar: float, p: Vec3) -> Vec3:
    """u = p / (-wbar), the inverse of the vacuum momentum relation."""
    m = dynamic_mass(wbar)
    u = p / m
    if u.norm2() >= 1.0:
        raise SuperluminalVelocityError("|p| >= -wbar implies |u| >= 1")
    return u


def vacuum_free_hamiltonian(wbar: float, p: Vec3) -> float:
    """H = -(wbar^2 - p^2)^(1/2)."""
    d2 = wbar * wbar - p.norm2()
    if d2 <= 0.0:
        raise EnergyDomainError(f"|p| = {p.norm():.6g} exceeds |wbar| = {abs(wbar):.6g}")
    return -math.sqrt(d2)


def total_energy(wbar: float, p: Vec3) -> float:
    """E = (wbar^2 - p^2)^(1/2); equals -wbar at rest (the dynamic mass)."""
    return -vacuum_free_hamiltonian(wbar, p)


def interacting_hamiltonian(wbar: float, p: Vec3, qa: Vec3) -> float:
    """H = -(wbar^2-|p+qA|^2)^(1/2) - <p+qA,qA> (wbar^2-|p+qA|^2)^(-1/2)."""
    big_p = p + qa
    d2 = wbar * wbar - big_p.norm2()
    if d2 <= 0.0:
        raise EnergyDomainError(
            f"|p+qA| = {big_p.norm():.6g} exceeds |wbar| = {abs(wbar):.6g}"
        )
    d = math.sqrt(d2)
    return -d - big_p.dot(qa) / d


def interacting_energy(wbar: float, p: Vec3, qa: Vec3) -> float:
    """E = (wbar^2-|p+qA|^2)^(1/2) + <p+qA,qA> (wbar^2-|p+qA|^2)^(-1/2)."""
    return -interacting_hamiltonian(wbar, p, qa)


def relative_invariant(wbar: float, p: Vec3, qa: Vec3) -> float:
    """(wbar^2 - |p+qA|^2)^(1/2): exact invariant of the interacting flow."""
    big_p = p + qa
    d2 = wbar * wbar - big_p.norm2()
    if d2 <= 0.0:
        raise EnergyDomainError("relative momentum exceeds |wbar|")
    return math.sqrt(d2)


# --- electromagnetic force assembly ----------------------------------------


def _q_em_terms(field: PotentialField, q: float, u: Vec3, r: Vec3, t: float):
    """Return (qE, u x qB, F_c) with all terms scaled by the charge."""
    g = field.grad_wbar(r, t)
    qe = -g - q * field.dvecpot_dt(r, t)
    jac = field.grad_vecpot(r, t)
    q_curl = Vec3(
        q * (jac[2, 1] - jac[1, 2]),
        q * (jac[0, 2] - jac[2, 0]),
        q * (jac[1, 0] - jac[0, 1]),
    )
    mag = u.cross(q_curl)
    a = jac.T @ u.as_array()
    fc = Vec3(-q * a[0], -q * a[1], -q * a[2])
    return qe, mag, fc


def interaction_extra_force(q: float, u: Vec3, f: PotentialField, r: Vec3, t: float) -> Vec3:
    """F_c = -q grad<u, A> with u held fixed under the gradient."""
    a = f.grad_vecpot(r, t).T @ u.as_array()
    return Vec3(-q * a[0], -q * a[1], -q * a[2])


def qa_vector(model: ForceModel, r: Vec3, t: float) -> Vec3:
    """q A at (r, t); for comoving Coulomb sources this equals wbar * u_f."""
    return model.charge * model.field.vecpot(r, t)


# --- right-hand sides -------------------------------------------------------


def classical_rhs(state: ParticleState, model: ForceModel):
    """(dp/dt, dr/dt) for the classical Lorentz force; u recovered from p."""
    u = classical_velocity(model.rest_mass, state.p)
    qe, mag, _ = _q_em_terms(model.field, model.charge, u, state.r, state.t)
    return qe + mag, u


def constrained_rhs(state: ParticleState, model: ForceModel):
    """(d(l u tdot)/dt, d(l tdot)/dt, dr/dt) for the multiplier model.

    The state carries y1 = l u tdot in p and y2 = l tdot in
    extra['lambda_tdot']; u = y1/y2.
    """
    y2 = state.extra.get("lambda_tdot", 0.0)
    if y2 <= 0.0:
        raise DegenerateMultiplierError(f"lambda*tdot = {y2:.6g} <= 0")
    u = state.p / y2
    qe, mag, _ = _q_em_terms(model.field, model.charge, u, state.r, state.t)
    return qe + mag, qe.dot(u), u


def constrained_rest_mass(state: ParticleState) -> float:
    """l tdot (1 - u^2)^(1/2): constant along constrained trajectories."""
    y2 = state.extra["lambda_tdot"]
    return y2 * proper_time_factor(state.u)


def vacuum_free_rhs(state: ParticleState, model: ForceModel):
    """(dp/dt, dr/dt): dp/dt = -grad(wbar), u = p/(-wbar)."""
    wbar = model.field.wbar(state.r, state.t)
    u = vacuum_velocity(wbar, state.p)
    return -model.field.grad_wbar(state.r, state.t), u


def vacuum_lorentz_rhs(state: ParticleState, model: ForceModel):
    """(dp/dt, dr/dt) for the Lorentz-type force without the extra gradient term."""
    wbar = model.field.wbar(state.r, state.t)
    u = vacuum_velocity(wbar, state.p)
    qe, mag, _ = _q_em_terms(model.field, model.charge, u, state.r, state.t)
    return qe + mag, u


def interacting_rhs(state: ParticleState, model: ForceModel):
    """(dp/dt, dr/dt) with the full force qE + q u x B - q grad<u,A>."""
    wbar = model.field.wbar(state.r, state.t)
    u = vacuum_velocity(wbar, state.p)
    qe, mag, fc = _q_em_terms(model.field, model.charge, u, state.r, state.t)
    return qe + mag + fc, u


# --- state constructors ------------------------------------------------------


def make_classical_state(r: Vec3, u: Vec3, m0: float, t: float = 0.0) -> ParticleState:
    return ParticleState(0.0, t, r, u, classical_momentum(m0, u), {"m0": m0})


def make_constrained_state(r: Vec3, u: Vec3, m0: float, t: float = 0.0) -> ParticleState:
    """Initial multiplier set so that l tdot (1-u^2)^(1/2) = m0 at t = 0."""
    gamma = 1.0 / proper_time_factor(u)
    y2 = m0 * gamma
    return ParticleState(0.0, t, r, u, u * y2, {"lambda_tdot": y2, "m0": m0})


def make_vacuum_state(field: PotentialField, r: Vec3, u: Vec3, t: float = 0.0) -> ParticleState:
    wbar = field.wbar(r, t)
    return ParticleState(0.0, t, r, u, vacuum_momentum(wbar, u), {})


# --- two-particle scenario and the q -> 0 limit ------------------------------


@dataclass
class TwoParticleScenario:
    """Test charge q orbiting a uniformly moving source charge q_f."""

    q: float
    q_f: float
    r_f0: Vec3
    u_f: Vec3
    r0: Vec3
    u0: Vec3
    softening: float = 1e-3
    background: float = -1.0
    horizon: float = 2.0
    n_steps: int = 2000

    def __post_init__(self):
        if self.u_f.norm2() >= 1.0:
            raise SuperluminalVelocityError("|u_f| must be < 1")

    def source_spec(self, q: Optional[float] = None) -> SourceSpec:
        kind = (
            SourceKind.COULOMB_COMOVING
            if self.u_f.norm2() > 0
            else SourceKind.COULOMB_STATIC
        )
        return SourceSpec(
            kind=kind,
            strength=self.q_f,
            r_f0=self.r_f0,
            u_f=self.u_f,
            softening=self.softening,
            background=self.background,
        )

    def model(self, q: Optional[float] = None) -> ForceModel:
        charge = self.q if q is None else q
        fld = build_potential(self.source_spec(), charge)
        return ForceModel(ModelKind.VACUUM_INTERACTING, fld, charge=charge, u_f=self.u_f)

    def initial_state(self, q: Optional[float] = None) -> ParticleState:
        charge = self.q if q is None else q
        fld = build_potential(self.source_spec(), charge)
        return make_vacuum_state(fld, self.r0, self.u0)

    def eta_f(self, state: ParticleState) -> EuclideanEvent:
        """Relative rest-frame event (r - r_f(t), tau)."""
        return EuclideanEvent(state.r - (self.r_f0 + self.u_f * state.t), state.tau)


@dataclass
class RestMassLimitReport:
    """Deviation of -wbar (1-u^2)^(1/2) from its initial value, per test charge."""

    charges: list
    deviations: list

    @property
    def ratios(self) -> list:
        return [
            self.deviations[i + 1] / self.deviations[i]
            for i in range(len(self.deviations) - 1)
            if self.deviations[i] > 0
        ]


def rest_mass_limit_check(
    scenario: TwoParticleScenario, q_sequence: Sequence[float]
) -> RestMassLimitReport:
    """Integrate the interacting dynamics for each q and track the mass defect.

    The monitored quantity is |(-wbar)(1-u^2)^(1/2) - m0| with m0 its initial
    value; launching from rest makes m0 = -wbar|_{u=0}.  The max deviation
    shrinks at first order in q.
    """
    from .errors import ValidationError
    from .integrate import IntegrationParams, integrate_particle

    if not q_sequence or any(q <= 0 for q in q_sequence):
        raise ValidationError("q sequence must be positive")
    if any(b >= a for a, b in zip(q_sequence, list(q_sequence)[1:])):
        raise ValidationError("q sequence must be strictly decreasing")

    deviations = []
    for q in q_sequence:
        model = scenario.model(q=q)
        state = scenario.initial_state(q=q)
        params = IntegrationParams(
            step=scenario.horizon / scenario.n_steps,
            n_steps=scenario.n_steps,
            audit_every=1,
        )
        traj = integrate_particle(model, state, params)
        m0 = -model.field.wbar(state.r, state.t) * proper_time_factor(state.u)
        dev = 0.0
        for s in traj.samples:
            wb = model.field.wbar(s.r, s.t)
            dev = max(dev, abs(-wb * proper_time_factor(s.u) - m0))
        deviations.append(dev)
    return RestMassLimitReport(list(q_sequence), deviations)
