"""Discrete least-action engine and Euler-Lagrange residual oracle.

Evaluates the model Lagrangians on discretized paths (trapezoidal
quadrature, central-difference velocities) and measures stationarity by
perturbing interior nodes symmetrically and differencing the action.
Nothing here shares code with the hand-coded right-hand sides: the
functional derivatives are finite differences of the action itself, so
the oracle cross-validates the integrators instead of echoing them.

Path channels: every kind uses the node positions r(s); the constrained
and interacting kinds additionally read a frozen lab-clock channel t(s)
(and the constrained kind a multiplier channel lambda(s)).  Frozen means
the channel is data along the path, not varied by the residual operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import (
    ActionDomainError,
    DegenerateLagrangianError,
    ValidationError,
)
from .geometry import Vec3, ZERO3
from .particle import (
    interacting_hamiltonian,
    vacuum_free_hamiltonian,
)
from .potentials import PotentialField
from .tolerances import FD_RELATIVE_STEP


class LagrangianKind(Enum):
    CLASSICAL_POINT = "classical-point"
    CONSTRAINED_POINT = "constrained-point"
    REST_FRAME_POINT = "rest-frame-point"
    VACUUM_FREE_POINT = "vacuum-free-point"
    VACUUM_INTERACTING_POINT = "vacuum-interacting-point"
    STRING_DENSITY = "string-density"


_NEEDS_T = {
    LagrangianKind.CONSTRAINED_POINT,
    LagrangianKind.VACUUM_INTERACTING_POINT,
}


@dataclass
class LagrangianSpec:
    kind: LagrangianKind
    field: PotentialField
    m0: Optional[float] = None
    charge: float = 1.0
    u_f: Vec3 = ZERO3

    def __post_init__(self):
        if self.kind in (LagrangianKind.CLASSICAL_POINT, LagrangianKind.CONSTRAINED_POINT):
            if self.m0 is None or self.m0 <= 0:
                raise ValidationError(f"{self.kind.value} needs m0 > 0")


@dataclass
class DiscretePath:
    """Uniform parameter grid with node positions and optional t / lambda channels."""

    s: np.ndarray
    r: np.ndarray
    t: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        m = self.s.size
        if m < 5:
            raise ValidationError("a discrete path needs at least 5 nodes")
        if self.r.shape != (m, 3):
            raise ValidationError("r must have shape (m, 3)")
        d = np.diff(self.s)
        if np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * max(1.0, abs(float(d[0]))):
            raise ValidationError("parameter grid must be uniform and increasing")
        for name in ("t", "lam"):
            ch = getattr(self, name)
            if ch is not None:
                ch = np.asarray(ch, dtype=float)
                if ch.shape != (m,):
                    raise ValidationError(f"{name} channel must have shape (m,)")
                setattr(self, name, ch)

    @property
    def m(self) -> int:
        return self.s.size

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])


def path_from_trajectory(trajectory, stride: int = 1) -> DiscretePath:
    """Build a path on the trajectory's own (uniform) integration grid.

    The path parameter is the run's integration variable; the lab clock is
    always carried as the t channel (for lab runs it coincides with the
    parameter) along with the multiplier channel when present.
    """
    samples = trajectory.samples[::stride]
    axis = trajectory.time_axis
    if axis == "lab":
        svals = np.array([smp.t for smp in samples])
        tvals = svals
    else:
        svals = np.array(
            [smp.extra.get("tau_rel", smp.tau) for smp in samples]
        )
        tvals = np.array([smp.t for smp in samples])
    r = np.array([list(smp.r) for smp in samples])
    lam = None
    if samples and "lambda_tdot" in samples[0].extra:
        lam = np.array(
            [
                smp.extra["lambda_tdot"] * math.sqrt(1.0 - smp.u.norm2())
                for smp in samples
            ]
        )
    return DiscretePath(s=svals, r=r, t=tvals, lam=lam)


def uniform_proper_path(trajectory, m: int) -> DiscretePath:
    """Resample a lab-axis trajectory onto a uniform proper-time grid.

    Four-point Lagrange (cubic) interpolation in tau, so the O(dtau^4)
    resampling error stays below the O(dtau^2) discretization signal the
    residual oracle measures.
    """
    samples = trajectory.samples
    tau_s = np.array([smp.tau for smp in samples])
    t_s = np.array([smp.t for smp in samples])
    r_s = np.array([list(smp.r) for smp in samples])
    lam_s = None
    if "lambda_tdot" in samples[0].extra:
        lam_s = np.array(
            [s.extra["lambda_tdot"] * math.sqrt(1.0 - s.u.norm2()) for s in samples]
        )
    grid = np.linspace(tau_s[1], tau_s[-2], m)

    def interp(values):
        out = np.empty((m,) + values.shape[1:])
        for i, target in enumerate(grid):
            idx = int(np.searchsorted(tau_s, target))
            i0 = min(max(idx - 2, 0), len(tau_s) - 4)
            xs = tau_s[i0 : i0 + 4]
            weight_sum = 0.0
            acc = np.zeros(values.shape[1:]) if values.ndim > 1 else 0.0
            for a in range(4):
                wgt = 1.0
                for b in range(4):
                    if a != b:
                        wgt *= (target - xs[b]) / (xs[a] - xs[b])
                acc = acc + wgt * values[i0 + a]
                weight_sum += wgt
            out[i] = acc
        return out

    return DiscretePath(
        s=grid,
        r=interp(r_s),
        t=interp(t_s),
        lam=None if lam_s is None else interp(lam_s),
    )


# --- scalar Lagrangian densities ---------------------------------------------


def lagrangian_density(
    spec: LagrangianSpec,
    r: Vec3,
    v: Vec3,
    t: float = 0.0,
    tdot: float = 1.0,
    lam: float = 0.0,
) -> float:
    """L(r, v, ...) for one node; v is the velocity in the path's parameter."""
    kind = spec.kind
    f = spec.field
    if kind is LagrangianKind.CLASSICAL_POINT:
        # parameter is lab time; v = u
        u2 = v.norm2()
        if u2 >= 1.0:
            raise ActionDomainError(f"|u|^2 = {u2:.6g} >= 1 on a classical path")
        qa = spec.charge * f.vecpot(r, t)
        return -spec.m0 * math.sqrt(1.0 - u2) - f.wbar(r, t) + qa.dot(v)
    if kind is LagrangianKind.CONSTRAINED_POINT:
        mink = tdot * tdot - v.norm2()
        if mink <= 0.0:
            raise ActionDomainError("constrained path has <xdot,xdot> <= 0")
        qa = spec.charge * f.vecpot(r, t)
        return -spec.m0 - (f.wbar(r, t) * tdot - qa.dot(v)) - lam * (math.sqrt(mink) - 1.0)
    if kind is LagrangianKind.REST_FRAME_POINT:
        qa = spec.charge * f.vecpot(r, t)
        return -f.wbar(r, t) * math.sqrt(1.0 + v.norm2()) + qa.dot(v)
    if kind is LagrangianKind.VACUUM_FREE_POINT:
        return -f.wbar(r, t) * math.sqrt(1.0 + v.norm2())
    if kind is LagrangianKind.VACUUM_INTERACTING_POINT:
        rel = v - spec.u_f * tdot
        return -f.wbar(r, t) * math.sqrt(1.0 + rel.norm2())
    raise ValidationError(f"{kind.value} is not a point-particle kind")


def _velocities(values: np.ndarray, ds: float) -> np.ndarray:
    """Central differences inside, one-sided second order at the ends."""
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * ds)
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * ds)
    out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * ds)
    return out


def _clock_nodes(spec: LagrangianSpec, path: DiscretePath) -> np.ndarray:
    """Lab-clock value at each node (the parameter itself for the classical kind)."""
    if spec.kind is LagrangianKind.CLASSICAL_POINT:
        return path.s
    if path.t is not None:
        return path.t
    return np.zeros(path.m)


def _cell_action(spec: LagrangianSpec, r, t, lam, ds, cells) -> float:
    """Trapezoidal discrete Lagrangian summed over the given cells.

    Each cell [c, c+1] carries the difference velocity (r_{c+1}-r_c)/ds and
    contributes (ds/2)[L(r_c, v_c) + L(r_{c+1}, v_c)]; this classic discrete
    Lagrangian is variationally consistent at every interior node (no
    spurious boundary gradients), unlike nodal quadrature with one-sided
    end stencils.
    """
    total = 0.0
    for c in cells:
        v = Vec3(*((r[c + 1] - r[c]) / ds))
        tdot = (t[c + 1] - t[c]) / ds
        total += 0.5 * ds * (
            lagrangian_density(spec, Vec3(*r[c]), v, float(t[c]), tdot, float(lam[c]))
            + lagrangian_density(
                spec, Vec3(*r[c + 1]), v, float(t[c + 1]), tdot, float(lam[c + 1])
            )
        )
    return total


def discrete_action(spec: LagrangianSpec, path) -> float:
    """Trapezoidal discrete-Lagrangian quadrature of the action along the path."""
    if spec.kind is LagrangianKind.STRING_DENSITY:
        return _string_action(spec, path)
    if spec.kind in _NEEDS_T and path.t is None:
        raise ValidationError(f"{spec.kind.value} path needs a t channel")
    t = _clock_nodes(spec, path)
    lam = path.lam if path.lam is not None else np.zeros(path.m)
    return _cell_action(spec, path.r, t, lam, path.ds, range(path.m - 1))


def euler_lagrange_residual(
    spec: LagrangianSpec, path, rel_step: float = FD_RELATIVE_STEP
) -> np.ndarray:
    """Numeric functional derivative dS/dr at interior nodes, density-normalized.

    Symmetric node perturbations with scale rel_step * path amplitude; only
    the two cells touching the perturbed node are recomputed.  A true
    solution path returns residuals that vanish at second order in the
    path spacing.
    """
    if spec.kind is LagrangianKind.STRING_DENSITY:
        return _string_el_residual(spec, path, rel_step)
    if spec.kind in _NEEDS_T and path.t is None:
        raise ValidationError(f"{spec.kind.value} path needs a t channel")
    m, ds = path.m, path.ds
    t = _clock_nodes(spec, path)
    lam = path.lam if path.lam is not None else np.zeros(m)
    hp = rel_step * max(1.0, float(np.max(np.abs(path.r))))

    r_work = path.r.copy()
    residuals = np.zeros((m - 2, 3))
    for j in range(1, m - 1):
        cells = (j - 1, j)
        for k in range(3):
            orig = r_work[j, k]
            r_work[j, k] = orig + hp
            s_plus = _cell_action(spec, r_work, t, lam, ds, cells)
            r_work[j, k] = orig - hp
            s_minus = _cell_action(spec, r_work, t, lam, ds, cells)
            r_work[j, k] = orig
            residuals[j - 1, k] = (s_plus - s_minus) / (2.0 * hp) / ds
    return residuals


# --- Legendre transform check --------------------------------------------------


@dataclass
class LegendreReport:
    kind: str
    max_abs_diff: float
    nodes: int

    def passed(self, tol: float = 1e-8) -> bool:
        return self.max_abs_diff < tol


def _onshell_clock_rate(spec: LagrangianSpec, v: Vec3) -> float:
    """Clock rate dt/ds consistent with the kind's own time relation.

    For the interacting kind the lab clock is slaved to the relative
    velocity through tdot^2 = 1 + |v - u_f tdot|^2 (positive root); the
    other nondegenerate kinds use unit rate (their Lagrangians do not
    read tdot).
    """
    if spec.kind is LagrangianKind.VACUUM_INTERACTING_POINT:
        uf2 = spec.u_f.norm2()
        if uf2 == 0.0:
            return math.sqrt(1.0 + v.norm2())
        b = v.dot(spec.u_f)
        disc = b * b + (1.0 - uf2) * (1.0 + v.norm2())
        return (-b + math.sqrt(disc)) / (1.0 - uf2)
    return 1.0


def legendre_transform_check(spec: LagrangianSpec, path: DiscretePath) -> LegendreReport:
    """Verify <dL/dv, v> - L against the model Hamiltonian at (r, p = dL/dv).

    Raises DegenerateLagrangianError for kinds whose velocity Hessian is
    singular (the string density, and the constrained kind whose
    multiplier term is homogeneous of degree one in the four-velocity).
    """
    if spec.kind in (LagrangianKind.STRING_DENSITY, LagrangianKind.CONSTRAINED_POINT):
        raise DegenerateLagrangianError(f"{spec.kind.value} has a degenerate Legendre map")
    ds = path.ds
    v = _velocities(path.r, ds)
    t = _clock_nodes(spec, path)

    worst = 0.0
    count = 0
    for i in range(1, path.m - 1):
        ri = Vec3(*path.r[i])
        vi = Vec3(*v[i])
        ti = float(t[i])
        tdi = _onshell_clock_rate(spec, vi)
        hv = FD_RELATIVE_STEP * (1.0 + vi.norm())
        p = []
        for k in range(3):
            dv = [0.0, 0.0, 0.0]
            dv[k] = hv
            lp = lagrangian_density(spec, ri, vi + Vec3(*dv), ti, tdi)
            lm = lagrangian_density(spec, ri, vi - Vec3(*dv), ti, tdi)
            p.append((lp - lm) / (2.0 * hv))
        p = Vec3(*p)
        h_num = p.dot(vi) - lagrangian_density(spec, ri, vi, ti, tdi)
        wbar = spec.field.wbar(ri, ti)
        if spec.kind is LagrangianKind.VACUUM_FREE_POINT:
            h_ref = vacuum_free_hamiltonian(wbar, p)
        elif spec.kind is LagrangianKind.REST_FRAME_POINT:
            qa = spec.charge * spec.field.vecpot(ri, ti)
            h_ref = vacuum_free_hamiltonian(wbar, p - qa)
        elif spec.kind is LagrangianKind.VACUUM_INTERACTING_POINT:
            qa = wbar * spec.u_f
            h_ref = interacting_hamiltonian(wbar, p - qa, qa)
        else:  # classical
            qa = spec.charge * spec.field.vecpot(ri, ti)
            kin = p - qa
            h_ref = math.sqrt(spec.m0**2 + kin.norm2()) + wbar
        worst = max(worst, abs(h_num - h_ref))
        count += 1
    return LegendreReport(spec.kind.value, worst, count)


# --- multiplier consistency ------------------------------------------------------


@dataclass
class MultiplierReport:
    values: np.ndarray
    max_deviation: float
    constraint_defect: float

    def is_constant(self, tol: float) -> bool:
        return self.max_deviation < tol


def multiplier_consistency(path: DiscretePath, m0: float) -> MultiplierReport:
    """Constancy of lambda tdot (1-u^2)^(1/2) along a constrained-kind path.

    Uses fourth-order differences of the clock channels so the check
    resolves 1e-7 constancy on integrator-produced paths.  Paths that
    violate the unit-norm four-velocity constraint show up as nonconstant.
    """
    if path.t is None:
        raise ValidationError("multiplier consistency needs the t channel")
    m, ds = path.m, path.ds
    if m < 7:
        raise ValidationError("need at least 7 nodes for the high-order stencil")
    lam = path.lam if path.lam is not None else np.full(m, m0)

    def d4(values):
        return (
            -values[4:] + 8.0 * values[3:-1] - 8.0 * values[1:-3] + values[:-4]
        ) / (12.0 * ds)

    tdot = d4(path.t)
    rdot = np.stack([d4(path.r[:, k]) for k in range(3)], axis=1)
    u2 = np.einsum("ij,ij->i", rdot, rdot) / tdot**2
    if np.any(u2 >= 1.0):
        raise ActionDomainError("path implies |u| >= 1")
    values = lam[2:-2] * tdot * np.sqrt(1.0 - u2)
    constraint = np.abs(np.sqrt(tdot**2 - np.einsum("ij,ij->i", rdot, rdot)) - 1.0)
    return MultiplierReport(
        values=values,
        max_deviation=float(np.max(np.abs(values - values[0]))),
        constraint_defect=float(np.max(constraint)),
    )


# --- string world-sheet action -----------------------------------------------------


@dataclass
class StringWorldPath:
    """World-sheet samples r(tau_k, sigma_j) on uniform grids."""

    tau: np.ndarray
    sigma: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        if self.r.shape != (self.tau.size, self.sigma.size, 3):
            raise ValidationError("r must have shape (n_tau, n_sigma, 3)")
        if self.tau.size < 5 or self.sigma.size < 5:
            raise ValidationError("world sheet needs at least 5 nodes per axis")

    @property
    def d_tau(self) -> float:
        return float(self.tau[1] - self.tau[0])

    @property
    def d_sigma(self) -> float:
        return float(self.sigma[1] - self.sigma[0])


def _sheet_cell_lagrangian(spec: LagrangianSpec, r: np.ndarray, d_tau: float, d_sigma: float) -> np.ndarray:
    """Midpoint discrete Lagrangian density per world-sheet cell.

    Each cell averages its four corners for the position and takes edge
    differences for the two derivative directions; like the 1-D discrete
    Lagrangian this is variationally consistent at every interior node.
    """
    mid = 0.25 * (r[1:, 1:] + r[1:, :-1] + r[:-1, 1:] + r[:-1, :-1])
    rdot = 0.5 * ((r[1:, 1:] + r[1:, :-1]) - (r[:-1, 1:] + r[:-1, :-1])) / d_tau
    rprime = 0.5 * ((r[1:, 1:] + r[:-1, 1:]) - (r[1:, :-1] + r[:-1, :-1])) / d_sigma
    pts = mid.reshape(-1, 3)
    w = spec.field.wbar_many(pts, np.zeros(len(pts))).reshape(mid.shape[:2])
    rp2 = np.einsum("ijk,ijk->ij", rprime, rprime)
    rd2 = np.einsum("ijk,ijk->ij", rdot, rdot)
    cross = np.einsum("ijk,ijk->ij", rprime, rdot)
    q2 = rp2 * (1.0 + rd2) - cross**2
    if np.min(q2) <= 0.0:
        raise ActionDomainError("string world-sheet measure went nonpositive")
    return -w * np.sqrt(q2)


def _string_action(spec: LagrangianSpec, path: StringWorldPath) -> float:
    lag = _sheet_cell_lagrangian(spec, path.r, path.d_tau, path.d_sigma)
    return float(np.sum(lag) * path.d_tau * path.d_sigma)


def _string_el_residual(spec: LagrangianSpec, path: StringWorldPath, rel_step: float) -> np.ndarray:
    """dS/dr at interior world-sheet nodes (k, j), density-normalized."""
    nt, ns = path.tau.size, path.sigma.size
    d_tau, d_sigma = path.d_tau, path.d_sigma
    hp = rel_step * max(1.0, float(np.max(np.abs(path.r))))
    work = path.r.copy()

    def cells_sum(k, j):
        # the four cells sharing node (k, j)
        block = work[k - 1 : k + 2, j - 1 : j + 2]
        lag = _sheet_cell_lagrangian(spec, block, d_tau, d_sigma)
        return float(np.sum(lag)) * d_tau * d_sigma

    out = np.zeros((nt - 2, ns - 2, 3))
    for k in range(1, nt - 1):
        for j in range(1, ns - 1):
            for c in range(3):
                orig = work[k, j, c]
                work[k, j, c] = orig + hp
                sp = cells_sum(k, j)
                work[k, j, c] = orig - hp
                sm = cells_sum(k, j)
                work[k, j, c] = orig
                out[k - 1, j - 1, c] = (sp - sm) / (2.0 * hp) / (d_tau * d_sigma)
    return out
