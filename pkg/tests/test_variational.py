import math

import numpy as np
import pytest

from vacuumlab.errors import ActionDomainError, DegenerateLagrangianError
from vacuumlab.geometry import Vec3, ZERO3
from vacuumlab.integrate import IntegrationParams, integrate_particle
from vacuumlab.particle import (
    ForceModel,
    ModelKind,
    make_constrained_state,
    make_vacuum_state,
)
from vacuumlab.potentials import (
    LinearField,
    SourceKind,
    SourceSpec,
    UniformField,
    UniformMagneticField,
    build_potential,
)
from vacuumlab.variational import (
    DiscretePath,
    LagrangianKind,
    LagrangianSpec,
    StringWorldPath,
    discrete_action,
    euler_lagrange_residual,
    legendre_transform_check,
    multiplier_consistency,
    path_from_trajectory,
    uniform_proper_path,
)


def straight_path(m=41, v=ZERO3, r0=ZERO3, horizon=1.0):
    s = np.linspace(0.0, horizon, m)
    r = np.array([list(r0 + v * si) for si in s])
    return DiscretePath(s=s, r=r)


def test_action_static_path_uniform_potential():
    spec = LagrangianSpec(LagrangianKind.VACUUM_FREE_POINT, UniformField(-1.0))
    assert discrete_action(spec, straight_path()) == pytest.approx(1.0, abs=1e-13)


def test_action_uniform_velocity_closed_form():
    v = Vec3(0.4, 0.2, -0.1)
    spec = LagrangianSpec(LagrangianKind.VACUUM_FREE_POINT, UniformField(-1.0))
    expected = math.sqrt(1.0 + v.norm2())
    assert discrete_action(spec, straight_path(v=v)) == pytest.approx(expected, abs=1e-12)


def test_action_quadrature_convergence():
    # curved path in a varying potential: trapezoid error drops 4x per halving
    field = LinearField(-2.0, Vec3(0.3, 0.0, 0.0))
    spec = LagrangianSpec(LagrangianKind.VACUUM_FREE_POINT, field)

    def path(m):
        s = np.linspace(0.0, 1.0, m)
        r = np.stack([np.sin(s), 0.2 * s**2, np.zeros_like(s)], axis=1)
        return DiscretePath(s=s, r=r)

    vals = [discrete_action(spec, path(m)) for m in (41, 81, 161)]
    e1, e2 = abs(vals[0] - vals[2]), abs(vals[1] - vals[2])
    assert e1 / e2 == pytest.approx(4.0, rel=0.35)


def test_el_residual_straight_free_path_is_stationary():
    spec = LagrangianSpec(LagrangianKind.VACUUM_FREE_POINT, UniformField(-1.0))
    res = euler_lagrange_residual(spec, straight_path(v=Vec3(0.3, 0.0, 0.0)))
    assert np.max(np.abs(res)) < 1e-8


def test_el_residual_perturbed_node_sign_restoring():
    spec = LagrangianSpec(LagrangianKind.VACUUM_FREE_POINT, UniformField(-1.0))
    path = straight_path(m=41, v=Vec3(0.3, 0.0, 0.0))
    j = 20
    path.r[j, 1] += 0.01  # push one node off the straight line
    res = euler_lagrange_residual(spec, path)
    norms = np.sqrt(np.einsum("ij,ij->i", res, res))
    assert np.argmax(norms) == j - 1
    # the action gradient points along the displacement (restoring force is minus it)
    assert res[j - 1, 1] > 0


def test_el_residual_vacuum_free_trajectory():
    # near-circular orbit keeps the discretization constant small
    spec_src = SourceSpec(SourceKind.COULOMB_STATIC, 1.0, softening=0.05, background=-1.0)
    field = build_potential(spec_src, 1.0)
    model = ForceModel(ModelKind.VACUUM_FREE, field, charge=1.0)
    state = make_vacuum_state(field, Vec3(0.5, 0, 0), Vec3(0, 0.37, 0))
    traj = integrate_particle(
        model, state, IntegrationParams(step=2.5e-4, n_steps=8000, audit_every=100)
    )
    spec = LagrangianSpec(LagrangianKind.VACUUM_FREE_POINT, field)
    res_coarse = euler_lagrange_residual(spec, path_from_trajectory(traj, stride=64))
    res_fine = euler_lagrange_residual(spec, path_from_trajectory(traj, stride=32))
    worst_c = float(np.max(np.sqrt(np.einsum("ij,ij->i", res_coarse, res_coarse))))
    worst_f = float(np.max(np.sqrt(np.einsum("ij,ij->i", res_fine, res_fine))))
    assert worst_f < 1e-5
    assert worst_c / worst_f == pytest.approx(4.0, rel=0.35)


def test_action_domain_error():
    spec = LagrangianSpec(
        LagrangianKind.CLASSICAL_POINT, UniformField(-1.0), m0=1.0, charge=1.0
    )
    path = straight_path(v=Vec3(1.2, 0, 0))  # superluminal classical path
    with pytest.raises(ActionDomainError):
        discrete_action(spec, path)


def test_legendre_vacuum_free_matches_hamiltonian():
    field = LinearField(-2.0, Vec3(0.2, -0.1, 0.0))
    spec = LagrangianSpec(LagrangianKind.VACUUM_FREE_POINT, field)
    rng = np.random.default_rng(41)
    s = np.linspace(0.0, 1.0, 121)
    r = np.stack(
        [0.4 * np.sin(s + 0.3), 0.3 * np.cos(2 * s), 0.1 * s**2], axis=1
    )
    report = legendre_transform_check(spec, DiscretePath(s=s, r=r))
    assert report.passed(1e-8)


def test_legendre_interacting_reduces_and_matches():
    spec_src = SourceSpec(
        SourceKind.COULOMB_COMOVING, 1.0, u_f=Vec3(0.15, 0.0, 0.1),
        softening=0.1, background=-1.5,
    )
    field = build_potential(spec_src, 1.0)
    s = np.linspace(0.0, 0.6, 121)
    r = np.stack([0.5 + 0.2 * s, 0.1 * np.sin(s), 0.05 * s], axis=1)
    t = s * 1.2  # frozen lab-clock channel
    spec = LagrangianSpec(
        LagrangianKind.VACUUM_INTERACTING_POINT, field, u_f=Vec3(0.15, 0.0, 0.1)
    )
    report = legendre_transform_check(spec, DiscretePath(s=s, r=r, t=t))
    assert report.passed(1e-8)
    # u_f = 0 reduces to the free kind
    spec0 = LagrangianSpec(LagrangianKind.VACUUM_INTERACTING_POINT, field, u_f=ZERO3)
    free = LagrangianSpec(LagrangianKind.VACUUM_FREE_POINT, field)
    path = DiscretePath(s=s, r=r, t=t)
    assert discrete_action(spec0, path) == pytest.approx(
        discrete_action(free, path), rel=1e-12
    )


def test_legendre_classical_and_rest_frame():
    field = UniformMagneticField(Vec3(0, 0, 0.8), -1.2)
    s = np.linspace(0.0, 1.0, 121)
    r = np.stack([0.3 * np.sin(s), 0.3 * np.cos(s), 0.05 * s], axis=1)
    cls = LagrangianSpec(LagrangianKind.CLASSICAL_POINT, field, m0=1.0, charge=0.7)
    assert legendre_transform_check(cls, DiscretePath(s=s, r=r)).passed(1e-8)
    rest = LagrangianSpec(LagrangianKind.REST_FRAME_POINT, field, charge=0.7)
    assert legendre_transform_check(rest, DiscretePath(s=s, r=r)).passed(1e-8)


def test_legendre_degenerate_kinds_raise():
    field = UniformField(-1.0)
    path = straight_path()
    with pytest.raises(DegenerateLagrangianError):
        legendre_transform_check(
            LagrangianSpec(LagrangianKind.STRING_DENSITY, field), path
        )
    with pytest.raises(DegenerateLagrangianError):
        legendre_transform_check(
            LagrangianSpec(LagrangianKind.CONSTRAINED_POINT, field, m0=1.0), path
        )


def test_multiplier_consistency_exact_free_path():
    m = 41
    tau = np.linspace(0.0, 1.0, m)
    u = Vec3(0.3, 0.1, 0.0)
    gamma = 1.0 / math.sqrt(1.0 - u.norm2())
    r = np.array([list(u * (gamma * ti)) for ti in tau])  # rdot = u measured in tau
    t = gamma * tau
    path = DiscretePath(s=tau, r=r, t=t, lam=np.full(m, 1.0))
    report = multiplier_consistency(path, 1.0)
    assert report.max_deviation < 1e-10
    assert report.constraint_defect < 1e-10


def test_multiplier_consistency_integrated_uniform_e():
    lin = LinearField(-2.0, Vec3(-0.5, 0, 0))
    model = ForceModel(ModelKind.CONSTRAINED, lin, charge=1.0, rest_mass=1.0)
    state = make_constrained_state(ZERO3, Vec3(0.1, 0.3, 0), 1.0)
    traj = integrate_particle(
        model, state, IntegrationParams(step=5e-4, n_steps=4000, audit_every=100)
    )
    path = uniform_proper_path(traj, 400)
    report = multiplier_consistency(path, 1.0)
    assert report.max_deviation < 1e-7
    # the unit-norm four-velocity constraint holds along proper-time paths
    assert report.constraint_defect < 1e-8


def test_multiplier_consistency_flags_violation():
    m = 41
    tau = np.linspace(0.0, 1.0, m)
    r = np.stack([0.5 * tau**2, np.zeros(m), np.zeros(m)], axis=1)
    t = tau.copy()  # violates <xdot,xdot> = 1 since tdot = 1 but rdot != 0
    path = DiscretePath(s=tau, r=r, t=t, lam=np.full(m, 1.0))
    report = multiplier_consistency(path, 1.0)
    assert not report.is_constant(1e-7)
    assert report.constraint_defect > 1e-3


def test_string_action_and_sigma_relabeling_invariance():
    field = UniformField(-1.0)
    spec = LagrangianSpec(LagrangianKind.STRING_DENSITY, field)
    nt, ns = 9, 33
    tau = np.linspace(0.0, 0.05, nt)
    sigma = np.linspace(0.0, 1.0, ns)

    def sheet(warp):
        r = np.zeros((nt, ns, 3))
        for k, tk in enumerate(tau):
            ss = sigma + warp * np.sin(math.pi * sigma) * (sigma[-1] - sigma)
            r[k, :, 0] = ss
            r[k, :, 1] = 0.02 * np.sin(math.pi * sigma) * math.cos(tk)
        return StringWorldPath(tau, sigma, r)

    a_uniform = discrete_action(spec, sheet(0.0))
    a_warped = discrete_action(spec, sheet(0.15))
    # same geometric surface, relabeled sigma: equal within quadrature error
    assert a_warped == pytest.approx(a_uniform, rel=5e-4)
    finer = discrete_action(spec, sheet(0.075))
    assert abs(finer - a_uniform) <= abs(a_warped - a_uniform) + 1e-12


def test_string_el_residual_static_straight_sheet():
    field = UniformField(-1.0)
    spec = LagrangianSpec(LagrangianKind.STRING_DENSITY, field)
    nt, ns = 7, 17
    tau = np.linspace(0.0, 0.05, nt)
    sigma = np.linspace(0.0, 1.0, ns)
    r = np.zeros((nt, ns, 3))
    r[:, :, 0] = sigma[None, :]
    res = euler_lagrange_residual(spec, StringWorldPath(tau, sigma, r))
    assert np.max(np.abs(res)) < 1e-8


def test_action_stationarity_under_random_perturbations():
    # first-order change vanishes: action differences scale quadratically in
    # the perturbation amplitude for 100 random smooth endpoint-fixed bumps
    spec_src = SourceSpec(SourceKind.COULOMB_STATIC, 1.0, softening=0.05, background=-1.0)
    field = build_potential(spec_src, 1.0)
    model = ForceModel(ModelKind.VACUUM_FREE, field, charge=1.0)
    state = make_vacuum_state(field, Vec3(0.5, 0, 0), Vec3(0, 0.37, 0))
    traj = integrate_particle(
        model, state, IntegrationParams(step=5e-4, n_steps=2000, audit_every=2000)
    )
    path = path_from_trajectory(traj, stride=10)
    spec = LagrangianSpec(LagrangianKind.VACUUM_FREE_POINT, field)
    s0 = discrete_action(spec, path)
    rng = np.random.default_rng(83)
    m = path.m
    envelope = np.sin(math.pi * np.linspace(0.0, 1.0, m))
    for _ in range(100):
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        phase = rng.uniform(0, math.pi)
        shape = envelope * np.sin(math.pi * np.linspace(0, 1, m) * rng.integers(1, 4) + phase)
        bump = np.outer(shape, direction)
        deltas = []
        for amp in (2e-2, 1e-2):
            pert = DiscretePath(s=path.s, r=path.r + amp * bump, t=path.t, lam=path.lam)
            deltas.append(abs(discrete_action(spec, pert) - s0))
        # quadratic scaling: halving the amplitude quarters the action change
        assert deltas[0] / deltas[1] == pytest.approx(4.0, rel=0.25)
        assert deltas[1] < 1e-2 * 1e-2 * 50.0
