import math

import numpy as np
import pytest

from vacuumlab.errors import EnergyDomainError, ValidationError, ZeroDirectionError
from vacuumlab.geometry import Vec3, ZERO3
from vacuumlab.integrate import IntegrationParams, integrate_string
from vacuumlab.potentials import (
    CallableField,
    SourceKind,
    SourceSpec,
    UniformField,
    build_potential,
)
from vacuumlab.strings import (
    ChargedStringScenario,
    StringGrid,
    StringState,
    cell_integrands,
    charged_string_rhs,
    plucked_string,
    sigma_derivative,
    straight_string,
    string_canonical_rhs,
    string_electric_field,
    string_hamiltonian,
    string_hamiltonian_alt,
    string_momentum,
    transversality_defect,
)


def unit_string(n=16, wbar=-1.0):
    grid = StringGrid.uniform(0.0, 1.0, n)
    return straight_string(grid, ZERO3, Vec3(1, 0, 0)), UniformField(wbar)


def smooth_state(n=24, seed=43, amp=0.05):
    rng = np.random.default_rng(seed)
    grid = StringGrid.uniform(0.0, 1.0, n)
    state = straight_string(grid, ZERO3, Vec3(1, 0, 0))
    s = grid.sigma
    state.r[:, 1] += amp * np.sin(math.pi * s)
    state.r[:, 2] += 0.5 * amp * np.sin(2 * math.pi * s)
    state.p = amp * rng.normal(size=(n, 3))
    state.p[0] = state.p[-1] = 0.0
    return state, grid


def test_grid_validation():
    with pytest.raises(ValidationError):
        StringGrid(np.linspace(0, 1, 4))
    with pytest.raises(ValidationError):
        StringGrid(np.array([0.0, 0.1, 0.15, 0.3, 0.4, 0.5, 0.6, 0.7]))


def test_hamiltonian_static_unit_string():
    state, field = unit_string()
    assert string_hamiltonian(state, field) == pytest.approx(1.0, abs=1e-14)
    state2, field2 = unit_string(wbar=-2.0)
    assert string_hamiltonian(state2, field2) == pytest.approx(2.0, abs=1e-14)


def test_hamiltonian_quadrature_convergence():
    # curved static string: midpoint quadrature converges O(h^2) to arc length
    def value(n):
        grid = StringGrid.uniform(0.0, 1.0, n)
        state = straight_string(grid, ZERO3, Vec3(1, 0, 0))
        state.r[:, 1] = 0.1 * np.sin(math.pi * grid.sigma)
        return string_hamiltonian(state, UniformField(-1.0))

    sig = np.linspace(0.0, 1.0, 20001)
    exact = np.trapezoid(np.sqrt(1.0 + (0.1 * math.pi * np.cos(math.pi * sig)) ** 2), sig)
    errs = [abs(value(n) - exact) for n in (17, 33, 65)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.3)


def test_string_momentum_examples():
    grid = StringGrid.uniform(0.0, 1.0, 16)
    state = straight_string(grid, ZERO3, Vec3(1, 0, 0))
    w = np.full(16, -1.0)
    p = string_momentum(state.r, np.zeros((16, 3)), w, grid)
    assert np.max(np.abs(p)) < 1e-15
    # velocity parallel to r' gives zero momentum
    rdot = np.tile([0.4, 0.0, 0.0], (16, 1))
    p_par = string_momentum(state.r, rdot, w, grid)
    assert np.max(np.abs(p_par)) < 1e-14
    # transverse velocity: p = (0, v/sqrt(1+v^2), 0) for unit r' and wbar = -1
    v = 0.3
    rdot_t = np.tile([0.0, v, 0.0], (16, 1))
    p_t = string_momentum(state.r, rdot_t, w, grid)
    expected = v / math.sqrt(1.0 + v * v)
    assert np.allclose(p_t[:, 1], expected, atol=1e-14)
    assert np.max(np.abs(p_t[:, [0, 2]])) < 1e-14


def test_string_momentum_zero_direction():
    grid = StringGrid.uniform(0.0, 1.0, 8)
    r = np.zeros((8, 3))
    with pytest.raises(ZeroDirectionError):
        string_momentum(r, np.zeros((8, 3)), np.full(8, -1.0), grid)


def test_transversality_examples():
    state, field = unit_string()
    rng = np.random.default_rng(3)
    state.p = rng.normal(size=(16, 3))
    state.p[:, 0] = 0.0  # transverse to r' = +x
    assert transversality_defect(state) < 1e-15
    state.p = sigma_derivative(state.grid, state.r)  # p = r'
    assert transversality_defect(state) == pytest.approx(1.0, abs=1e-12)
    # output of string_momentum is transversal
    state2, grid = smooth_state()
    rdot = 0.1 * np.random.default_rng(5).normal(size=state2.r.shape)
    w = np.full(grid.n, -1.5)
    p = string_momentum(state2.r, rdot, w, grid)
    probe = StringState(grid, state2.r, p)
    assert transversality_defect(probe) < 1e-12


def test_canonical_rhs_static_straight_is_equilibrium():
    state, field = unit_string()
    dr, dp = string_canonical_rhs(state, field)
    assert np.max(np.abs(dr)) < 1e-15
    assert np.max(np.abs(dp)) < 1e-14
    # even with uneven node spacing along the same line
    state.r[5] = state.r[5] + np.array([0.01, 0.0, 0.0])
    dr2, dp2 = string_canonical_rhs(state, field)
    assert np.max(np.abs(dp2)) < 1e-14


def test_canonical_rhs_matches_fd_gradient_50_states():
    spec = SourceSpec(SourceKind.COULOMB_STATIC, 0.5, softening=0.4, background=-2.0)
    field = build_potential(spec, 1.0)
    h = 1e-6
    rng = np.random.default_rng(47)
    worst = 0.0
    for trial in range(50):
        state, grid = smooth_state(seed=100 + trial)
        dr, dp = string_canonical_rhs(state, field)
        dr_scale = max(float(np.max(np.abs(dr))), 1e-12)
        dp_scale = max(float(np.max(np.abs(dp))), 1e-12)
        j = int(rng.integers(1, grid.n - 1))
        for k in range(3):
            pert = state.copy()
            pert.p[j, k] += h
            hp = string_hamiltonian(pert, field)
            pert.p[j, k] -= 2 * h
            hm = string_hamiltonian(pert, field)
            num = -(hp - hm) / (2 * h) / grid.h
            worst = max(worst, abs(num - dr[j, k]) / dr_scale)
            pert = state.copy()
            pert.r[j, k] += h
            hp = string_hamiltonian(pert, field)
            pert.r[j, k] -= 2 * h
            hm = string_hamiltonian(pert, field)
            num = (hp - hm) / (2 * h) / grid.h
            worst = max(worst, abs(num - dp[j, k]) / dp_scale)
    assert worst < 1e-5


def test_energy_domain_guard_reports_node():
    state, field = unit_string()
    state.p[7] = np.array([0.0, 40.0, 0.0])
    with pytest.raises(EnergyDomainError) as err:
        string_hamiltonian(state, field)
    assert err.value.where in (6, 7)


def test_alt_hamiltonian_reduces_at_zero_momentum():
    state, field = unit_string()
    assert string_hamiltonian_alt(state, field) == pytest.approx(
        string_hamiltonian(state, field), abs=1e-14
    )


def test_alt_hamiltonian_integrand_example():
    # wbar = -1, r' = (1,0,0), p = (0,0.5,0): energy integrand sqrt(0.75),
    # alternative integrand sqrt(1.25); the gap is the claimed-equivalence failure
    state, field = unit_string()
    state.p = np.tile([0.0, 0.5, 0.0], (16, 1))
    cells = cell_integrands(state, field)
    assert np.allclose(cells["energy"], math.sqrt(0.75), atol=1e-12)
    assert np.allclose(cells["alt"], math.sqrt(1.25), atol=1e-12)
    assert string_hamiltonian_alt(state, field) > string_hamiltonian(state, field)


def test_alt_gap_identity_transversal_states():
    rng = np.random.default_rng(53)
    for _ in range(50):
        # straight string along a random direction, momentum exactly transverse
        e = rng.normal(size=3)
        e /= np.linalg.norm(e)
        grid = StringGrid.uniform(0.0, 1.0, 12)
        spans = np.cumsum(rng.uniform(0.5, 1.5, size=12))
        spans = (spans - spans[0]) / (spans[-1] - spans[0])
        r = np.outer(spans, e)
        wbar = -float(rng.uniform(0.8, 2.0))
        # momentum exactly transverse and safely inside the energy domain
        min_wrp = abs(wbar) * float(np.min(np.linalg.norm(np.diff(r, axis=0), axis=1))) / grid.h
        p_raw = rng.normal(size=(12, 3))
        p_raw *= 0.3 * min_wrp / max(float(np.max(np.abs(p_raw))), 1e-12)
        p = p_raw - np.outer(p_raw @ e, e)
        state = StringState(grid, r, p)
        field = UniformField(wbar)
        cells = cell_integrands(state, field)
        lhs = cells["alt"] ** 2
        rhs = cells["wrprime_sq"] + cells["pbar_sq"]
        assert np.max(np.abs(lhs - rhs)) < 1e-10
        if np.max(np.abs(p)) > 1e-12:
            assert string_hamiltonian_alt(state, field) > string_hamiltonian(state, field)


def test_integrate_static_string_unchanged():
    state, field = unit_string(n=32)
    traj = integrate_string(
        state, field, IntegrationParams(step=1e-3, n_steps=200, audit_every=20)
    )
    assert np.max(np.abs(traj.final.r - state.r)) < 1e-12
    assert np.max(np.abs(traj.final.p)) < 1e-12


def test_integrate_pluck_conservation_and_transversality():
    # linear-regime pluck: the nodal transversality defect grows ~ amplitude^2
    grid = StringGrid.uniform(0.0, 1.0, 64)
    state = plucked_string(grid, ZERO3, Vec3(1, 0, 0), 0.002, 0.12)
    field = UniformField(-1.0)
    traj = integrate_string(
        state, field, IntegrationParams(step=1e-4, n_steps=1000, audit_every=10)
    )
    assert traj.report["hamiltonian"].relative_drift < 1e-5
    horizon = 1e-4 * 1000
    growth = traj.report["transversality"].max_drift / horizon
    assert growth < 1e-6


def test_integrate_energy_domain_abort_is_clean():
    grid = StringGrid.uniform(0.0, 1.0, 32)
    state = plucked_string(grid, ZERO3, Vec3(1, 0, 0), 0.9, 0.05)
    field = UniformField(-1.0)
    with pytest.raises(EnergyDomainError) as err:
        integrate_string(
            state, field, IntegrationParams(step=5e-3, n_steps=4000, audit_every=10)
        )
    assert err.value.where is not None


def test_charged_rhs_reduces_to_uncharged():
    state, field = unit_string(n=20)
    state.p = np.zeros_like(state.p)
    state.r[:, 1] += 0.03 * np.sin(math.pi * state.grid.sigma)
    state.p[1:-1, 1] = 0.02
    dr_u, dp_u = string_canonical_rhs(state, field)
    scenario = ChargedStringScenario(state, charge_density=0.5, field=field, u_f=ZERO3)
    rhs = charged_string_rhs(scenario)
    assert np.array_equal(rhs.dr, dr_u)
    assert np.array_equal(rhs.dp, dp_u)


def test_charged_rhs_uniform_vecpot_terms_vanish():
    state, field = unit_string(n=16)
    const_a = CallableField(
        wbar_fn=lambda r, t: -1.0,
        vecpot_fn=lambda r, t: Vec3(0.2, -0.1, 0.3),
        grad_vecpot_fn=lambda r, t: np.zeros((3, 3)),
    )
    scenario = ChargedStringScenario(state, charge_density=1.0, field=const_a, u_f=ZERO3)
    rhs = charged_string_rhs(scenario)
    assert np.max(np.abs(rhs.terms.magnetic)) < 1e-15
    assert np.max(np.abs(rhs.terms.vecpot_gradient)) < 1e-15


def test_charged_rhs_term_by_term_oracle():
    spec = SourceSpec(
        SourceKind.COULOMB_COMOVING,
        0.8,
        u_f=Vec3(0.1, 0.05, 0.2),
        softening=0.3,
        background=-2.0,
    )
    field = build_potential(spec, 1.0)
    state, grid = smooth_state(n=20, seed=71, amp=0.04)
    state.r[:, 0] += 0.5  # keep away from the source core
    q = 0.6
    scenario = ChargedStringScenario(state, charge_density=q, field=field, u_f=Vec3(0.1, 0.05, 0.2))
    rhs = charged_string_rhs(scenario)
    h = 1e-5
    for i in (3, 9, 16):
        ri = Vec3(*state.r[i])
        ti = float(state.t[i])
        rdot = Vec3(*rhs.terms.rdot[i])
        beta = rhs.terms.beta[i]
        # magnetic term against a finite-difference curl
        curl = np.zeros(3)
        for (a, b, c) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            eb = [0.0] * 3
            eb[b] = h
            ec = [0.0] * 3
            ec[c] = h
            dc_db = (field.vecpot(ri + Vec3(*eb), ti)[c] - field.vecpot(ri - Vec3(*eb), ti)[c]) / (2 * h)
            db_dc = (field.vecpot(ri + Vec3(*ec), ti)[b] - field.vecpot(ri - Vec3(*ec), ti)[b]) / (2 * h)
            curl[a] = dc_db - db_dc
        mag_fd = q * np.cross(np.array(list(rdot)), curl)
        assert np.allclose(rhs.terms.magnetic[i], mag_fd, rtol=1e-6, atol=1e-9)
        # vector-potential gradient term
        grad_fd = np.zeros(3)
        for k in range(3):
            e = [0.0] * 3
            e[k] = h
            grad_fd[k] = (
                rdot.dot(field.vecpot(ri + Vec3(*e), ti))
                - rdot.dot(field.vecpot(ri - Vec3(*e), ti))
            ) / (2 * h)
        assert np.allclose(rhs.terms.vecpot_gradient[i], -q * grad_fd, rtol=1e-6, atol=1e-9)
        # induction term against a time difference
        at = (field.vecpot(ri, ti + h) - field.vecpot(ri, ti - h)) / (2 * h)
        assert np.allclose(
            rhs.terms.induction[i], -q * beta * np.array(list(at)), rtol=1e-6, atol=1e-9
        )
    # Hamiltonian-part terms against the finite-difference functional gradient
    dgrad = rhs.terms.wbar_gradient + rhs.terms.tension
    for j in (5, 12):
        for k in range(3):
            pert = state.copy()
            pert.r[j, k] += 1e-6
            hp = string_hamiltonian(pert, field)
            pert.r[j, k] -= 2e-6
            hm = string_hamiltonian(pert, field)
            num = (hp - hm) / (2e-6) / grid.h
            assert num == pytest.approx(dgrad[j, k], rel=2e-5, abs=1e-7)


def test_string_electric_field_examples():
    state, field = unit_string(n=16)
    scenario = ChargedStringScenario(state, charge_density=1.0, field=field, u_f=ZERO3)
    e = string_electric_field(scenario, 8)
    assert e.norm() < 1e-14
    # time-dependent vector potential isolates the induction term
    ind_field = CallableField(
        wbar_fn=lambda r, t: -1.0,
        vecpot_fn=lambda r, t: Vec3(0.3 * t, 0.0, 0.0),
        dvecpot_dt_fn=lambda r, t: Vec3(0.3, 0.0, 0.0),
    )
    scen2 = ChargedStringScenario(state, charge_density=2.0, field=ind_field, u_f=ZERO3)
    e2 = string_electric_field(scen2, 8)
    assert (e2 - Vec3(-0.6, 0.0, 0.0)).norm() < 1e-12
    with pytest.raises(ValidationError):
        string_electric_field(scenario, 0)


def test_string_electric_field_recomposition():
    spec = SourceSpec(
        SourceKind.COULOMB_COMOVING, 0.8, u_f=Vec3(0.1, 0.0, 0.2),
        softening=0.3, background=-2.0,
    )
    field = build_potential(spec, 1.0)
    state, grid = smooth_state(n=20, seed=77, amp=0.03)
    state.r[:, 0] += 0.5
    scenario = ChargedStringScenario(state, 0.4, field, Vec3(0.1, 0.0, 0.2))
    rhs = charged_string_rhs(scenario)
    e = string_electric_field(scenario, 7)
    expected = (
        rhs.terms.induction[7] + rhs.terms.wbar_gradient[7] + rhs.terms.tension[7]
    )
    assert np.allclose(np.array(list(e)), expected, atol=1e-14)


def test_charged_rhs_zero_direction_guard():
    grid = StringGrid.uniform(0.0, 1.0, 8)
    state = StringState(grid, np.zeros((8, 3)), np.zeros((8, 3)))
    scenario = ChargedStringScenario(state, 1.0, UniformField(-1.0), ZERO3)
    with pytest.raises((ZeroDirectionError, EnergyDomainError)):
        charged_string_rhs(scenario)


def test_alt_and_energy_functionals_at_degenerate_boundary():
    # p = wbar * r' zeroes the alternative integrand while the energy
    # integrand sits exactly on its square-root domain boundary
    state, field = unit_string()
    rp = sigma_derivative(state.grid, state.r)
    state.p = -1.0 * rp  # wbar = -1
    diff_norms = np.linalg.norm(-1.0 * (np.diff(state.r, axis=0) / state.grid.h)
                                - 0.5 * (state.p[1:] + state.p[:-1]), axis=1)
    assert np.max(diff_norms) < 1e-14  # alternative integrand vanishes
    with pytest.raises(EnergyDomainError):
        string_hamiltonian(state, field)


def test_string_flow_cross_validated_by_worldsheet_action():
    # integrate the canonical flow, stack samples into a world sheet, and
    # measure the independent discrete-action stationarity; refining both
    # grids by two shrinks the residual by about four
    from vacuumlab.variational import (
        LagrangianKind,
        LagrangianSpec,
        StringWorldPath,
        euler_lagrange_residual,
    )

    field = UniformField(-1.0)
    spec = LagrangianSpec(LagrangianKind.STRING_DENSITY, field)

    def residual_for(n, stride):
        grid = StringGrid.uniform(0.0, 1.0, n)
        state = plucked_string(grid, ZERO3, Vec3(1, 0, 0), 0.01, 0.18)
        step = 2.5e-4
        traj = integrate_string(
            state, field, IntegrationParams(step=step, n_steps=64, audit_every=64)
        )
        samples = traj.samples[::stride]
        sheet = StringWorldPath(
            tau=np.array([s.tau for s in samples]),
            sigma=grid.sigma,
            r=np.array([s.r for s in samples]),
        )
        res = euler_lagrange_residual(spec, sheet)
        return float(np.max(np.sqrt(np.einsum("ijk,ijk->ij", res, res))))

    coarse = residual_for(9, 8)   # h_sigma = 1/8,  d_tau = 2e-3
    fine = residual_for(17, 4)    # h_sigma = 1/16, d_tau = 1e-3
    assert fine < 1e-2
    assert coarse / fine == pytest.approx(4.0, rel=0.4)
