import math

import numpy as np
import pytest

from vacuumlab.errors import (
    InvalidSourceError,
    SingularPointError,
    SuperluminalVelocityError,
    ZeroChargeError,
)
from vacuumlab.geometry import Vec3, ZERO3
from vacuumlab.potentials import (
    CallableField,
    LinearField,
    SourceKind,
    SourceSpec,
    UniformField,
    UniformMagneticField,
    build_potential,
    electric_field,
    magnetic_field,
    wave_residual,
)

FOUR_PI = 4.0 * math.pi


def coulomb(strength=1.0, q=1.0, eps=0.0, u_f=ZERO3, background=0.0):
    kind = SourceKind.COULOMB_COMOVING if u_f.norm2() > 0 else SourceKind.COULOMB_STATIC
    spec = SourceSpec(kind, strength, u_f=u_f, softening=eps, background=background)
    return build_potential(spec, q)


def test_uniform_field_example():
    f = build_potential(SourceSpec(SourceKind.UNIFORM, -1.0), 1.0)
    assert f.wbar(Vec3(3, 2, 1), 5.0) == -1.0
    assert f.grad_wbar(Vec3(3, 2, 1), 5.0) == ZERO3
    assert f.vecpot(Vec3(3, 2, 1), 5.0) == ZERO3


def test_coulomb_static_value():
    f = coulomb()
    assert f.wbar(Vec3(1, 0, 0), 0.0) == pytest.approx(-1.0 / FOUR_PI, rel=1e-15)


def test_comoving_vecpot_is_wbar_uf_over_q():
    u_f = Vec3(0.5, 0, 0)
    f = coulomb(u_f=u_f)
    r = Vec3(1, 0, 0)
    a = f.vecpot(r, 0.0)
    assert (a - u_f * f.wbar(r, 0.0)).norm() < 1e-15


def test_source_spec_invariants():
    with pytest.raises(InvalidSourceError):
        SourceSpec(SourceKind.UNIFORM, 1.0).validate()
    with pytest.raises(InvalidSourceError):
        SourceSpec(SourceKind.COULOMB_STATIC, 1.0, softening=-1.0).validate()
    with pytest.raises(InvalidSourceError):
        SourceSpec(SourceKind.COULOMB_STATIC, 1.0, background=0.5).validate()
    with pytest.raises(SuperluminalVelocityError):
        SourceSpec(SourceKind.COULOMB_COMOVING, 1.0, u_f=Vec3(1.0, 0, 0)).validate()
    with pytest.raises(InvalidSourceError):
        SourceSpec(SourceKind.COULOMB_STATIC, 0.0).validate()


def test_electric_field_uniform_is_zero():
    f = build_potential(SourceSpec(SourceKind.UNIFORM, -2.0), 1.0)
    assert electric_field(f, 1.0, Vec3(1, 1, 1), 0.0) == ZERO3


def test_electric_field_coulomb_attractive_direction():
    # attractive normalization: E at +x points back toward the source
    f = coulomb()
    e = electric_field(f, 1.0, Vec3(1, 0, 0), 0.0)
    assert e.x == pytest.approx(-1.0 / FOUR_PI, rel=1e-12)
    assert abs(e.y) < 1e-15 and abs(e.z) < 1e-15


def test_electric_field_pure_induction():
    f = CallableField(
        wbar_fn=lambda r, t: -1.0,
        vecpot_fn=lambda r, t: Vec3(t, 0.0, 0.0),
        dvecpot_dt_fn=lambda r, t: Vec3(1.0, 0.0, 0.0),
    )
    e = electric_field(f, 1.0, Vec3(0, 0, 0), 0.3)
    assert (e - Vec3(-1.0, 0.0, 0.0)).norm() < 1e-15


def test_electric_field_zero_charge():
    f = coulomb()
    with pytest.raises(ZeroChargeError):
        electric_field(f, 0.0, Vec3(1, 0, 0), 0.0)


def test_magnetic_field_examples():
    f = build_potential(SourceSpec(SourceKind.UNIFORM, -1.0), 1.0)
    assert magnetic_field(f, Vec3(1, 2, 3), 0.0) == ZERO3
    b0 = 0.7
    fb = UniformMagneticField(Vec3(0, 0, b0))
    assert (magnetic_field(fb, Vec3(0.3, -0.2, 1.0), 0.0) - Vec3(0, 0, b0)).norm() < 1e-15
    # pure gauge A = grad(x*y) = (y, x, 0)
    gauge = CallableField(
        vecpot_fn=lambda r, t: Vec3(r.y, r.x, 0.0),
        grad_vecpot_fn=lambda r, t: np.array(
            [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
        ),
    )
    assert magnetic_field(gauge, Vec3(1, 2, 3), 0.0).norm() < 1e-9


def test_wave_residual_harmonic():
    def w(r, t):
        return 1.0 / (FOUR_PI * r.norm())

    def hess(r, t):
        a = r.as_array()
        d = r.norm()
        return (3.0 * np.outer(a, a) / d**2 - np.eye(3)) / (FOUR_PI * d**3)

    f = CallableField(wbar_fn=w, wbar_hessian_fn=hess, wbar_tt_fn=lambda r, t: 0.0)
    assert abs(wave_residual(f, 0.0, Vec3(1, 1, 1), 0.0)) < 1e-9


def test_wave_residual_travelling_profile():
    # w = sin(t - x): d2/dt2 = -sin, laplacian = -sin; residual 0
    f = CallableField(
        wbar_fn=lambda r, t: math.sin(t - r.x),
        wbar_hessian_fn=lambda r, t: np.diag([-math.sin(t - r.x), 0.0, 0.0]),
        wbar_tt_fn=lambda r, t: -math.sin(t - r.x),
    )
    assert abs(wave_residual(f, 0.0, Vec3(0.3, 1.0, -2.0), 0.7)) < 1e-12


def test_wave_residual_quadratic():
    f = CallableField(
        wbar_fn=lambda r, t: r.x**2,
        wbar_hessian_fn=lambda r, t: np.diag([2.0, 0.0, 0.0]),
        wbar_tt_fn=lambda r, t: 0.0,
    )
    assert wave_residual(f, 0.0, Vec3(1, 2, 3), 0.0) == pytest.approx(-2.0)


def test_wave_residual_coulomb_static_offcenter():
    f = coulomb(eps=0.0)
    rng = np.random.default_rng(3)
    for _ in range(50):
        r = Vec3(*rng.uniform(-1, 1, size=3))
        if r.norm() <= 0.01:
            continue
        assert abs(wave_residual(f, None, r, 0.0)) < 1e-8


def test_wave_residual_softened_matches_plummer_density():
    f = coulomb(eps=0.05)
    rng = np.random.default_rng(5)
    for _ in range(20):
        r = Vec3(*rng.uniform(-0.5, 0.5, size=3))
        assert abs(wave_residual(f, None, r, 0.0)) < 1e-12


def test_wave_residual_singular_guard():
    f = coulomb(eps=0.0)
    with pytest.raises(SingularPointError):
        wave_residual(f, None, Vec3(1e-4, 0, 0), 0.0)


@pytest.mark.parametrize(
    "field",
    [
        build_potential(SourceSpec(SourceKind.UNIFORM, -1.5), 1.0),
        coulomb(eps=0.05, background=-1.0),
        coulomb(strength=0.7, q=0.5, eps=0.08, u_f=Vec3(0.2, -0.1, 0.05), background=-2.0),
        LinearField(-2.0, Vec3(0.3, -0.1, 0.2)),
        UniformMagneticField(Vec3(0.1, 0.2, 0.9), -1.0),
    ],
    ids=["uniform", "coulomb-static", "coulomb-comoving", "linear", "uniform-b"],
)
def test_analytic_derivatives_match_central_differences(field):
    rng = np.random.default_rng(17)
    h = 1e-5
    for _ in range(100):
        r = Vec3(*rng.uniform(0.3, 1.2, size=3))
        t = float(rng.uniform(0.0, 1.0))
        g = field.grad_wbar(r, t)
        a_dot = field.dvecpot_dt(r, t)
        jac = field.grad_vecpot(r, t)
        for k in range(3):
            e = [0.0, 0.0, 0.0]
            e[k] = h
            dr = Vec3(*e)
            num = (field.wbar(r + dr, t) - field.wbar(r - dr, t)) / (2 * h)
            assert num == pytest.approx(g[k], rel=1e-6, abs=1e-9)
            da = [
                (field.vecpot(r + dr, t)[i] - field.vecpot(r - dr, t)[i]) / (2 * h)
                for i in range(3)
            ]
            for i in range(3):
                assert da[i] == pytest.approx(jac[i, k], rel=1e-6, abs=1e-9)
        num_t = (field.wbar(r, t + h) - field.wbar(r, t - h)) / (2 * h)
        assert num_t == pytest.approx(field.dwbar_dt(r, t), rel=1e-6, abs=1e-9)
        for i in range(3):
            num_at = (field.vecpot(r, t + h)[i] - field.vecpot(r, t - h)[i]) / (2 * h)
            assert num_at == pytest.approx(a_dot[i], rel=1e-6, abs=1e-9)


def test_vectorized_eval_matches_scalar():
    field = coulomb(strength=0.7, q=0.5, eps=0.08, u_f=Vec3(0.2, -0.1, 0.05), background=-2.0)
    rng = np.random.default_rng(23)
    pts = rng.uniform(0.2, 1.0, size=(40, 3))
    times = rng.uniform(0.0, 1.0, size=40)
    w = field.wbar_many(pts, times)
    g = field.grad_wbar_many(pts, times)
    wt = field.dwbar_dt_many(pts, times)
    for i in range(40):
        r = Vec3(*pts[i])
        assert w[i] == pytest.approx(field.wbar(r, times[i]), rel=1e-14)
        assert np.allclose(g[i], field.grad_wbar(r, times[i]).as_array(), rtol=1e-14)
        assert wt[i] == pytest.approx(field.dwbar_dt(r, times[i]), rel=1e-14, abs=1e-16)


def test_wbar_negative_on_domain():
    f = coulomb(eps=0.05, background=-1.0)
    rng = np.random.default_rng(29)
    for _ in range(100):
        r = Vec3(*rng.uniform(-2, 2, size=3))
        assert f.wbar(r, 0.0) < 0.0
