import math

import numpy as np
import pytest

from vacuumlab.conformal import (
    ConformalPatch,
    conformal_residual,
    make_patch,
    solve_conformal,
)
from vacuumlab.conformal_cases import harmonic_case, manufactured_case
from vacuumlab.errors import ConvergenceError, GaugeViolationError, ValidationError
from vacuumlab.potentials import UniformField


def test_residual_harmonic_polynomial_is_tiny():
    case = harmonic_case(17, 17, wbar=-1.5)
    res = conformal_residual(case.exact, case.field)
    # polynomial harmonics are exact for the 5-point stencil
    assert np.max(np.abs(res)) < 1e-12


def test_residual_sigma_squared_patch():
    wbar = -1.3
    sigma = np.linspace(0.0, 1.0, 17)
    s = np.linspace(0.0, 1.0, 17)
    patch = make_patch(sigma, s, lambda sg, ss: np.array([sg**2, 0.0, 0.0, ss]))
    res = conformal_residual(patch, UniformField(wbar))
    norms = np.sqrt(np.einsum("ijk,ijk->ij", res, res))
    assert np.allclose(norms, 2.0 * abs(wbar), atol=1e-10)


def test_residual_manufactured_matches_forcing():
    # the exact surface's discrete residual approaches the analytic forcing
    errs = []
    for n in (17, 33):
        case = manufactured_case(n, n)
        res = conformal_residual(case.exact, case.field)
        errs.append(float(np.max(np.abs(res - case.forcing))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.4)


def test_gauge_defects_and_violation():
    case = harmonic_case(17, 17)
    assert case.exact.max_gauge_defect() < 1e-12
    sigma = np.linspace(0.0, 1.0, 17)
    patch = make_patch(sigma, sigma, lambda sg, ss: np.array([sg**2, 0.0, 0.0, ss]))
    assert patch.max_gauge_defect() > 1.0
    with pytest.raises(GaugeViolationError):
        conformal_residual(patch, UniformField(-1.0), gauge_tol=1e-8)


def test_solve_laplace_polynomial_boundary():
    case = harmonic_case(17, 17)
    start = case.boundary.copy_with(case.boundary.xi)
    start.xi[1:-1, 1:-1, :] = 0.0  # interior is ignored; boundary drives the solve
    solved, result = solve_conformal(start, case.field, tol=1e-10, gauge_tol=1e-8)
    assert np.max(np.abs(solved.xi - case.exact.xi)) < 1e-8
    assert solved.max_gauge_defect() < 1e-8
    assert result.final_residual < 1e-10


def test_solve_laplace_transcendental_second_order():
    errs = []
    for n in (17, 33):
        case = harmonic_case(n, n, kind="exp")
        solved, _ = solve_conformal(case.boundary, case.field, tol=1e-11)
        errs.append(float(np.max(np.abs(solved.xi - case.exact.xi))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.4)


def test_solve_manufactured_convergence_order():
    errs, hs = [], []
    for n in (17, 33):
        case = manufactured_case(n, n)
        solved, _ = solve_conformal(
            case.boundary, case.field, tol=1e-11, forcing=case.forcing
        )
        errs.append(float(np.max(np.abs(solved.xi - case.exact.xi))))
        hs.append(1.0 / (n - 1))
    order = math.log(errs[0] / errs[1]) / math.log(hs[0] / hs[1])
    assert order == pytest.approx(2.0, abs=0.2)


def test_solver_tolerance_contract():
    case = harmonic_case(17, 17, kind="exp")
    _, loose = solve_conformal(case.boundary, case.field, tol=1e-6)
    _, tight = solve_conformal(case.boundary, case.field, tol=1e-9)
    assert loose.final_residual < 1e-6
    assert tight.final_residual < 1e-9
    assert tight.iterations >= loose.iterations


def test_solver_rejects_bad_input():
    case = harmonic_case(9, 9)
    bad = case.boundary.copy_with(case.boundary.xi)
    bad.xi[0, 3, 1] = float("nan")
    with pytest.raises(ValidationError):
        solve_conformal(bad, case.field, tol=1e-8)
    with pytest.raises(ConvergenceError) as err:
        solve_conformal(case.boundary, harmonic_case(9, 9, kind="exp").field, tol=1e-30, max_iters=3)
    assert err.value.residual_history


def test_patch_validation():
    with pytest.raises(ValidationError):
        ConformalPatch(np.linspace(0, 1, 5), np.linspace(0, 1, 5), np.zeros((5, 4, 4)))
    with pytest.raises(ValidationError):
        ConformalPatch(np.array([0.0, 0.2, 0.3]), np.linspace(0, 1, 3), np.zeros((3, 3, 4)))
