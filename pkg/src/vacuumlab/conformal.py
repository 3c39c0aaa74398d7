"""Conformal world-surface equation: residual evaluation and elliptic solve.

In conformal variables (sigma, s) the world-surface map xi = (r, tau)
into Euclidean 4-space satisfies the linear second-order equation

    d/ds (wbar xi_s) + d/dsigma (wbar xi_sigma) = (xi_sigma^2 xi_s^2)^(1/2) grad_xi(wbar)

which is elliptic (the induced metric is Euclidean), so it is treated as
a boundary-value problem: Dirichlet data on all four patch edges,
relaxed by checkerboard sweeps.  The right-hand side is the full
4-gradient of the potential with respect to xi, the form the least-action
derivation produces; the potential is evaluated with the patch's tau
slot as its time argument (static potentials are unaffected).

Gauge identities <xi_sigma, xi_s> = 0 and xi_sigma^2 = xi_s^2 are a
property of the data, not enforced by the solver; pass gauge_tol to have
them checked (GaugeViolationError) and use gauge_defects for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import GaugeViolationError, ValidationError
from .integrate import RelaxationResult, relax_elliptic
from .potentials import PotentialField


@dataclass
class ConformalPatch:
    """xi(sigma_i, s_j) in E^4 on a uniform 2-D grid; components (x, y, z, tau)."""

    sigma: np.ndarray
    s: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        if self.xi.shape != (self.sigma.size, self.s.size, 4):
            raise ValidationError("xi must have shape (n_sigma, n_s, 4)")
        for axis in (self.sigma, self.s):
            d = np.diff(axis)
            if axis.size < 3 or np.any(d <= 0):
                raise ValidationError("patch axes must be increasing with >= 3 nodes")
            if np.max(np.abs(d - d[0])) > 1e-12 * max(1.0, abs(float(d[0]))):
                raise ValidationError("patch axes must be uniform")

    @property
    def h_sigma(self) -> float:
        return float(self.sigma[1] - self.sigma[0])

    @property
    def h_s(self) -> float:
        return float(self.s[1] - self.s[0])

    def copy_with(self, xi: np.ndarray) -> "ConformalPatch":
        return ConformalPatch(self.sigma, self.s, np.array(xi, dtype=float))

    def gauge_defects(self) -> Tuple[np.ndarray, np.ndarray]:
        """Interior grids of <xi', xi_dot> and xi'^2 - xi_dot^2 (central diffs)."""
        d_sig = (self.xi[2:, 1:-1, :] - self.xi[:-2, 1:-1, :]) / (2.0 * self.h_sigma)
        d_s = (self.xi[1:-1, 2:, :] - self.xi[1:-1, :-2, :]) / (2.0 * self.h_s)
        inner = np.einsum("ijk,ijk->ij", d_sig, d_s)
        norms = np.einsum("ijk,ijk->ij", d_sig, d_sig) - np.einsum(
            "ijk,ijk->ij", d_s, d_s
        )
        return inner, norms

    def max_gauge_defect(self) -> float:
        inner, norms = self.gauge_defects()
        return float(max(np.max(np.abs(inner)), np.max(np.abs(norms))))


def make_patch(sigma: np.ndarray, s: np.ndarray, fn: Callable[[float, float], np.ndarray]) -> ConformalPatch:
    """Sample xi(sigma, s) from a callable returning a length-4 array."""
    sigma = np.asarray(sigma, dtype=float)
    s = np.asarray(s, dtype=float)
    xi = np.empty((sigma.size, s.size, 4))
    for i, sg in enumerate(sigma):
        for j, ss in enumerate(s):
            xi[i, j, :] = fn(float(sg), float(ss))
    return ConformalPatch(sigma, s, xi)


def _wbar_grid(xi: np.ndarray, field: PotentialField) -> np.ndarray:
    pts = xi[..., 0:3].reshape(-1, 3)
    times = xi[..., 3].reshape(-1)
    return field.wbar_many(pts, times).reshape(xi.shape[:2])


def _wbar_grad4(xi: np.ndarray, field: PotentialField) -> np.ndarray:
    pts = xi[..., 0:3].reshape(-1, 3)
    times = xi[..., 3].reshape(-1)
    g3 = field.grad_wbar_many(pts, times)
    gt = field.dwbar_dt_many(pts, times)
    out = np.concatenate([g3, gt[:, None]], axis=1)
    return out.reshape(xi.shape[:2] + (4,))


def residual_grid(xi: np.ndarray, h_sigma: float, h_s: float, field: PotentialField) -> np.ndarray:
    """Central-difference residual of the conformal equation at interior nodes."""
    w = _wbar_grid(xi, field)
    grad4 = _wbar_grad4(xi, field)[1:-1, 1:-1, :]

    mid = xi[1:-1, 1:-1, :]
    xi_ss = (xi[1:-1, 2:, :] - 2.0 * mid + xi[1:-1, :-2, :]) / (h_s * h_s)
    xi_gg = (xi[2:, 1:-1, :] - 2.0 * mid + xi[:-2, 1:-1, :]) / (h_sigma * h_sigma)
    xi_s = (xi[1:-1, 2:, :] - xi[1:-1, :-2, :]) / (2.0 * h_s)
    xi_g = (xi[2:, 1:-1, :] - xi[:-2, 1:-1, :]) / (2.0 * h_sigma)
    w_s = (w[1:-1, 2:] - w[1:-1, :-2]) / (2.0 * h_s)
    w_g = (w[2:, 1:-1] - w[:-2, 1:-1]) / (2.0 * h_sigma)
    w_mid = w[1:-1, 1:-1]

    measure = np.sqrt(
        np.einsum("ijk,ijk->ij", xi_g, xi_g) * np.einsum("ijk,ijk->ij", xi_s, xi_s)
    )
    return (
        w_mid[..., None] * (xi_ss + xi_gg)
        + w_s[..., None] * xi_s
        + w_g[..., None] * xi_g
        - measure[..., None] * grad4
    )


def conformal_residual(
    patch: ConformalPatch, w: PotentialField, gauge_tol: Optional[float] = None
) -> np.ndarray:
    """Residual 4-vectors at interior nodes; optionally enforce the gauge first."""
    if gauge_tol is not None:
        defect = patch.max_gauge_defect()
        if defect > gauge_tol:
            raise GaugeViolationError(
                f"gauge defect {defect:.3g} exceeds tolerance {gauge_tol:.3g}"
            )
    return residual_grid(patch.xi, patch.h_sigma, patch.h_s, w)


def coons_interior(patch: ConformalPatch) -> np.ndarray:
    """Transfinite (Coons) interpolation of the boundary into the interior."""
    xi = np.array(patch.xi, dtype=float)
    n1, n2, _ = xi.shape
    u = np.linspace(0.0, 1.0, n1)[:, None, None]
    v = np.linspace(0.0, 1.0, n2)[None, :, None]
    c0 = xi[0, :, :][None, :, :]
    c1 = xi[-1, :, :][None, :, :]
    d0 = xi[:, 0, :][:, None, :]
    d1 = xi[:, -1, :][:, None, :]
    blend = (
        (1 - u) * c0
        + u * c1
        + (1 - v) * d0
        + v * d1
        - (
            (1 - u) * (1 - v) * xi[0, 0, :]
            + u * (1 - v) * xi[-1, 0, :]
            + (1 - u) * v * xi[0, -1, :]
            + u * v * xi[-1, -1, :]
        )
    )
    out = xi
    out[1:-1, 1:-1, :] = blend[1:-1, 1:-1, :]
    return out


def solve_conformal(
    boundary: ConformalPatch,
    w: PotentialField,
    tol: float,
    max_iters: int = 20000,
    omega: Optional[float] = None,
    forcing: Optional[np.ndarray] = None,
    gauge_tol: Optional[float] = None,
) -> Tuple[ConformalPatch, RelaxationResult]:
    """Relax the interior of a patch until max |residual| < tol.

    Only the boundary of `boundary` is honored (the interior is re-seeded
    by transfinite interpolation).  `forcing`, when given, is subtracted
    from the interior residual (manufactured-solution runs).  Raises
    ConvergenceError when the budget is exhausted and GaugeViolationError
    when gauge_tol is set and the solution violates the gauge identities.
    """
    if not np.all(np.isfinite(boundary.xi)):
        raise ValidationError("boundary data contains non-finite values")
    xi0 = coons_interior(boundary)
    h_sigma, h_s = boundary.h_sigma, boundary.h_s

    if forcing is not None:
        forcing = np.asarray(forcing, dtype=float)
        expected = (boundary.sigma.size - 2, boundary.s.size - 2, 4)
        if forcing.shape != expected:
            raise ValidationError(f"forcing must have shape {expected}")

        def residual_fn(xi):
            return residual_grid(xi, h_sigma, h_s, w) - forcing

    else:

        def residual_fn(xi):
            return residual_grid(xi, h_sigma, h_s, w)

    result = relax_elliptic(residual_fn, xi0, tol, max_iters=max_iters, omega=omega)
    solved = boundary.copy_with(result.xi)
    if gauge_tol is not None:
        defect = solved.max_gauge_defect()
        if defect > gauge_tol:
            raise GaugeViolationError(
                f"solved patch gauge defect {defect:.3g} exceeds {gauge_tol:.3g}"
            )
    return solved, result
