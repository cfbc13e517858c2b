"""Manufactured problem instances.

Harmonic maps from the square into S^2 are the one family with closed-form
ground truth for the whole machinery: u solves Delta u = Omega . grad u with
the skew potential Omega_ik = u^k grad u^i - u^i grad u^k, and a dilation of
the generator shrinks the localized energy to any requested level.  The
module also evaluates the conformally invariant functional

    F(v) = integral g_ij(v) grad v^i . grad v^j + b_ij(v) grad v^i . perp_grad v^j

and the weak residual of its Euler-Lagrange system; the residual is the
exact first variation of F, which the tests verify by central differences.

The perpendicular gradient in F and its Euler-Lagrange system is oriented so
that grad v^i . perp_grad v^j is the Jacobian det(grad v^i, grad v^j); for
v = (x, y) and constant b the cross term integrates to 2 b_12 |D|.  That is
the opposite rotation from grid.perp_grad, so these modules negate it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch
from .frames import MetricData
from .grid import Grid, ScalarField, grad, perp_grad
from .lie import SkewPotential
from .testfuncs import bump_basis

__all__ = [
    "ProblemInstance",
    "harmonic_map_s2",
    "problem_residual",
    "dirichlet_energy",
    "gruter_functional",
    "el_residual",
]


@dataclass(frozen=True)
class ProblemInstance:
    u: tuple                  # ScalarField components
    omega: SkewPotential
    metadata: dict

    @property
    def grid(self) -> Grid:
        return self.u[0].grid

    @property
    def n(self) -> int:
        return self.omega.n


def harmonic_map_s2(degree: int, grid: Grid, scale: float = 1.0,
                    center=(0.5, 0.5)) -> ProblemInstance:
    """Inverse stereographic projection of w(z) = ((z - z0)/scale)^degree.

    The image lies on S^2 up to roundoff; growing scale dilates the map so
    its energy over the square drops like scale^(-2 degree).  Cell centers
    never hit a pole of the projection (w is finite everywhere).
    """
    if degree not in (1, 2, 3):
        raise ValueError(f"degree must be 1, 2 or 3, got {degree}")
    if scale <= 0:
        raise ValueError("scale must be positive")
    X, Y = grid.centers()
    w = ((X - center[0]) + 1j * (Y - center[1])) / scale
    w = w ** degree
    denom = np.abs(w) ** 2 + 1.0
    u1 = 2.0 * w.real / denom
    u2 = 2.0 * w.imag / denom
    u3 = (np.abs(w) ** 2 - 1.0) / denom
    u = tuple(ScalarField(grid, c) for c in (u1, u2, u3))

    U = np.stack([c.data for c in u], axis=-1)                  # (N, N, 3)
    GU = np.stack([grad(c).data for c in u], axis=2)            # (N, N, 3, 2)
    T = np.einsum("xyk,xyid->xyikd", U, GU, optimize=True)
    raw = T - np.swapaxes(T, 2, 3)  # bitwise antisymmetric: same products, swapped
    omega = SkewPotential(grid, 3, raw)

    meta = {
        "generator": "harmonic_map_s2",
        "degree": int(degree),
        "scale": float(scale),
        "center": [float(center[0]), float(center[1])],
        "expected_order": 2.0,
    }
    return ProblemInstance(u, omega, meta)


def problem_residual(problem: ProblemInstance) -> float:
    """Max weak residual of Delta u^i = Omega_ik . grad u^k over the bump family.

    For each L2-normalized bump phi and component i this is
    | sum [ -grad u^i . grad phi - (Omega_ik . grad u^k) phi ] h^2 |.
    """
    grid = problem.grid
    h2 = grid.h ** 2
    GU = np.stack([grad(c).data for c in problem.u], axis=2)
    lower = np.einsum("xyikd,xykd->xyi", problem.omega.data, GU, optimize=True)
    worst = 0.0
    for phi in bump_basis(grid):
        gphi = grad(phi).data
        flux = np.einsum("xyid,xyd->xyi", GU, gphi, optimize=True)
        R = np.sum(-flux - lower * phi.data[..., None], axis=(0, 1)) * h2
        worst = max(worst, float(np.max(np.abs(R))))
    return worst


def dirichlet_energy(u: Sequence[ScalarField]) -> float:
    grid = u[0].grid
    total = sum(float(np.sum(grad(c).data ** 2)) for c in u)
    return total * grid.h ** 2


def _values_at(metric: MetricData, fn_name: str, v: Sequence[ScalarField]) -> np.ndarray:
    grid = v[0].grid
    N = grid.n_cells
    n = metric.n
    pts = np.stack([c.data for c in v], axis=-1).reshape(-1, n)
    fn = getattr(metric, fn_name)
    out = np.empty((pts.shape[0], n, n))
    for idx in range(pts.shape[0]):
        out[idx] = fn(pts[idx])
    return out.reshape(N, N, n, n)


def _values_deriv(metric: MetricData, fn_name: str, v: Sequence[ScalarField]) -> np.ndarray:
    grid = v[0].grid
    N = grid.n_cells
    n = metric.n
    pts = np.stack([c.data for c in v], axis=-1).reshape(-1, n)
    fn = getattr(metric, fn_name)
    out = np.empty((pts.shape[0], n, n, n))
    for idx in range(pts.shape[0]):
        out[idx] = fn(pts[idx])
    return out.reshape(N, N, n, n, n)


def _check_fields(metric: MetricData, v: Sequence[ScalarField]):
    if len(v) != metric.n:
        raise DimensionMismatch(f"expected {metric.n} components, got {len(v)}")
    grid = v[0].grid
    if any(c.grid != grid for c in v):
        raise DimensionMismatch("components on different grids")


def gruter_functional(metric: MetricData, v: Sequence[ScalarField]) -> float:
    """Midpoint quadrature of F(v); collapses to the Dirichlet energy at g = I."""
    _check_fields(metric, v)
    grid = v[0].grid
    Gv = _values_at(metric, "g_at", v)
    Bv = _values_at(metric, "b_at", v)
    GR = np.stack([grad(c).data for c in v], axis=2)
    val = float(np.einsum("xyij,xyid,xyjd->", Gv, GR, GR, optimize=True))
    if np.any(Bv):
        PG = np.stack([-perp_grad(c).data for c in v], axis=2)  # det orientation
        val += float(np.einsum("xyij,xyid,xyjd->", Bv, GR, PG, optimize=True))
    return val * grid.h ** 2


def el_residual(metric: MetricData, v: Sequence[ScalarField]) -> float:
    """Max weak residual of the Euler-Lagrange system of F over the bump family.

    Per component j and bump phi:
      sum [ 2 g_jk(v) grad v^k . grad phi + (d_j g_kl)(v) grad v^k . grad v^l phi
            + 2 b_jk(v) perp_grad v^k . grad phi
            + (d_j b_kl)(v) grad v^k . perp_grad v^l phi ] h^2,
    which is exactly the directional derivative of gruter_functional along
    phi in the j-th component (up to the grid's O(h^2) summation by parts).
    """
    _check_fields(metric, v)
    grid = v[0].grid
    h2 = grid.h ** 2
    Gv = _values_at(metric, "g_at", v)
    Bv = _values_at(metric, "b_at", v)
    dGv = _values_deriv(metric, "dg_at", v)
    GR = np.stack([grad(c).data for c in v], axis=2)
    PG = np.stack([-perp_grad(c).data for c in v], axis=2)  # det orientation

    flux_vec = 2.0 * np.einsum("xyjk,xykd->xyjd", Gv, GR, optimize=True)
    zero = np.einsum("xyjkl,xykd,xyld->xyj", dGv, GR, GR, optimize=True)
    if np.any(Bv):
        flux_vec += 2.0 * np.einsum("xyjk,xykd->xyjd", Bv, PG, optimize=True)
        dBv = _values_deriv(metric, "db_at", v)
        zero += np.einsum("xyjkl,xykd,xyld->xyj", dBv, GR, PG, optimize=True)

    worst = 0.0
    for phi in bump_basis(grid):
        gphi = grad(phi).data
        R = np.sum(np.einsum("xyjd,xyd->xyj", flux_vec, gphi, optimize=True)
                   + zero * phi.data[..., None], axis=(0, 1)) * h2
        worst = max(worst, float(np.max(np.abs(R))))
    return worst
