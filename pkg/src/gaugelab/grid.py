"""Discrete calculus on a cell-centered grid over the unit square.

Cells are indexed (i, j) with centers ((i + 1/2) h, (j + 1/2) h), h = 1/N.
Derivatives are second-order central in the interior with one-sided
second-order stencils on the boundary ring, so they are exact on quadratics
everywhere.  The Dirichlet Laplacian eliminates a ghost cell through a
quadratic fit against a zero wall value at distance h/2, which keeps the
manufactured-solution convergence at second order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels as K
from .errors import DimensionMismatch, EmptyBall, SolverDiverged


@dataclass(frozen=True)
class Grid:
    """Uniform N x N cell partition of [0,1]^2; spatial dimension is 2."""

    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ValueError(f"n_cells must be an integer >= 4, got {self.n_cells!r}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    def axis_centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.h

    def centers(self):
        """Meshgrid (X, Y) of cell centers, 'ij' indexing."""
        c = self.axis_centers()
        return np.meshgrid(c, c, indexing="ij")


def _coerce(grid: Grid, data, trailing: tuple, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    want = (grid.n_cells, grid.n_cells) + trailing
    if arr.shape != want:
        raise DimensionMismatch(f"{what}: expected shape {want}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: non-finite entries")
    return arr


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _coerce(self.grid, self.data, (), "ScalarField"))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        X, Y = grid.centers()
        return cls(grid, fn(X, Y))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros((grid.n_cells, grid.n_cells)))


@dataclass(frozen=True)
class VecField:
    grid: Grid
    data: np.ndarray  # (N, N, 2)

    def __post_init__(self):
        object.__setattr__(self, "data", _coerce(self.grid, self.data, (2,), "VecField"))

    @classmethod
    def from_components(cls, v1: ScalarField, v2: ScalarField) -> "VecField":
        if v1.grid != v2.grid:
            raise DimensionMismatch("VecField components on different grids")
        return cls(v1.grid, np.stack((v1.data, v2.data), axis=-1))


@dataclass(frozen=True)
class Ball:
    """Closed ball; must meet the unit square."""

    center: tuple
    radius: float

    def __post_init__(self):
        cx, cy = float(self.center[0]), float(self.center[1])
        object.__setattr__(self, "center", (cx, cy))
        object.__setattr__(self, "radius", float(self.radius))
        if not (np.isfinite(cx) and np.isfinite(cy) and np.isfinite(self.radius)):
            raise ValueError("Ball: non-finite center or radius")
        if self.radius <= 0.0:
            raise ValueError("Ball: radius must be positive")
        dx = max(0.0 - cx, 0.0, cx - 1.0)
        dy = max(0.0 - cy, 0.0, cy - 1.0)
        if dx * dx + dy * dy > self.radius * self.radius:
            raise ValueError("Ball: does not intersect the unit square")


def ball_mask(grid: Grid, ball: Ball) -> np.ndarray:
    """Boolean mask of cells whose center lies in the closed ball."""
    X, Y = grid.centers()
    r2 = (X - ball.center[0]) ** 2 + (Y - ball.center[1]) ** 2
    mask = r2 <= ball.radius * ball.radius + 1e-14
    if not mask.any():
        raise EmptyBall(f"no cell center inside ball r={ball.radius} at {ball.center}")
    return mask


# ---------------------------------------------------------------------------
# first-order operators

def grad(f: ScalarField) -> VecField:
    h = f.grid.h
    g = np.stack((K.diff(f.data, 0, h), K.diff(f.data, 1, h)), axis=-1)
    return VecField(f.grid, g)


def perp_grad(f: ScalarField) -> VecField:
    h = f.grid.h
    g = np.stack((-K.diff(f.data, 1, h), K.diff(f.data, 0, h)), axis=-1)
    return VecField(f.grid, g)


def div(V: VecField) -> ScalarField:
    h = V.grid.h
    d = K.diff(V.data[..., 0], 0, h) + K.diff(V.data[..., 1], 1, h)
    return ScalarField(V.grid, d)


def curl(V: VecField) -> ScalarField:
    """Scalar curl in 2-D: d1 V2 - d2 V1."""
    h = V.grid.h
    c = K.diff(V.data[..., 1], 0, h) - K.diff(V.data[..., 0], 1, h)
    return ScalarField(V.grid, c)


# ---------------------------------------------------------------------------
# norms and quadrature

def pointwise_norm(data: np.ndarray) -> np.ndarray:
    """Euclidean/Frobenius magnitude per cell over all trailing axes."""
    d = np.asarray(data)
    if d.ndim == 2:
        return np.abs(d)
    return np.sqrt(np.sum(d * d, axis=tuple(range(2, d.ndim))))


def l2_norm(field) -> float:
    """sqrt(sum |f|^2 h^2) for a field object or a raw (N, N, ...) array + grid."""
    data, grid = _field_data(field)
    return float(np.sqrt(np.sum(data * data) * grid.h ** 2))


def _field_data(field):
    if isinstance(field, (ScalarField, VecField)):
        return field.data, field.grid
    raise TypeError("expected ScalarField or VecField")


def lp_norm_on_ball(f, p: float, ball: Ball) -> float:
    """Midpoint quadrature of the p-th power mass: sum_{c in B} |f(c)|^p h^2.

    Returns the raw integral (no root, no radius weight); f may be a
    ScalarField, a VecField, or a list of fields treated as one stacked field.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    mag, grid = field_magnitude(f)
    mask = ball_mask(grid, ball)
    return float(np.sum(mag[mask] ** p) * grid.h ** 2)


def field_magnitude(f):
    """(|f| per cell, grid) for scalar/vector fields or sequences of them."""
    if isinstance(f, (list, tuple)):
        grids = {x.grid for x in f}
        if len(grids) != 1:
            raise DimensionMismatch("fields on different grids")
        grid = grids.pop()
        sq = sum(pointwise_norm(x.data) ** 2 for x in f)
        return np.sqrt(sq), grid
    data, grid = _field_data(f)
    return pointwise_norm(data), grid


# ---------------------------------------------------------------------------
# sparse stencil matrices and solvers

@lru_cache(maxsize=None)
def diff_matrix(N: int) -> sp.csr_matrix:
    """1-D derivative matrix matching the kernel stencil exactly (h = 1/N)."""
    h = 1.0 / N
    D = sp.lil_matrix((N, N))
    for i in range(1, N - 1):
        D[i, i - 1] = -1.0
        D[i, i + 1] = 1.0
    D[0, 0], D[0, 1], D[0, 2] = -3.0, 4.0, -1.0
    D[N - 1, N - 1], D[N - 1, N - 2], D[N - 1, N - 3] = 3.0, -4.0, 1.0
    return sp.csr_matrix(D / (2.0 * h))


@lru_cache(maxsize=None)
def _dirichlet_laplacian(N: int) -> sp.csr_matrix:
    """5-point Laplacian with wall values eliminated by a quadratic ghost fit.

    The wall lies half a cell outside the first center; the ghost value for a
    zero wall trace is g = -2 f0 + f1 / 3, which folds into the first row as
    diagonal -4 and neighbor 4/3 (all times 1/h^2).
    """
    h2 = (1.0 / N) ** 2
    main = np.full(N, -2.0)
    off = np.ones(N - 1)
    L1 = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    L1[0, 0] = -4.0
    L1[0, 1] = 4.0 / 3.0
    L1[N - 1, N - 1] = -4.0
    L1[N - 1, N - 2] = 4.0 / 3.0
    L1 = sp.csr_matrix(L1 / h2)
    I = sp.identity(N, format="csr")
    return (sp.kron(L1, I) + sp.kron(I, L1)).tocsr()


@lru_cache(maxsize=None)
def _dirichlet_factor(N: int):
    return spla.splu(_dirichlet_laplacian(N).tocsc())


def poisson_dirichlet(rhs: ScalarField) -> ScalarField:
    """Solve (discrete Laplacian) u = rhs with zero wall trace.

    Sparse LU direct solve; the residual check guards against a silently bad
    factorization rather than iteration stagnation.
    """
    N = rhs.grid.n_cells
    b = rhs.data.reshape(-1)
    u = _dirichlet_factor(N).solve(b)
    if not np.all(np.isfinite(u)):
        raise SolverDiverged("poisson_dirichlet: non-finite solution")
    resid = _dirichlet_laplacian(N) @ u - b
    scale = np.linalg.norm(b)
    if scale > 0 and np.linalg.norm(resid) > 1e-10 * scale:
        raise SolverDiverged("poisson_dirichlet: residual above 1e-10 relative")
    return ScalarField(rhs.grid, u.reshape(N, N))


def laplacian_dirichlet(f: ScalarField) -> ScalarField:
    """The exact operator inverted by poisson_dirichlet (for inverse tests)."""
    N = f.grid.n_cells
    out = _dirichlet_laplacian(N) @ f.data.reshape(-1)
    return ScalarField(f.grid, out.reshape(N, N))


@lru_cache(maxsize=None)
def _neumann_factor(N: int):
    """Mean-pinned factorization of L = D1^T D1 + D2^T D2 (wide stencil).

    L annihilates constants; the augmented system [[L, 1], [1^T, 0]] picks the
    mean-zero solution.  Used by the gauge preconditioner and the abelian
    oracle initializer.
    """
    D = diff_matrix(N)
    DtD = (D.T @ D).tocsr()
    I = sp.identity(N, format="csr")
    L = sp.kron(DtD, I) + sp.kron(I, DtD)
    ones = np.ones((N * N, 1))
    A = sp.bmat([[L, ones], [ones.T, None]], format="csc")
    return spla.splu(A)

def neumann_solve(grid: Grid, rhs: np.ndarray) -> np.ndarray:
    """Mean-zero solution of the wide-stencil Neumann Laplacian, rhs (N, N)."""
    N = grid.n_cells
    b = np.concatenate([rhs.reshape(-1), [0.0]])
    x = _neumann_factor(N).solve(b)
    if not np.all(np.isfinite(x)):
        raise SolverDiverged("neumann_solve: non-finite solution")
    return x[:-1].reshape(N, N)


def interior_mask(grid: Grid, margin: int) -> np.ndarray:
    m = np.zeros((grid.n_cells, grid.n_cells), dtype=bool)
    m[margin:-margin or None, margin:-margin or None] = True
    return m
