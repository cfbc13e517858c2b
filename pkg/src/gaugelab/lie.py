"""so(n)-valued and SO(n)-valued grid fields and their algebra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import DimensionMismatch
from .grid import Grid

__all__ = [
    "SkewMatrix",
    "SkewPotential",
    "RotationField",
    "RotationReport",
    "GaugeTransform",
    "skew_exp",
    "gauge_transform",
    "random_skew_potential",
    "validate_rotation",
    "skew_basis",
    "identity_rotation",
]


def _pairs(n: int):
    return [(s, t) for s in range(n) for t in range(s + 1, n)]


@dataclass(frozen=True)
class SkewMatrix:
    """A single antisymmetric matrix stored by its strict upper triangle."""

    n: int
    upper: np.ndarray  # length n(n-1)/2, pairs (s,t) with s<t in lex order

    def __post_init__(self):
        up = np.asarray(self.upper, dtype=np.float64).reshape(-1)
        want = self.n * (self.n - 1) // 2
        if up.size != want:
            raise DimensionMismatch(f"SkewMatrix: {want} upper entries needed, got {up.size}")
        object.__setattr__(self, "upper", up)

    @classmethod
    def from_matrix(cls, M, tol=1e-12) -> "SkewMatrix":
        M = np.asarray(M, dtype=np.float64)
        n = M.shape[0]
        if M.shape != (n, n):
            raise DimensionMismatch("SkewMatrix.from_matrix: square matrix required")
        scale = max(1.0, float(np.abs(M).max()))
        if np.abs(M + M.T).max() > tol * scale:
            raise ValueError("matrix is not antisymmetric within tolerance")
        return cls(n, np.array([M[s, t] for s, t in _pairs(n)]))

    @property
    def matrix(self) -> np.ndarray:
        Z = np.zeros((self.n, self.n))
        for idx, (s, t) in enumerate(_pairs(self.n)):
            Z[s, t] = self.upper[idx]
            Z[t, s] = -self.upper[idx]
        return Z


def skew_basis(n: int):
    """Basis alpha^{st} = e_s e_t^T - e_t e_s^T, (s, t) lex ordered."""
    out = []
    for s, t in _pairs(n):
        up = np.zeros(n * (n - 1) // 2)
        up[_pairs(n).index((s, t))] = 1.0
        out.append(SkewMatrix(n, up))
    return out


@dataclass(frozen=True)
class SkewPotential:
    """so(n)-valued 2-vector field; antisymmetry is exact at the bit level."""

    grid: Grid
    n: int
    data: np.ndarray  # (N, N, n, n, 2)

    def __post_init__(self):
        N = self.grid.n_cells
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.shape != (N, N, self.n, self.n, 2):
            raise DimensionMismatch(
                f"SkewPotential: expected {(N, N, self.n, self.n, 2)}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("SkewPotential: non-finite entries")
        if not np.array_equal(arr, -np.swapaxes(arr, 2, 3)):
            raise ValueError("SkewPotential: antisymmetry must be exact")
        object.__setattr__(self, "data", arr)

    @classmethod
    def zeros(cls, grid: Grid, n: int) -> "SkewPotential":
        return cls(grid, n, np.zeros((grid.n_cells, grid.n_cells, n, n, 2)))

    @classmethod
    def from_raw(cls, grid: Grid, raw: np.ndarray) -> "SkewPotential":
        """Antisymmetrize (X - X^T)/2 over the matrix axes; exact in IEEE."""
        raw = np.asarray(raw, dtype=np.float64)
        n = raw.shape[2]
        # (a - b)/2 and -(b - a)/2 are bitwise equal in IEEE, so one pass is exact
        skew = 0.5 * (raw - np.swapaxes(raw, 2, 3))
        return cls(grid, n, skew)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.data**2) * self.grid.h**2))

    def pointwise_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.data**2, axis=(2, 3, 4)))


@dataclass(frozen=True)
class RotationField:
    grid: Grid
    n: int
    data: np.ndarray  # (N, N, n, n)

    def __post_init__(self):
        N = self.grid.n_cells
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.shape != (N, N, self.n, self.n):
            raise DimensionMismatch(
                f"RotationField: expected {(N, N, self.n, self.n)}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("RotationField: non-finite entries")
        object.__setattr__(self, "data", arr)


def identity_rotation(grid: Grid, n: int) -> RotationField:
    data = np.zeros((grid.n_cells, grid.n_cells, n, n))
    data[...] = np.eye(n)
    return RotationField(grid, n, data)


@dataclass(frozen=True)
class RotationReport:
    max_orthogonality_defect: float
    min_det: float
    ok: bool


def validate_rotation(P: RotationField, tol: float = 1e-8) -> RotationReport:
    """Max over cells of ||P^T P - I||_F and min det; flags failure."""
    PtP = np.einsum("xyji,xyjk->xyik", P.data, P.data, optimize=True)
    PtP = PtP - np.eye(P.n)
    defect = float(np.sqrt(np.sum(PtP**2, axis=(2, 3))).max())
    dets = np.linalg.det(P.data)
    min_det = float(dets.min())
    return RotationReport(defect, min_det, defect <= tol and min_det > 0.0)


def reproject_rotation(P: RotationField) -> RotationField:
    """Nearest rotation per cell via polar decomposition (SVD)."""
    U, _, Vt = np.linalg.svd(P.data)
    R = np.matmul(U, Vt)
    # flip the last column where det < 0 to land in SO(n)
    d = np.linalg.det(R)
    flip = d < 0
    if np.any(flip):
        U = U.copy()
        U[flip, :, -1] *= -1.0
        R = np.matmul(U, Vt)
    return RotationField(P.grid, P.n, R)


def skew_exp(Z, tau: float = 1.0):
    """exp(tau Z) for a SkewMatrix (returns a matrix) or a skew array field."""
    if isinstance(Z, SkewMatrix):
        return K.so_exp(Z.matrix, tau)
    return K.so_exp(np.asarray(Z, dtype=np.float64), tau)


@dataclass(frozen=True)
class GaugeTransform:
    omega: SkewPotential
    sym_defect: float  # L2 norm of the discarded symmetric part of P^T D P


def _check_compat(P: RotationField, Om: SkewPotential):
    if P.grid != Om.grid or P.n != Om.n:
        raise DimensionMismatch("rotation field and potential disagree in grid or n")


def gauge_transform(P: RotationField, Om: SkewPotential) -> GaugeTransform:
    """Omega^P = skew(P^T D P) - P^T Omega P, with the symmetric remainder
    of the discrete product rule recorded as a diagnostic."""
    _check_compat(P, Om)
    A, S, _ = K.gauge_fields(P.data, Om.data, P.grid.h)
    omega = SkewPotential.from_raw(P.grid, A)
    sym_defect = float(np.sqrt(np.sum(S**2) * P.grid.h**2))
    return GaugeTransform(omega, sym_defect)


_MODES = 7  # wave numbers 0..6 per axis


def random_skew_potential(n: int, grid: Grid, amplitude: float, smoothness: int,
                          seed: int) -> SkewPotential:
    """Band-limited random potential, deterministic in seed.

    Each independent component (pair (s,t), direction d) is a trigonometric
    polynomial with wave numbers up to 6 per axis and coefficient weights
    (1 + k^2 + l^2)^(-(smoothness+1)/2); the whole field is scaled so that
    its L2 norm equals `amplitude` on this grid.  The spectral cutoff keeps
    the field resolution-coherent: sampling the same seed on a finer grid
    refines the same underlying function.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if smoothness < 0:
        raise ValueError("smoothness must be >= 0")
    N = grid.n_cells
    data = np.zeros((N, N, n, n, 2))
    if amplitude == 0.0:
        return SkewPotential(grid, n, data)
    rng = np.random.default_rng(seed)
    c = grid.axis_centers()
    ks = np.arange(_MODES)
    C = np.cos(2.0 * np.pi * np.outer(ks, c))  # (K, N)
    S = np.sin(2.0 * np.pi * np.outer(ks, c))
    kk, ll = np.meshgrid(ks, ks, indexing="ij")
    w = (1.0 + kk**2 + ll**2) ** (-(smoothness + 1) / 2.0)
    for s, t in _pairs(n):
        for d in range(2):
            coef = rng.standard_normal((4, _MODES, _MODES)) * w
            f = (np.einsum("kl,kx,ly->xy", coef[0], C, C)
                 + np.einsum("kl,kx,ly->xy", coef[1], S, S)
                 + np.einsum("kl,kx,ly->xy", coef[2], C, S)
                 + np.einsum("kl,kx,ly->xy", coef[3], S, C))
            data[:, :, s, t, d] = f
            data[:, :, t, s, d] = -f
    nrm = np.sqrt(np.sum(data**2) * grid.h**2)
    data *= amplitude / nrm
    return SkewPotential(grid, n, data)
