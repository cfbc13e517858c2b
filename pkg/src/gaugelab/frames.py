"""Metric frames and the transformed divergence-form system.

Given metric data (g, b) on the target space, build a frame e_i with
<e_i, e_j> = g_ij by pointwise triangular factorization, compute Christoffel
symbols, and assemble the antisymmetric coefficient fields of the
divergence-form rewrite

    div(A_ik grad u^k) = Omega~_ik . (A grad u)^k + perp_grad(b_ik o u) . grad u^k

of the Euler-Lagrange system

    -div(2 g_ik(u) grad u^k) + (d_i g_kl)(u) grad u^k . grad u^l
        = Omega_ik . grad u^k + perp_grad(b_ik o u) . grad u^k.

The frame need not be curl-free; the commutator defect
C^a_ik = d_i e^a_k - d_k e^a_i is antisymmetric in (i, k) and is absorbed
into an so(n)-valued coefficient omega instead of being integrated away.

Index conventions used throughout:
  E[a, i]   = e_i^a            (columns of E are the frame vectors)
  W[k, b]   = g^{ks} e_s^b     (the inverse of E, since E^T E = g)
  xi[a, :]  = sum_k E[a, k](u) grad u^k        (the rotated gradient rows)
  omega[b, c] = sum_{aik} C^a_ik(u) xi^a W[k, b] W[i, c]    (2-vector each)
  omega_tilde[a, c] = sum_{ik} Omega_ik W[k, c] W[i, a]     (2-vector each)

omega_tilde is stored with the equation-row index first, so the Euclidean
frame (g = I) returns omega_tilde equal to the input potential exactly; the
contraction in the weak residual transposes it back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite
from .grid import Grid, ScalarField, grad, perp_grad
from .lie import SkewPotential
from .testfuncs import bump_basis

__all__ = [
    "MetricData",
    "FrameData",
    "TransformedSystem",
    "build_frame",
    "christoffel",
    "assemble_transformed_system",
    "transformed_residual",
    "builtin_metric",
]


@dataclass(frozen=True)
class MetricData:
    """Callable metric pair on the target space R^n.

    g(x) must be symmetric positive definite, b(x) exactly antisymmetric.
    dg/db return the stacked coordinate derivatives with the derivative
    index leading: dg(x)[d, i, j] = d_d g_ij(x).  When absent they are
    replaced by central differences with relative step fd_step.
    """

    n: int
    g: Callable
    b: Callable
    dg: Optional[Callable] = None
    db: Optional[Callable] = None
    fd_step: float = 1e-5
    name: str = "custom"

    def g_at(self, x: np.ndarray) -> np.ndarray:
        G = np.asarray(self.g(np.asarray(x, dtype=np.float64)), dtype=np.float64)
        if G.shape != (self.n, self.n):
            raise DimensionMismatch(f"g(x): expected {(self.n, self.n)}, got {G.shape}")
        if np.max(np.abs(G - G.T)) > 1e-12 * max(1.0, np.max(np.abs(G))):
            raise ValueError("g(x) is not symmetric to 1e-12")
        return G

    def b_at(self, x: np.ndarray) -> np.ndarray:
        B = np.asarray(self.b(np.asarray(x, dtype=np.float64)), dtype=np.float64)
        if B.shape != (self.n, self.n):
            raise DimensionMismatch(f"b(x): expected {(self.n, self.n)}, got {B.shape}")
        if not np.array_equal(B, -B.T):
            raise ValueError("b(x) must be exactly antisymmetric")
        return B

    def dg_at(self, x: np.ndarray) -> np.ndarray:
        if self.dg is not None:
            D = np.asarray(self.dg(np.asarray(x, dtype=np.float64)), dtype=np.float64)
            if D.shape != (self.n, self.n, self.n):
                raise DimensionMismatch(
                    f"dg(x): expected {(self.n,) * 3}, got {D.shape}")
            return D
        return _fd_derivative(self.g, x, self.n, self.fd_step)

    def db_at(self, x: np.ndarray) -> np.ndarray:
        if self.db is not None:
            return np.asarray(self.db(np.asarray(x, dtype=np.float64)), dtype=np.float64)
        return _fd_derivative(self.b, x, self.n, self.fd_step)


def _fd_derivative(fn, x, n: int, step: float) -> np.ndarray:
    """Central differences d_d fn(x), derivative index leading, relative step."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((n, n, n))
    for d in range(n):
        hd = step * max(1.0, abs(float(x[d])))
        xp = x.copy()
        xm = x.copy()
        xp[d] += hd
        xm[d] -= hd
        out[d] = (np.asarray(fn(xp), dtype=np.float64)
                  - np.asarray(fn(xm), dtype=np.float64)) / (2.0 * hd)
    return out


def _chol_batched(G: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{what}: metric not positive definite") from exc


@dataclass(frozen=True)
class FrameData:
    """Frame field derived from a metric: E(x)^T E(x) = g(x).

    E(x) is the transpose of the lower triangular factor of g(x), so the
    frame depends continuously (indeed smoothly) on x wherever g does and is
    the unique choice with positive diagonal.
    """

    metric: MetricData

    def e(self, x) -> np.ndarray:
        L = _chol_batched(self.metric.g_at(x), "frame")
        return L.T.copy()

    def ginv(self, x) -> np.ndarray:
        L = _chol_batched(self.metric.g_at(x), "inverse metric")
        Linv = np.linalg.inv(L)
        return Linv.T @ Linv

    def inverse_frame(self, x) -> np.ndarray:
        """W with W E = I; W[k, b] = g^{ks} e_s^b."""
        return np.linalg.inv(self.e(x))

    def de(self, x) -> np.ndarray:
        """Frame derivatives de[d, a, k] = d_d e_k^a.

        Differentiating L L^T = g gives dL = L Phi(L^{-1} dg L^{-T}) where Phi
        keeps the strict lower triangle and half the diagonal; e_k^a = L[k, a]
        turns that into the stacked array returned here.
        """
        G = self.metric.g_at(x)
        L = _chol_batched(G, "frame derivative")
        dg = self.metric.dg_at(x)
        n = self.metric.n
        Linv = np.linalg.inv(L)
        out = np.empty((n, n, n))
        for d in range(n):
            M = Linv @ dg[d] @ Linv.T
            Phi = np.tril(M, -1) + 0.5 * np.diag(np.diag(M))
            dL = L @ Phi
            out[d] = dL.T  # out[d, a, k] = dL[k, a]
        return out


def build_frame(metric: MetricData) -> FrameData:
    """Frame with <e_i, e_j> = g_ij from the triangular factorization."""
    return FrameData(metric)


def christoffel(metric: MetricData, x) -> np.ndarray:
    """Standard symbols Gamma^i_kl = (1/2) g^{ij}(d_l g_jk + d_k g_jl - d_j g_kl).

    Symmetric in (k, l); vanishes for constant metrics.
    """
    x = np.asarray(x, dtype=np.float64)
    G = metric.g_at(x)
    L = _chol_batched(G, "christoffel")
    Linv = np.linalg.inv(L)
    ginv = Linv.T @ Linv
    dg = metric.dg_at(x)                       # [d, i, j]
    T1 = dg.transpose(1, 2, 0)                 # T1[j, k, l] = d_l g_jk
    T2 = dg.transpose(1, 0, 2)                 # T2[j, k, l] = d_k g_jl
    T3 = dg                                    # T3[j, k, l] = d_j g_kl
    return 0.5 * np.einsum("ij,jkl->ikl", ginv, T1 + T2 - T3, optimize=True)


@dataclass(frozen=True)
class TransformedSystem:
    """Assembled coefficient fields of the divergence-form rewrite."""

    grid: Grid
    A: np.ndarray                 # (N, N, n, n), A[.., a, k] = e_k^a(u)
    W: np.ndarray                 # (N, N, n, n), per-cell inverse of A
    xi: np.ndarray                # (N, N, n, 2),  xi^a = sum_k A[a, k] grad u^k
    omega_tilde: SkewPotential    # conjugated input potential, row index first
    omega: SkewPotential          # frame-commutator coefficient
    inversion_residual: float     # || grad u - g^{.k}(u) e_k(u) xi ||_L2 relative
    presym_defect_omega: float
    presym_defect_omega_tilde: float
    metric: MetricData


def _eval_pointwise(fn, pts: np.ndarray, n: int) -> np.ndarray:
    out = np.empty((pts.shape[0], n, n))
    for idx in range(pts.shape[0]):
        out[idx] = fn(pts[idx])
    return out


def assemble_transformed_system(metric: MetricData, Om: SkewPotential,
                                u: Sequence[ScalarField]) -> TransformedSystem:
    """Coefficients (A, xi, omega_tilde, omega) of the rewrite along u.

    All metric quantities are evaluated at the map values u(x); grid
    derivatives act on the composed fields, target derivatives come from the
    metric data.  Both skew outputs are antisymmetrized exactly after
    assembly and the discarded symmetric parts are reported as L2 defects.
    """
    n = metric.n
    if Om.n != n or len(u) != n:
        raise DimensionMismatch("metric, potential and map disagree in n")
    grid = u[0].grid
    if any(ui.grid != grid for ui in u) or Om.grid != grid:
        raise DimensionMismatch("fields on different grids")
    N = grid.n_cells
    h2 = grid.h ** 2

    pts = np.stack([ui.data for ui in u], axis=-1).reshape(-1, n)
    G = _eval_pointwise(metric.g_at, pts, n)
    L = _chol_batched(G, "assemble")
    E = np.swapaxes(L, 1, 2).copy()            # E[., a, k] = e_k^a
    W = np.linalg.inv(E)

    Linv = np.linalg.inv(L)
    dE = np.empty((pts.shape[0], n, n, n))     # [., d, a, k] = d_d e_k^a
    for idx in range(pts.shape[0]):
        dg = metric.dg_at(pts[idx])
        for d in range(n):
            M = Linv[idx] @ dg[d] @ Linv[idx].T
            Phi = np.tril(M, -1) + 0.5 * np.diag(np.diag(M))
            dE[idx, d] = (L[idx] @ Phi).T
    # C[., a, i, k] = d_i e^a_k - d_k e^a_i; bitwise antisymmetric in (i, k)
    C = np.transpose(dE, (0, 2, 1, 3)) - np.transpose(dE, (0, 2, 3, 1))

    E = E.reshape(N, N, n, n)
    W = W.reshape(N, N, n, n)
    C = C.reshape(N, N, n, n, n)

    gradu = np.stack([grad(ui).data for ui in u], axis=2)   # (N, N, n, 2)
    xi = np.einsum("xyak,xykd->xyad", E, gradu, optimize=True)

    # inversion identity grad u^j = g^{jk}(u) e_k^a(u) xi^a, i.e. W xi
    rec = np.einsum("xyja,xyad->xyjd", W, xi, optimize=True)
    denom = np.sqrt(np.sum(gradu ** 2) * h2)
    inv_res = float(np.sqrt(np.sum((rec - gradu) ** 2) * h2) / denom) if denom > 0 else 0.0

    raw_omega = np.einsum("xyaik,xyad,xykb,xyic->xybcd", C, xi, W, W, optimize=True)
    # equation-row orientation: collapses to the input potential at g = I
    raw_omt = np.einsum("xyikd,xykc,xyia->xyacd", Om.data, W, W, optimize=True)

    def _defect(raw):
        sym = 0.5 * (raw + np.swapaxes(raw, 2, 3))
        return float(np.sqrt(np.sum(sym ** 2) * h2))

    return TransformedSystem(
        grid=grid,
        A=E,
        W=W,
        xi=xi,
        omega_tilde=SkewPotential.from_raw(grid, raw_omt),
        omega=SkewPotential.from_raw(grid, raw_omega),
        inversion_residual=inv_res,
        presym_defect_omega=_defect(raw_omega),
        presym_defect_omega_tilde=_defect(raw_omt),
        metric=metric,
    )


def transformed_residual(system: TransformedSystem, u: Sequence[ScalarField],
                         metric: MetricData | None = None) -> float:
    """Weak residual of the rewritten system against the bump family.

    For each smooth bump phi and component c this accumulates

        sum [ 2 xi^c . grad phi
              + (2 omega[a, c] - omega_tilde[c, a]) . xi^a phi
              - (perp_grad(b_ik o u) . grad u^k) W[i, c] phi ] h^2

    and returns the L2 norm over the (bump, component) family.  For an exact
    solution of the underlying system every entry is O(h^2).
    """
    metric = metric or system.metric
    grid = system.grid
    n = metric.n
    h2 = grid.h ** 2
    N = grid.n_cells

    xi = system.xi
    om = system.omega.data                     # (N, N, n, n, 2)
    omt = system.omega_tilde.data
    # zero-order coefficient contracted against xi, tested with component c
    coef = 2.0 * om - np.swapaxes(omt, 2, 3)
    zero_order = np.einsum("xyacd,xyad->xyc", coef, xi, optimize=True)

    gradu = np.stack([grad(ui).data for ui in u], axis=2)
    pts = np.stack([ui.data for ui in u], axis=-1).reshape(-1, n)
    Bv = _eval_pointwise(metric.b_at, pts, n).reshape(N, N, n, n)
    if np.any(Bv):
        pg = np.empty((N, N, n, n, 2))
        for i in range(n):
            for k in range(n):
                # negated: the b-pairing orientation is the Jacobian determinant
                pg[:, :, i, k, :] = -perp_grad(ScalarField(grid, Bv[:, :, i, k])).data
        bpair = np.einsum("xyikd,xykd->xyi", pg, gradu, optimize=True)
        bterm = np.einsum("xyi,xyic->xyc", bpair, system.W, optimize=True)
    else:
        bterm = np.zeros((N, N, n))

    total = 0.0
    for phi in bump_basis(grid):
        gphi = grad(phi).data
        flux = 2.0 * np.einsum("xycd,xyd->xyc", xi, gphi, optimize=True)
        cellwise = flux + (zero_order - bterm) * phi.data[..., None]
        R = np.sum(cellwise, axis=(0, 1)) * h2
        total += float(np.sum(R ** 2))
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# builtin metric family (CLI-facing)

def _affine(coeffs):
    c = np.asarray(coeffs, dtype=np.float64)

    def f(x):
        return float(c[0] + np.dot(c[1:], x))

    return f, c[1:].copy()


def builtin_metric(name: str, n: int, params: dict | None = None) -> MetricData:
    """Named metric families: euclidean, conformal, diagonal.

    conformal: g = exp(2 phi(x)) I with phi affine, coefficients
    [c0, c1, ..., cn].  diagonal: g_ii = affine_i(x), one coefficient list
    per diagonal entry.  Either family accepts b_constant, the upper
    triangle [b_12, b_13, ..., b_{n-1,n}] of a constant antisymmetric b.
    """
    params = dict(params or {})
    bconst = np.zeros((n, n))
    if "b_constant" in params:
        vals = list(params.pop("b_constant"))
        rows, cols = np.triu_indices(n, k=1)
        if len(vals) != len(rows):
            raise ValueError(f"b_constant needs {len(rows)} entries for n={n}")
        bconst[rows, cols] = vals
        bconst[cols, rows] = -np.asarray(vals)
    bfun = lambda x, B=bconst: B.copy()
    dzero = lambda x, k=n: np.zeros((k, k, k))

    if name == "euclidean":
        if params:
            raise ValueError(f"euclidean metric takes no parameters, got {sorted(params)}")
        return MetricData(n, lambda x: np.eye(n), bfun, dzero, dzero, name=name)

    if name == "conformal":
        coeffs = params.pop("phi_coeffs", None)
        if params or coeffs is None:
            raise ValueError("conformal metric needs phi_coeffs = [c0, c1, ..., cn]")
        if len(coeffs) != n + 1:
            raise ValueError(f"phi_coeffs needs {n + 1} entries for n={n}")
        phi, gradphi = _affine(coeffs)

        def gfun(x):
            return np.exp(2.0 * phi(x)) * np.eye(n)

        def dgfun(x):
            s = np.exp(2.0 * phi(x))
            return np.einsum("d,ij->dij", 2.0 * gradphi * s, np.eye(n))

        return MetricData(n, gfun, bfun, dgfun, dzero, name=name)

    if name == "diagonal":
        entries = params.pop("diag_coeffs", None)
        if params or entries is None:
            raise ValueError("diagonal metric needs diag_coeffs = [coeff list per entry]")
        if len(entries) != n:
            raise ValueError(f"diag_coeffs needs {n} coefficient lists for n={n}")
        funs = [_affine(c) for c in entries]

        def gfun(x):
            return np.diag([f(x) for f, _ in funs])

        def dgfun(x):
            out = np.zeros((n, n, n))
            for i, (_, gcoef) in enumerate(funs):
                out[:, i, i] = gcoef
            return out

        return MetricData(n, gfun, bfun, dgfun, dzero, name=name)

    raise ValueError(f"unknown metric family {name!r} (euclidean, conformal, diagonal)")
