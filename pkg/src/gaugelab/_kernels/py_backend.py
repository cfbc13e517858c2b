"""Numpy reference implementation of the hot kernels.

Every function here has a twin in the compiled extension; the two are kept
interchangeable and are compared by the backend parity tests.  All arrays are
C-contiguous float64.  Grids are cell-centered with spacing h, stencils are
second-order central in the interior and one-sided second-order on the first
and last slice of each axis.
"""

import numpy as np


def diff(F, axis, h):
    """Apply the first-derivative stencil along `axis` (0 or 1).

    Interior: (f[i+1] - f[i-1]) / 2h.  Ends: (-3 f0 + 4 f1 - f2) / 2h and the
    mirrored version, both exact on quadratics.
    """
    F = np.asarray(F, dtype=np.float64)
    G = np.moveaxis(F, axis, 0)
    out = np.empty_like(G)
    out[1:-1] = G[2:] - G[:-2]
    out[0] = -3.0 * G[0] + 4.0 * G[1] - G[2]
    out[-1] = 3.0 * G[-1] - 4.0 * G[-2] + G[-3]
    out *= 1.0 / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def diff_t(F, axis, h):
    """Exact transpose of `diff` as a linear operator (same axis, same h)."""
    F = np.asarray(F, dtype=np.float64)
    G = np.moveaxis(F, axis, 0)
    out = np.zeros_like(G)
    # transpose of the interior rows
    out[0:-2] -= G[1:-1]
    out[2:] += G[1:-1]
    # transpose of the two one-sided rows
    out[0] += -3.0 * G[0]
    out[1] += 4.0 * G[0]
    out[2] += -1.0 * G[0]
    out[-1] += 3.0 * G[-1]
    out[-2] += -4.0 * G[-1]
    out[-3] += 1.0 * G[-1]
    out *= 1.0 / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def gauge_fields(P, Om, h):
    """Split P^T D_k P - P^T Om_k P into skew and symmetric parts.

    Returns (A, S, Ohat) with shapes (N, N, n, n, 2):
      A    = skew(P^T D_k P) - P^T Om_k P   (the transformed potential)
      S    = sym(P^T D_k P)                 (discrete product-rule defect)
      Ohat = P^T Om_k P                     (conjugated input potential)
    """
    dP = np.stack((diff(P, 0, h), diff(P, 1, h)), axis=-1)
    M = np.einsum("xyji,xyjkd->xyikd", P, dP, optimize=True)
    Ohat = np.einsum("xyji,xyjld,xylk->xyikd", P, Om, P, optimize=True)
    Mt = np.swapaxes(M, 2, 3)
    A = 0.5 * (M - Mt) - Ohat
    S = 0.5 * (M + Mt)
    return A, S, Ohat


def energy(P, Om, h):
    """E(P) = sum |skew(P^T D P) - P^T Om P|^2 h^2 (Frobenius, both directions)."""
    A, _, _ = gauge_fields(P, Om, h)
    return float(np.sum(A * A) * h * h)


def _exp_series(B):
    # plain Taylor; callers scale so that norm(B) <= 0.5
    n = B.shape[-1]
    R = np.zeros_like(B)
    R[...] = np.eye(n)
    term = np.zeros_like(B)
    term[...] = np.eye(n)
    for k in range(1, 21):
        term = np.matmul(term, B) / k
        R = R + term
    return R


def so_exp(Z, tau=1.0):
    """Pointwise exp(tau * Z) for skew Z of shape (..., n, n).

    Closed form for n = 2, Rodrigues for n = 3, scaling and squaring with a
    truncated series otherwise.
    """
    Z = np.asarray(Z, dtype=np.float64)
    n = Z.shape[-1]
    if n == 2:
        a = tau * Z[..., 1, 0]
        c, s = np.cos(a), np.sin(a)
        R = np.empty(Z.shape, dtype=np.float64)
        R[..., 0, 0] = c
        R[..., 0, 1] = -s
        R[..., 1, 0] = s
        R[..., 1, 1] = c
        return R
    if n == 3:
        w1 = tau * Z[..., 2, 1]
        w2 = tau * Z[..., 0, 2]
        w3 = tau * Z[..., 1, 0]
        th2 = w1 * w1 + w2 * w2 + w3 * w3
        th = np.sqrt(th2)
        small = th < 1e-4
        # sin(t)/t and (1-cos(t))/t^2 with series switch near zero
        with np.errstate(invalid="ignore", divide="ignore"):
            a = np.where(small, 1.0 - th2 / 6.0 + th2 * th2 / 120.0,
                         np.sin(th) / np.where(small, 1.0, th))
            b = np.where(small, 0.5 - th2 / 24.0 + th2 * th2 / 720.0,
                         (1.0 - np.cos(th)) / np.where(small, 1.0, th2))
        K = tau * Z
        K2 = np.matmul(K, K)
        R = np.zeros(Z.shape, dtype=np.float64)
        R[..., 0, 0] = 1.0
        R[..., 1, 1] = 1.0
        R[..., 2, 2] = 1.0
        R += a[..., None, None] * K + b[..., None, None] * K2
        return R
    B = tau * Z
    norms = np.sqrt(np.sum(B * B, axis=(-2, -1)))
    mx = float(norms.max()) if norms.size else 0.0
    s = 0
    while mx > 0.5:
        mx *= 0.5
        s += 1
    R = _exp_series(B / (2.0 ** s))
    for _ in range(s):
        R = np.matmul(R, R)
    return R


def rot_update(P, Z, tau):
    """Right-multiplied retraction P <- P exp(tau Z)."""
    return np.matmul(P, so_exp(Z, tau))
