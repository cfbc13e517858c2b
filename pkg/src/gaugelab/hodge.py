"""Two-dimensional Hodge decomposition and the harmonic growth check.

V = grad f + perp_grad g + h with f, g zero-trace Poisson solves of div V and
curl V; h is the remainder, so reconstruction is exact by construction and
harmonicity of h (div h = curl h = 0 in the interior) is verified, not
imposed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (Ball, ScalarField, VecField, curl, div, grad, interior_mask,
                   l2_norm, lp_norm_on_ball, perp_grad, poisson_dirichlet)

__all__ = ["HodgeParts", "GrowthCheck", "hodge_decompose", "harmonic_growth_check"]


@dataclass(frozen=True)
class HodgeParts:
    potential: ScalarField      # f: gradient-part potential, zero wall trace
    stream: ScalarField         # g: rotational-part stream function, zero wall trace
    harmonic: VecField          # h: remainder
    residuals: dict


def hodge_decompose(V: VecField) -> HodgeParts:
    """Split V into gradient, rotational, and harmonic parts.

    The stream function solves the Dirichlet problem with +curl V on the
    right-hand side: for V = perp_grad(psi) one has curl V = Lap psi, so this
    sign convention returns g = psi (perp_grad(g) carries the rotational
    part).
    """
    f = poisson_dirichlet(div(V))
    g = poisson_dirichlet(curl(V))
    h_data = V.data - grad(f).data - perp_grad(g).data
    h = VecField(V.grid, h_data)
    # fixed physical margin: the interior residuals are meant to measure
    # harmonicity on a compact subset, away from the O(h^2) boundary layer
    # of the two Dirichlet solves
    inner = interior_mask(V.grid, max(2, V.grid.n_cells // 8))
    hgrid = V.grid.h
    div_h = div(h).data
    curl_h = curl(h).data
    recon = grad(f).data + perp_grad(g).data + h.data - V.data
    residuals = {
        "reconstruction": float(np.sqrt(np.sum(recon**2) * hgrid**2)),
        "div_h_interior": float(np.sqrt(np.sum(div_h[inner] ** 2) * hgrid**2)),
        "curl_h_interior": float(np.sqrt(np.sum(curl_h[inner] ** 2) * hgrid**2)),
        "norm_input": l2_norm(V),
        "norm_grad_part": l2_norm(grad(f)),
        "norm_rot_part": l2_norm(perp_grad(g)),
        "norm_harmonic": l2_norm(h),
    }
    return HodgeParts(f, g, h, residuals)


@dataclass(frozen=True)
class GrowthCheck:
    lhs: float          # integral of |h|^p over B_r
    rhs: float          # integral of |h|^p over B_R
    c_hat: float        # lhs / ((r/R)^m rhs), m = 2
    degenerate: bool    # both integrals zero


def harmonic_growth_check(h, p: float, center, r: float, R: float,
                          m: int = 2) -> GrowthCheck:
    """Measure the constant in the growth bound int_{B_r}|h|^p <= c (r/R)^m int_{B_R}|h|^p."""
    if not (0.0 < r < R):
        raise ValueError("need 0 < r < R")
    lhs = lp_norm_on_ball(h, p, Ball(center, r))
    rhs = lp_norm_on_ball(h, p, Ball(center, R))
    if rhs == 0.0:
        return GrowthCheck(lhs, rhs, 0.0, True)
    return GrowthCheck(lhs, rhs, lhs / ((r / R) ** m * rhs), False)
